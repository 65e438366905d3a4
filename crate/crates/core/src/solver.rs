//! A small path-following log-det barrier solver for reduced problems.
//!
//! Equalities are eliminated as `x = x_p + Z u` with `Z` an orthonormal basis
//! of the nullspace of `new_A`, leaving a pure LMI problem in `u`. Phase I
//! minimizes `t` subject to `S_k(x) + tI ⪰ 0` and `x + t ≥ 0` inside a large
//! ball. When its optimum is zero there is no strictly feasible point; the
//! directions that vanish along the phase-I path are then turned into
//! equalities (facial reduction) and phase I is repeated on the smaller face.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::conic::TAU_FEAS;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, sym_eigen_sorted, symmetrize};
use crate::reduced::{evaluate, ReducedProblem};

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Relative duality-gap target.
    pub eps: f64,
    /// Upper bound on `Σ_k size_k²`.
    pub max_block_dim_sq: usize,
    /// Fix variables forced to zero by rows `aᵀx = 0` with `a ≥ 0`.
    pub presolve: bool,
    pub max_facial_reductions: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps: 1e-8,
            max_block_dim_sq: 20_000,
            presolve: true,
            max_facial_reductions: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    NumericalLimit,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::NumericalLimit => "numerical_limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    pub x: Vec<f64>,
    /// `new_cᵀ x` in the problem's own sense.
    pub objective: f64,
    pub status: Status,
    pub min_block_eig: f64,
    pub feas_residual: f64,
    pub facial_reductions: usize,
    pub newton_steps: usize,
}

/// The reduced problem as equalities, LMI blocks and linear inequalities over
/// the original variables; facial reduction edits it in place.
#[derive(Clone, Debug)]
struct Working {
    n: usize,
    eq: Vec<(DVector<f64>, f64)>,
    blocks: Vec<Vec<DMatrix<f64>>>,
    /// Rows `rᵀx ≥ 0`.
    lin: Vec<DVector<f64>>,
}

impl Working {
    fn new(rp: &ReducedProblem) -> Self {
        let n = rp.n_vars;
        let eq = (0..rp.m())
            .map(|r| (rp.new_a.row(r).transpose(), rp.new_b[r]))
            .collect();
        let mut blocks = Vec::new();
        let mut lin = Vec::new();
        for b in &rp.blocks {
            if b.size == 1 {
                lin.push(DVector::from_iterator(n, b.mats.iter().map(|m| m[(0, 0)])));
            } else {
                blocks.push(b.mats.clone());
            }
        }
        if rp.nonneg_vars {
            for i in 0..n {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                lin.push(e);
            }
        }
        Working { n, eq, blocks, lin }
    }

    /// A row `aᵀx = 0` with `a ≥ 0` and `x ≥ 0` forces `x_i = 0` wherever
    /// `a_i > 0`.
    fn presolve(&mut self) -> usize {
        let mut fixed = vec![false; self.n];
        for (a, b) in &self.eq {
            let amax = a.amax();
            if amax == 0.0 || b.abs() > 1e-14 * amax {
                continue;
            }
            let sign = if a.max() > 0.0 { 1.0 } else { -1.0 };
            if a.iter().all(|&v| sign * v >= -1e-14 * amax) {
                for (i, &v) in a.iter().enumerate() {
                    if sign * v > 1e-14 * amax {
                        fixed[i] = true;
                    }
                }
            }
        }
        let count = fixed.iter().filter(|&&f| f).count();
        for (i, _) in fixed.iter().enumerate().filter(|(_, &f)| f) {
            let mut e = DVector::zeros(self.n);
            e[i] = 1.0;
            self.eq.push((e, 0.0));
        }
        count
    }
}

/// `x = x_p + Z u` parametrizes the affine set.
#[derive(Clone, Debug)]
pub(crate) struct Affine {
    pub x_p: DVector<f64>,
    pub z: DMatrix<f64>,
}

/// Rows are normalized first; a row whose residual after orthogonalization is
/// below `DEPENDENT_TOL` counts as dependent. Equalities produced by facial
/// reduction carry noise far above machine precision, so the cutoff is loose.
const DEPENDENT_TOL: f64 = 1e-6;

fn affine(eq: &[(DVector<f64>, f64)], n: usize) -> std::result::Result<Affine, f64> {
    let mut ws: Vec<DVector<f64>> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for (a, b) in eq {
        let an = a.norm();
        if an == 0.0 {
            if b.abs() > TAU_FEAS {
                return Err(b.abs());
            }
            continue;
        }
        let mut v = a / an;
        let mut beta = b / an;
        for _ in 0..2 {
            for (w, bw) in ws.iter().zip(&betas) {
                let c = w.dot(&v);
                v.axpy(-c, w, 1.0);
                beta -= c * bw;
            }
        }
        let nv = v.norm();
        if nv > DEPENDENT_TOL {
            ws.push(v / nv);
            betas.push(beta / nv);
        }
    }
    let mut x_p = DVector::zeros(n);
    for (w, b) in ws.iter().zip(&betas) {
        x_p.axpy(*b, w, 1.0);
    }
    let mut worst = 0.0f64;
    for (a, b) in eq {
        let r = (a.dot(&x_p) - b).abs() / (1.0f64).max(b.abs()).max(a.norm() * x_p.norm());
        worst = worst.max(r);
    }
    if worst > TAU_FEAS {
        return Err(worst);
    }
    let d = n - ws.len();
    let z = if ws.is_empty() {
        DMatrix::identity(n, n)
    } else if d == 0 {
        DMatrix::zeros(n, 0)
    } else {
        let mut proj = DMatrix::<f64>::identity(n, n);
        for w in &ws {
            proj -= w * w.transpose();
        }
        let (vals, vecs) = sym_eigen_sorted(proj);
        let start = vals.iter().position(|&l| l > 0.5).unwrap_or(n);
        vecs.columns(start, n - start).into_owned()
    };
    Ok(Affine { x_p, z })
}

/// Pure LMI problem in `y`: `f0 + Σ_j y_j fs[j] ⪰ 0` per block and
/// `lin_a y + lin_0 ≥ 0`.
#[derive(Clone, Debug)]
pub(crate) struct Lmi {
    pub blocks: Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)>,
    pub lin_a: DMatrix<f64>,
    pub lin_0: DVector<f64>,
    /// Indices into the working blocks / rows kept after dropping constant ones.
    block_src: Vec<usize>,
    lin_src: Vec<usize>,
    /// Ball `‖y[..ball_dim]‖ < radius`; `ball_dim = 0` disables it.
    ball_dim: usize,
    radius: f64,
}

impl Lmi {
    fn dim(&self) -> usize {
        self.lin_a.ncols()
    }

    fn nu(&self) -> f64 {
        let b: usize = self.blocks.iter().map(|(f0, _)| f0.nrows()).sum();
        (b + self.lin_a.nrows() + usize::from(self.ball_dim > 0)) as f64
    }

    fn block_value(&self, k: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let (f0, fs) = &self.blocks[k];
        let mut s = f0.clone();
        for (j, f) in fs.iter().enumerate() {
            if y[j] != 0.0 {
                s += f * y[j];
            }
        }
        s
    }

    fn barrier_value(&self, y: &DVector<f64>) -> Option<f64> {
        let mut val = 0.0;
        for k in 0..self.blocks.len() {
            let chol = self.block_value(k, y).cholesky()?;
            val -= 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        let r = &self.lin_a * y + &self.lin_0;
        for &ri in r.iter() {
            if ri <= 0.0 {
                return None;
            }
            val -= ri.ln();
        }
        if self.ball_dim > 0 {
            let s = self.radius * self.radius - y.rows(0, self.ball_dim).norm_squared();
            if s <= 0.0 {
                return None;
            }
            val -= s.ln();
        }
        Some(val)
    }

    fn barrier_derivatives(&self, y: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let p = self.dim();
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for k in 0..self.blocks.len() {
            let chol = self.block_value(k, y).cholesky()?;
            let l = chol.l();
            let s = l.nrows();
            // column j holds vec(L⁻¹ F_j L⁻ᵀ); the Hessian block is its Gram matrix
            let mut gm = DMatrix::zeros(s * s, p);
            for (j, f) in self.blocks[k].1.iter().enumerate() {
                let x = l.solve_lower_triangular(f).expect("nonsingular factor");
                let gj = l.solve_lower_triangular(&x.transpose()).expect("nonsingular factor");
                g[j] -= gj.trace();
                gm.column_mut(j).copy_from_slice(gj.as_slice());
            }
            h.gemm_tr(1.0, &gm, &gm, 1.0);
        }
        let r = &self.lin_a * y + &self.lin_0;
        if r.iter().any(|&ri| ri <= 0.0) {
            return None;
        }
        let inv = r.map(|ri| 1.0 / ri);
        g -= self.lin_a.transpose() * &inv;
        let scaled = DMatrix::from_fn(self.lin_a.nrows(), p, |i, j| self.lin_a[(i, j)] * inv[i]);
        h += scaled.transpose() * &scaled;
        if self.ball_dim > 0 {
            let yb = y.rows(0, self.ball_dim).into_owned();
            let s = self.radius * self.radius - yb.norm_squared();
            if s <= 0.0 {
                return None;
            }
            let mut gb = g.rows_mut(0, self.ball_dim);
            gb += &yb * (2.0 / s);
            let mut hb = h.view_mut((0, 0), (self.ball_dim, self.ball_dim));
            hb += DMatrix::identity(self.ball_dim, self.ball_dim) * (2.0 / s)
                + &yb * yb.transpose() * (4.0 / (s * s));
        }
        Some((g, h))
    }

    fn is_strictly_feasible(&self, y: &DVector<f64>) -> bool {
        self.barrier_value(y).is_some()
    }

    /// Smallest eigenvalue (or row value) over all constraints, in the
    /// constraint's own units.
    fn min_slack(&self, y: &DVector<f64>) -> f64 {
        let mut m = f64::INFINITY;
        for k in 0..self.blocks.len() {
            m = m.min(min_eigenvalue(&self.block_value(k, y)));
        }
        let r = &self.lin_a * y + &self.lin_0;
        r.iter().copied().fold(m, f64::min)
    }
}

pub(crate) struct LmiForm {
    pub affine: Affine,
    pub lmi: Lmi,
}

/// Builds the pure LMI form of the working problem over `u`.
fn lmi_from(w: &Working, aff: &Affine) -> std::result::Result<Lmi, f64> {
    let d = aff.z.ncols();
    let scale = 1.0f64.max(aff.x_p.norm());
    let mut blocks = Vec::new();
    let mut block_src = Vec::new();
    for (k, mats) in w.blocks.iter().enumerate() {
        let s = mats[0].nrows();
        let mut f0 = DMatrix::zeros(s, s);
        for (i, m) in mats.iter().enumerate() {
            if aff.x_p[i] != 0.0 {
                f0 += m * aff.x_p[i];
            }
        }
        let fs: Vec<DMatrix<f64>> = (0..d)
            .map(|j| {
                let mut f = DMatrix::zeros(s, s);
                for (i, m) in mats.iter().enumerate() {
                    let zij = aff.z[(i, j)];
                    if zij != 0.0 {
                        f += m * zij;
                    }
                }
                f
            })
            .collect();
        let mnorm = mats.iter().map(|m| m.norm()).fold(0.0f64, f64::max);
        let varying = fs.iter().map(|f| f.amax()).fold(0.0f64, f64::max);
        if varying <= 1e-12 * mnorm {
            let lam = min_eigenvalue(&f0);
            if lam < -TAU_FEAS * mnorm * scale {
                return Err(-lam);
            }
            continue;
        }
        blocks.push((f0, fs));
        block_src.push(k);
    }
    let mut rows = Vec::new();
    let mut lin_src = Vec::new();
    let mut consts = Vec::new();
    for (k, r) in w.lin.iter().enumerate() {
        let a = aff.z.transpose() * r;
        let c0 = r.dot(&aff.x_p);
        if a.amax() <= 1e-12 * r.amax() {
            if c0 < -TAU_FEAS * r.amax() * scale {
                return Err(-c0);
            }
            continue;
        }
        rows.push(a);
        consts.push(c0);
        lin_src.push(k);
    }
    let lin_a = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    Ok(Lmi {
        blocks,
        lin_a,
        lin_0: DVector::from_vec(consts),
        block_src,
        lin_src,
        ball_dim: 0,
        radius: 0.0,
    })
}

/// Equality elimination after presolve; shared with the SDPA writer.
pub(crate) fn lmi_form(rp: &ReducedProblem, presolve: bool) -> Result<LmiForm> {
    let mut w = Working::new(rp);
    if presolve && rp.nonneg_vars {
        w.presolve();
    }
    let aff = affine(&w.eq, w.n).map_err(|residual| Error::Infeasible { residual })?;
    let lmi = lmi_from(&w, &aff).map_err(|residual| Error::Infeasible { residual })?;
    Ok(LmiForm { affine: aff, lmi })
}

enum Centering {
    Done(DVector<f64>, usize),
    Stalled(DVector<f64>, usize),
}

/// Newton's method on `τ cᵀy + φ(y)` from a strictly feasible point.
fn center(lmi: &Lmi, c: &DVector<f64>, tau: f64, mut y: DVector<f64>) -> Centering {
    let p = lmi.dim();
    let mut steps = 0;
    for _ in 0..100 {
        let Some((g, h)) = lmi.barrier_derivatives(&y) else {
            return Centering::Stalled(y, steps);
        };
        let grad = c * tau + g;
        let mut reg = 0.0;
        let diag_scale = h.diagonal().amax().max(1e-300);
        let dir = loop {
            let mut hr = h.clone();
            for i in 0..p {
                hr[(i, i)] += reg;
            }
            if let Some(ch) = hr.cholesky() {
                break ch.solve(&(-&grad));
            }
            reg = if reg == 0.0 { 1e-14 * diag_scale } else { reg * 100.0 };
            if reg > diag_scale {
                return Centering::Stalled(y, steps);
            }
        };
        let slope = grad.dot(&dir);
        if -slope / 2.0 < 1e-10 {
            return Centering::Done(y, steps);
        }
        let f0 = tau * c.dot(&y) + lmi.barrier_value(&y).expect("current point is interior");
        let mut s = 1.0;
        loop {
            let cand = &y + &dir * s;
            if let Some(b) = lmi.barrier_value(&cand) {
                if tau * c.dot(&cand) + b <= f0 + 0.25 * s * slope {
                    y = cand;
                    break;
                }
            }
            s *= 0.5;
            if s < 1e-14 {
                return if -slope < 1e-6 {
                    Centering::Done(y, steps)
                } else {
                    Centering::Stalled(y, steps)
                };
            }
        }
        steps += 1;
    }
    Centering::Stalled(y, steps)
}

enum PhaseOne {
    Interior(DVector<f64>),
    Infeasible(f64),
    /// No strictly feasible point; returns `(y, t, ν/τ)` at the end of the path.
    Boundary(DVector<f64>, f64, f64),
    Failed,
}

fn phase_one(lmi: &Lmi, steps: &mut usize) -> PhaseOne {
    let d = lmi.dim();
    let y0 = DVector::<f64>::zeros(d);
    let mut scale = 0.0f64;
    for k in 0..lmi.blocks.len() {
        let (w, _) = sym_eigen_sorted(lmi.block_value(k, &y0));
        scale = scale.max(w.amax());
    }
    scale = scale.max(lmi.lin_0.amax());
    if scale == 0.0 {
        scale = 1.0;
    }
    let slack = lmi.min_slack(&y0);
    if slack > 1e-4 * scale {
        return PhaseOne::Interior(y0);
    }
    let mut aug = lmi.clone();
    for (f0, fs) in aug.blocks.iter_mut() {
        fs.push(DMatrix::identity(f0.nrows(), f0.nrows()));
    }
    aug.lin_a = aug.lin_a.clone().insert_column(d, 1.0);
    aug.ball_dim = d;
    aug.radius = 1e3 * (1.0 + scale);
    let mut y = y0.clone().insert_row(d, -slack + scale);
    let mut c = DVector::zeros(d + 1);
    c[d] = 1.0;
    let nu = aug.nu();
    let mut tau = 1.0 / scale;
    for _ in 0..200 {
        let stalled = match center(&aug, &c, tau, y) {
            Centering::Done(yn, k) => {
                *steps += k;
                y = yn;
                false
            }
            Centering::Stalled(yn, k) => {
                *steps += k;
                y = yn;
                true
            }
        };
        let t = y[d];
        let u = y.rows(0, d).into_owned();
        if t < -1e-4 * scale && lmi.is_strictly_feasible(&u) {
            return PhaseOne::Interior(u);
        }
        let gap = nu / tau;
        if gap < 1e-11 * scale || stalled {
            if t < -1e-9 * scale && lmi.is_strictly_feasible(&u) {
                return PhaseOne::Interior(u);
            }
            if t > 1e-7 * scale {
                return if stalled {
                    PhaseOne::Failed
                } else {
                    PhaseOne::Infeasible(t)
                };
            }
            return PhaseOne::Boundary(u, t, gap);
        }
        tau *= 5.0;
    }
    PhaseOne::Failed
}

/// Turns constraints that vanish along the phase-I path into equalities.
/// Returns `false` when nothing could be identified.
fn facially_reduce(w: &mut Working, lmi: &Lmi, u: &DVector<f64>, t: f64, gap: f64) -> bool {
    let level = t.abs().max(gap);
    let mut changed = false;
    let mut drop_blocks = Vec::new();
    for (pos, &k) in lmi.block_src.iter().enumerate() {
        let s = lmi.block_value(pos, u);
        let n_s = s.nrows();
        let (vals, vecs) = sym_eigen_sorted(s);
        let lmax = vals.amax().max(level);
        let theta = (lmax * level).sqrt();
        let n_null = vals.iter().filter(|&&l| l < theta).count();
        if n_null == 0 {
            continue;
        }
        changed = true;
        let v = vecs.columns(0, n_null).into_owned();
        let mats = &w.blocks[k];
        // S V = 0 on the face: all entries of Vᵀ S V and Uᵀ S V vanish.
        let all = vecs.clone();
        for a in 0..n_s {
            for b in 0..n_null {
                if a < n_null && a > b {
                    continue;
                }
                let row = DVector::from_iterator(
                    w.n,
                    mats.iter().map(|m| (all.column(a).transpose() * m * v.column(b))[(0, 0)]),
                );
                w.eq.push((row, 0.0));
            }
        }
        if n_null == n_s {
            drop_blocks.push(k);
        } else {
            let range = vecs.columns(n_null, n_s - n_null).into_owned();
            w.blocks[k] = mats
                .iter()
                .map(|m| {
                    let mut c = range.transpose() * m * &range;
                    symmetrize(&mut c);
                    c
                })
                .collect();
        }
    }
    let r = &lmi.lin_a * u + &lmi.lin_0;
    let rmax = r.amax().max(level);
    let theta = (rmax * level).sqrt();
    let mut drop_rows = Vec::new();
    for (pos, &k) in lmi.lin_src.iter().enumerate() {
        if r[pos] < theta {
            w.eq.push((w.lin[k].clone(), 0.0));
            drop_rows.push(k);
            changed = true;
        }
    }
    drop_blocks.sort_unstable();
    for k in drop_blocks.into_iter().rev() {
        w.blocks.remove(k);
    }
    drop_rows.sort_unstable();
    for k in drop_rows.into_iter().rev() {
        w.lin.remove(k);
    }
    changed
}

fn finish(rp: &ReducedProblem, x: DVector<f64>, status: Status, fr: usize, steps: usize) -> Result<Solution> {
    let xs: Vec<f64> = x.iter().copied().collect();
    let ev = evaluate(rp, &xs)?;
    let b_norm = rp.new_b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let certified = ev.feas_residual <= TAU_FEAS * b_norm.max(1.0)
        && ev.min_block_eig >= -TAU_FEAS
        && (!rp.nonneg_vars || ev.min_x >= -TAU_FEAS);
    let status = if status == Status::Optimal && !certified {
        log::warn!("solution fails the feasibility checks: {ev:?}");
        Status::NumericalLimit
    } else {
        status
    };
    Ok(Solution {
        objective: ev.objective,
        x: xs,
        status,
        min_block_eig: ev.min_block_eig,
        feas_residual: ev.feas_residual,
        facial_reductions: fr,
        newton_steps: steps,
    })
}

/// Solves the reduced problem. Infeasibility and numerical trouble are
/// reported through [`Solution::status`]; errors are reserved for invalid
/// input and for problems above the size cap.
pub fn solve(rp: &ReducedProblem, opts: &SolveOptions) -> Result<Solution> {
    if rp.block_dim_sq() > opts.max_block_dim_sq {
        return Err(Error::Solver(format!(
            "total block dimension {} exceeds the cap {}",
            rp.block_dim_sq(),
            opts.max_block_dim_sq
        )));
    }
    if rp.new_a.ncols() != rp.n_vars || rp.new_c.len() != rp.n_vars {
        return Err(Error::DimensionMismatch {
            expected: rp.n_vars,
            found: rp.new_a.ncols(),
        });
    }
    let sign = rp.sense.sign();
    let f = DVector::from_iterator(rp.n_vars, rp.new_c.iter().map(|c| sign * c));
    let mut w = Working::new(rp);
    if opts.presolve && rp.nonneg_vars {
        w.presolve();
    }
    let mut steps = 0;
    let mut reductions = 0;
    loop {
        let aff = match affine(&w.eq, w.n) {
            Ok(a) => a,
            Err(_) => return finish(rp, DVector::zeros(rp.n_vars), Status::Infeasible, reductions, steps),
        };
        let lmi = match lmi_from(&w, &aff) {
            Ok(l) => l,
            Err(_) => return finish(rp, aff.x_p, Status::Infeasible, reductions, steps),
        };
        if lmi.dim() == 0 {
            // a single point: feasible iff the remaining constraints hold there
            let y = DVector::zeros(0);
            let scale = 1.0f64.max(aff.x_p.amax());
            let status = if lmi.blocks.is_empty() && lmi.lin_a.nrows() == 0
                || lmi.min_slack(&y) >= -TAU_FEAS * scale
            {
                Status::Optimal
            } else {
                Status::Infeasible
            };
            return finish(rp, aff.x_p, status, reductions, steps);
        }
        match phase_one(&lmi, &mut steps) {
            PhaseOne::Interior(u) => {
                let c = aff.z.transpose() * &f;
                let offset = f.dot(&aff.x_p);
                let (u, status) = phase_two(&lmi, &c, offset, u, opts.eps, &mut steps);
                let x = &aff.x_p + &aff.z * u;
                return finish(rp, x, status, reductions, steps);
            }
            PhaseOne::Infeasible(t) => {
                log::debug!("phase I optimum {t:e} is positive");
                return finish(rp, aff.x_p, Status::Infeasible, reductions, steps)
            }
            PhaseOne::Failed => {
                return finish(rp, aff.x_p, Status::NumericalLimit, reductions, steps)
            }
            PhaseOne::Boundary(u, t, gap) => {
                if reductions >= opts.max_facial_reductions
                    || !facially_reduce(&mut w, &lmi, &u, t, gap)
                {
                    let x = &aff.x_p + &aff.z * u;
                    return finish(rp, x, Status::NumericalLimit, reductions, steps);
                }
                reductions += 1;
                log::debug!("facial reduction {reductions}");
            }
        }
    }
}

fn phase_two(
    lmi: &Lmi,
    c: &DVector<f64>,
    offset: f64,
    mut y: DVector<f64>,
    eps: f64,
    steps: &mut usize,
) -> (DVector<f64>, Status) {
    let nu = lmi.nu();
    let mut tau = nu / (c.dot(&y) + offset).abs().max(1.0);
    let ynorm0 = y.norm().max(1.0);
    for _ in 0..400 {
        match center(lmi, c, tau, y) {
            Centering::Done(yn, k) => {
                *steps += k;
                y = yn;
            }
            Centering::Stalled(yn, k) => {
                *steps += k;
                let obj = c.dot(&yn) + offset;
                let status = if nu / tau < 1e3 * eps * obj.abs().max(1.0) {
                    Status::Optimal
                } else {
                    Status::NumericalLimit
                };
                return (yn, status);
            }
        }
        let obj = c.dot(&y) + offset;
        if nu / tau < eps * obj.abs().max(1.0) {
            return (y, Status::Optimal);
        }
        if y.norm() > 1e12 * ynorm0 {
            return (y, Status::NumericalLimit);
        }
        tau *= 5.0;
    }
    (y, Status::NumericalLimit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::Sense;
    use crate::reduced::LmiBlock;

    fn scalar_blocks(rows: &[[f64; 3]]) -> Vec<LmiBlock> {
        rows.iter()
            .map(|r| LmiBlock {
                size: 1,
                mats: r.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            })
            .collect()
    }

    fn c5_lp() -> ReducedProblem {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        ReducedProblem {
            n_vars: 3,
            sense: Sense::Max,
            new_c: vec![5.0, 10.0, 10.0],
            new_a: DMatrix::from_row_slice(2, 3, &[5.0, 0.0, 0.0, 0.0, 10.0, 0.0]),
            new_b: vec![1.0, 0.0],
            blocks: scalar_blocks(&[[1.0, 2.0, 2.0], [1.0, phi - 1.0, -phi], [1.0, -phi, phi - 1.0]]),
            nonneg_vars: true,
        }
    }

    /// After `a = 1/5, b = 0` only `c` is free; every constraint is
    /// `α + β c ≥ 0`, so the optimum sits at one of the boundary points.
    fn c5_vertex_optimum() -> f64 {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let a = 0.2;
        let cons = [(0.0, 1.0), (a, 2.0), (a, -phi), (a, phi - 1.0)];
        cons.iter()
            .filter(|(_, beta)| *beta != 0.0)
            .map(|(alpha, beta)| -alpha / beta)
            .filter(|&c| cons.iter().all(|(al, be)| al + be * c >= -1e-12))
            .map(|c| 5.0 * a + 10.0 * c)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn c5_lp_optimum_is_sqrt5() {
        let sol = solve(&c5_lp(), &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 5f64.sqrt()).abs() < 1e-6, "{}", sol.objective);
        assert!((sol.objective - c5_vertex_optimum()).abs() < 1e-6);
        assert!(sol.min_block_eig >= -TAU_FEAS);
    }

    #[test]
    fn infeasible_lp_is_reported() {
        let rp = ReducedProblem {
            n_vars: 1,
            sense: Sense::Min,
            new_c: vec![1.0],
            new_a: DMatrix::from_row_slice(1, 1, &[1.0]),
            new_b: vec![-1.0],
            blocks: vec![],
            nonneg_vars: true,
        };
        let sol = solve(&rp, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
    }

    #[test]
    fn semidefinite_block_optimum() {
        // min x1 + x3 over [[x1, x2], [x2, x3]] ⪰ 0 with x2 = 1: optimum 2
        let e = |a, b, c| DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let rp = ReducedProblem {
            n_vars: 3,
            sense: Sense::Min,
            new_c: vec![1.0, 0.0, 1.0],
            new_a: DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
            new_b: vec![1.0],
            blocks: vec![LmiBlock {
                size: 2,
                mats: vec![e(1.0, 0.0, 0.0), e(0.0, 1.0, 0.0), e(0.0, 0.0, 1.0)],
            }],
            nonneg_vars: true,
        };
        let sol = solve(&rp, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-6);
    }

    #[test]
    fn facial_reduction_handles_missing_interior() {
        // [[x1, x2], [x2, x3]] ⪰ 0 with x1 = 0 forces x2 = 0; maximize -x3 + x2
        let e = |a, b, c| DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let rp = ReducedProblem {
            n_vars: 3,
            sense: Sense::Min,
            new_c: vec![0.0, -1.0, 1.0],
            new_a: DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            new_b: vec![0.0, 1.0],
            blocks: vec![LmiBlock {
                size: 2,
                mats: vec![e(1.0, 0.0, 0.0), e(0.0, 1.0, 0.0), e(0.0, 0.0, 1.0)],
            }],
            nonneg_vars: false,
        };
        let sol = solve(&rp, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-6, "{sol:?}");
        assert!(sol.facial_reductions >= 1);
    }

    #[test]
    fn cap_is_enforced() {
        let mut rp = c5_lp();
        rp.blocks.push(LmiBlock {
            size: 200,
            mats: vec![DMatrix::identity(200, 200); 3],
        });
        assert!(solve(&rp, &SolveOptions::default()).is_err());
    }
}
