//! The randomized Jordan-reduction fixed point and its deterministic
//! admissibility certificate.
//!
//! Starting from `part(C_L) ∧ part(X₀)`, the partition is refined with
//! `part(P_L(X))` and `part(X²)` for random elements `X` until `repeats`
//! consecutive passes change nothing. The result is then certified; a failed
//! certificate resumes the loop.
//!
//! The loop tracks the support of the span: cells on which `C_L`, `X₀` and
//! every sample vanish form a null part, so the result can be an admissible
//! subspace that does not contain `J`.

use log::debug;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conic::{
    axpy, min_norm_feasible_dense, orthonormalize_constraints, vec_index, ConicProblem,
    OrthoBasis, RANK_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen_sorted, sym_from_row_major};
use crate::partition::{empty_span, meet_part_dense, random_element_dense, Partition};

pub const DEFAULT_DIGITS: u32 = 8;
pub const DEFAULT_REPEATS: usize = 2;
/// Default certificate tolerance on relative constancy violations.
pub const CERT_TOL: f64 = 1e-7;
/// Entries of a projected matrix below this fraction of the input's
/// Frobenius norm are treated as exact zeros before `part`.
const NOISE_FLOOR: f64 = 1e-10;
/// Floor, relative to a reference norm, for the scale used in constancy checks.
const SCALE_FLOOR: f64 = 1e-6;
/// Prime modulus for the square-closure identity test (2⁵⁰ − 27).
const CLOSURE_PRIME: u64 = 1_125_899_906_842_597;

#[derive(Clone, Debug)]
pub struct ReduceOptions {
    pub digits: u32,
    pub repeats: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            digits: DEFAULT_DIGITS,
            repeats: DEFAULT_REPEATS,
            seed: 0,
            tol: CERT_TOL,
            max_restarts: 10,
        }
    }
}

/// Outcome of [`reduce`]: a certified partition plus bookkeeping.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub partition: Partition,
    pub certificate: CertificateReport,
    pub iterations: usize,
    pub restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    #[serde(rename = "contains_CL")]
    pub contains_cl: bool,
    #[serde(rename = "contains_X0")]
    pub contains_x0: bool,
    #[serde(rename = "L_invariant")]
    pub l_invariant: bool,
    pub square_closed: bool,
    pub contains_identity: bool,
    pub contains_allones: bool,
    pub max_violation: f64,
}

impl CertificateReport {
    /// Admissibility: conditions (a) on `C_L` and `X₀`, (b) and (c).
    pub fn admissible(&self) -> bool {
        self.contains_cl && self.contains_x0 && self.l_invariant && self.square_closed
    }

    /// Admissible and unital, i.e. a Jordan configuration.
    pub fn jordan_configuration(&self) -> bool {
        self.admissible() && self.contains_identity
    }
}

/// Problem data shared by the refinement loop and the certificate.
struct Projected {
    basis: OrthoBasis,
    c_l: Vec<f64>,
    c_ref: f64,
    x0: Vec<f64>,
    x0_ref: f64,
}

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn prune(v: &mut [f64], reference: f64) {
    let floor = NOISE_FLOOR * reference;
    for x in v.iter_mut() {
        if x.abs() <= floor {
            *x = 0.0;
        }
    }
}

impl Projected {
    fn new(problem: &ConicProblem) -> Result<Self> {
        let basis = orthonormalize_constraints(problem, RANK_TOL)?;
        let mut c_l = problem.c().to_vec();
        let c_ref = frobenius(&c_l);
        basis.project_l_dense_inplace(&mut c_l);
        prune(&mut c_l, c_ref);
        let mut x0 = min_norm_feasible_dense(problem, &basis)?;
        let x0_ref = frobenius(&x0);
        prune(&mut x0, x0_ref);
        Ok(Projected {
            basis,
            c_l,
            c_ref,
            x0,
            x0_ref,
        })
    }
}

/// Finds the optimal admissible partition subspace with the randomized
/// refinement loop and certifies it.
pub fn admissible_subspace<R: Rng + ?Sized>(
    problem: &ConicProblem,
    digits: u32,
    rng: &mut R,
    repeats: usize,
) -> Result<Partition> {
    let opts = ReduceOptions {
        digits,
        repeats,
        ..ReduceOptions::default()
    };
    Ok(reduce_with_rng(problem, &opts, rng)?.partition)
}

/// [`admissible_subspace`] with an explicit options struct, seeded from
/// `opts.seed`.
pub fn reduce(problem: &ConicProblem, opts: &ReduceOptions) -> Result<Reduction> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    reduce_with_rng(problem, opts, &mut rng)
}

fn reduce_with_rng<R: Rng + ?Sized>(
    problem: &ConicProblem,
    opts: &ReduceOptions,
    rng: &mut R,
) -> Result<Reduction> {
    let n = problem.n();
    let data = Projected::new(problem)?;
    let mut p = meet_part_dense(&empty_span(n), &data.c_l, opts.digits)?;
    p = meet_part_dense(&p, &data.x0, opts.digits)?;
    debug!("initial partition: {} parts", p.n_parts());
    let repeats = opts.repeats.max(1);
    let mut clean = 0;
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        iterations += 1;
        let next = refine_once(&p, &data, opts.digits, rng)?;
        debug!("iteration {iterations}: {} parts", next.n_parts());
        let unchanged = next == p;
        p = next;
        if unchanged {
            clean += 1;
        } else {
            clean = 0;
        }
        if clean < repeats {
            continue;
        }
        let cert = certify_projected(&p, &data, opts.tol);
        if cert.admissible() {
            return Ok(Reduction {
                partition: p,
                certificate: cert,
                iterations,
                restarts,
            });
        }
        restarts += 1;
        debug!(
            "certificate failed (violation {:.3e}), restart {restarts}",
            cert.max_violation
        );
        if restarts > opts.max_restarts {
            return Err(Error::NotCertified {
                restarts,
                max_violation: cert.max_violation,
            });
        }
        clean = 0;
    }
}

/// Runs `passes` refinement passes from `p` and reports whether any of them
/// splits a part or grows the support.
pub fn refines_further<R: Rng + ?Sized>(
    problem: &ConicProblem,
    p: &Partition,
    digits: u32,
    rng: &mut R,
    passes: usize,
) -> Result<bool> {
    if p.n() != problem.n() {
        return Err(Error::DimensionMismatch {
            expected: problem.n(),
            found: p.n(),
        });
    }
    let data = Projected::new(problem)?;
    let mut q = meet_part_dense(p, &data.c_l, digits)?;
    q = meet_part_dense(&q, &data.x0, digits)?;
    for _ in 0..passes {
        q = refine_once(&q, &data, digits, rng)?;
    }
    Ok(q != *p)
}

fn refine_once<R: Rng + ?Sized>(
    p: &Partition,
    data: &Projected,
    digits: u32,
    rng: &mut R,
) -> Result<Partition> {
    let n = p.n();
    let x = random_element_dense(p, rng);

    let mut proj = x.clone();
    data.basis.project_l_dense_inplace(&mut proj);
    prune(&mut proj, frobenius(&x));
    let p = meet_part_dense(p, &proj, digits)?;

    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(p);
    }
    let xm = sym_from_row_major(n, &x) / scale;
    let mut sq = (&xm * &xm).as_slice().to_vec();
    // column-major storage of a symmetric product doubles as row-major
    let sq_ref = frobenius(&sq);
    prune(&mut sq, sq_ref);
    meet_part_dense(&p, &sq, digits)
}

/// Deterministically checks whether `P` is an admissible partition subspace
/// for `problem`.
///
/// Constancy violations are measured relative to the largest entry of the
/// tested matrix. Square closure is decided by comparing, cell by cell, the
/// multisets `{ {L[a,k], L[b,k]} : k }` of label pairs, which determine the
/// entry `(a, b)` of `(Σ t_i B_i)²` as a polynomial in `t`; the comparison
/// uses a modular fingerprint and reports the exact multiset discrepancy on
/// mismatch.
pub fn certify_admissible(
    p: &Partition,
    problem: &ConicProblem,
    tol: f64,
) -> Result<CertificateReport> {
    if p.n() != problem.n() {
        return Err(Error::DimensionMismatch {
            expected: problem.n(),
            found: p.n(),
        });
    }
    let data = Projected::new(problem)?;
    Ok(certify_projected(p, &data, tol))
}

fn certify_projected(p: &Partition, data: &Projected, tol: f64) -> CertificateReport {
    let v_cl = constancy_violation(p, &data.c_l, data.c_ref);
    let v_x0 = constancy_violation(p, &data.x0, data.x0_ref);
    let v_l = l_invariance_violation(p, &data.basis);
    let v_sq = square_closure_violation(p);
    CertificateReport {
        contains_cl: v_cl <= tol,
        contains_x0: v_x0 <= tol,
        l_invariant: v_l <= tol,
        square_closed: v_sq == 0.0,
        contains_identity: p.contains_identity(),
        contains_allones: p.contains_allones(),
        max_violation: v_cl.max(v_x0).max(v_l).max(v_sq),
    }
}

/// Largest spread `max − min` within a part, relative to the matrix scale.
/// On the null part the largest absolute entry counts instead.
pub(crate) fn constancy_violation(p: &Partition, v: &[f64], reference: f64) -> f64 {
    let n = p.n();
    let maxabs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = maxabs.max(SCALE_FLOOR * reference);
    if scale == 0.0 {
        return 0.0;
    }
    let mut lo = vec![f64::INFINITY; p.n_parts()];
    let mut hi = vec![f64::NEG_INFINITY; p.n_parts()];
    for i in 0..n {
        for j in 0..n {
            let l = p.label(i, j);
            let x = v[vec_index(n, i, j)];
            lo[l] = lo[l].min(x);
            hi[l] = hi[l].max(x);
        }
    }
    lo.iter()
        .zip(&hi)
        .enumerate()
        .map(|(k, (a, b))| if p.is_null(k) { a.abs().max(b.abs()) } else { b - a })
        .fold(0.0f64, f64::max)
        / scale
}

/// `P_L⊥(B_i) = Σ_k G_ik U_k` with `G_ik = ⟨B_i, U_k⟩` over the spanning
/// parts. All of these are constant on parts (and vanish on the null part)
/// iff `Σ_k w_k U_k` does, for `w` ranging over a basis of the row space of
/// `G`.
fn l_invariance_violation(p: &Partition, basis: &OrthoBasis) -> f64 {
    let r = basis.rank();
    if r == 0 {
        return 0.0;
    }
    let mut g = DMatrix::<f64>::zeros(p.n_parts(), r);
    for (k, u) in basis.elems().iter().enumerate() {
        for (cell, &l) in p.labels().iter().enumerate() {
            if p.is_null(l as usize) {
                continue;
            }
            g[(l as usize, k)] += u[cell];
        }
    }
    let (w, v) = sym_eigen_sorted(g.transpose() * &g);
    let wmax = w.max();
    if wmax <= 0.0 {
        return 0.0;
    }
    let nn = p.n() * p.n();
    let mut worst = 0.0f64;
    for idx in 0..r {
        if w[idx] <= 1e-12 * wmax {
            continue;
        }
        let mut m = vec![0.0; nn];
        for (k, u) in basis.elems().iter().enumerate() {
            axpy(v[(k, idx)], u, &mut m);
        }
        worst = worst.max(constancy_violation(p, &m, 1.0));
    }
    worst
}

/// Whether the span of the parts is closed under `X ↦ X²`.
pub fn is_square_closed(p: &Partition) -> bool {
    square_closure_violation(p) == 0.0
}

#[inline]
fn mul_add(acc: u128, a: u64, b: u64) -> u128 {
    acc + (a as u128) * (b as u128)
}

/// 0 when the span is closed under `X ↦ X²`; otherwise the largest multiset
/// discrepancy (number of label pairs that would have to change) between two
/// cells of one part, or between a null cell and zero.
fn square_closure_violation(p: &Partition) -> f64 {
    let n = p.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c105);
    let t: Vec<u64> = (0..p.n_parts())
        .map(|k| if p.is_null(k) { 0 } else { rng.gen_range(1..CLOSURE_PRIME) })
        .collect();
    let rows: Vec<Vec<u64>> = (0..n)
        .map(|a| (0..n).map(|k| t[p.label(a, k)]).collect())
        .collect();
    // Each product is below 2¹⁰⁰, so a row of up to 2²⁷ terms fits in u128.
    let sig: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (a..n)
                .map(|b| {
                    let acc = rows[a]
                        .iter()
                        .zip(&rows[b])
                        .fold(0u128, |acc, (&x, &y)| mul_add(acc, x, y));
                    (acc % CLOSURE_PRIME as u128) as u64
                })
                .collect()
        })
        .collect();
    let mut first: Vec<Option<(usize, usize)>> = vec![None; p.n_parts()];
    let mut worst = 0.0f64;
    let mut checked = vec![false; p.n_parts()];
    for a in 0..n {
        for b in a..n {
            let l = p.label(a, b);
            if p.is_null(l) {
                if !checked[l] && sig[a][b - a] != 0 {
                    checked[l] = true;
                    worst = worst.max(spanning_pairs(p, (a, b)).len().max(1) as f64);
                }
                continue;
            }
            match first[l] {
                None => first[l] = Some((a, b)),
                Some((c, d)) => {
                    if !checked[l] && sig[a][b - a] != sig[c][d - c] {
                        checked[l] = true;
                        worst = worst.max(pair_multiset_discrepancy(p, (a, b), (c, d)));
                    }
                }
            }
        }
    }
    worst
}

/// Sorted label pairs `{L[a,k], L[b,k]}` with both labels spanning.
fn spanning_pairs(p: &Partition, (a, b): (usize, usize)) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = (0..p.n())
        .map(|k| (p.label(a, k), p.label(b, k)))
        .filter(|&(s, t)| !p.is_null(s) && !p.is_null(t))
        .map(|(s, t)| (s.min(t), s.max(t)))
        .collect();
    v.sort_unstable();
    v
}

fn pair_multiset_discrepancy(p: &Partition, x: (usize, usize), y: (usize, usize)) -> f64 {
    let (u, v) = (spanning_pairs(p, x), spanning_pairs(p, y));
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < u.len() && j < v.len() {
        match u[i].cmp(&v[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (u.len().max(v.len()) - common) as f64
}
