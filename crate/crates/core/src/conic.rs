//! Symmetric matrices, conic problem data and the orthogonal projectors onto
//! the constraint nullspace `L` and its complement `L⊥`.
//!
//! Matrices are vectorized row-major over the full `n × n` grid: entry
//! `(i, j)` lives at index `i * n + j`. The trace inner product on symmetric
//! matrices is therefore the plain dot product of the vectorizations.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on constraint rows.
pub const TAU_SYM: f64 = 1e-12;
/// Tolerance for orthonormality and projection identities.
pub const TAU_ORTH: f64 = 1e-9;
/// Tolerance on affine feasibility residuals.
pub const TAU_FEAS: f64 = 1e-8;
/// Relative cut-off for the numerical rank of the constraint rows.
pub const RANK_TOL: f64 = 1e-10;
/// Entries below this fraction of the largest entry are dropped when a dense
/// result is stored as a [`SymMatrix`].
pub const TAU_ZERO: f64 = 1e-13;

#[inline]
pub fn vec_index(n: usize, i: usize, j: usize) -> usize {
    i * n + j
}

/// A real symmetric `n × n` matrix stored by its upper triangle.
///
/// Indices are 0-based; `(i, j)` and `(j, i)` address the same entry.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// The all-ones matrix `J`.
    pub fn ones(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, 1.0);
            }
        }
        m
    }

    /// Builds a matrix from upper-triangle triplets. Duplicate positions add up.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = Self::zeros(n);
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "index ({i}, {j}) out of range for order {n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite value at ({i}, {j})")));
            }
            let cur = m.get(i, j);
            m.set(i, j, cur + v);
        }
        Ok(m)
    }

    /// Reads a dense matrix, averaging `(i, j)` and `(j, i)`. Fails when the
    /// two disagree by more than `TAU_SYM` relative to the largest entry.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        Self::from_row_major(n, a.transpose().as_slice())
    }

    /// Reads a row-major `n²` vector with the same symmetry rule as
    /// [`SymMatrix::from_dense`]; tiny entries are dropped.
    pub fn from_row_major(n: usize, v: &[f64]) -> Result<Self> {
        if v.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: v.len(),
            });
        }
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let a = v[vec_index(n, i, j)];
                let b = v[vec_index(n, j, i)];
                if (a - b).abs() > TAU_SYM * scale.max(1.0) {
                    return Err(Error::NonSymmetric {
                        row: 0,
                        deviation: (a - b).abs(),
                    });
                }
                let x = 0.5 * (a + b);
                if x.abs() > TAU_ZERO * scale {
                    m.entries.insert((i, j), x);
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let key = if i <= j { (i, j) } else { (j, i) };
        if v == 0.0 {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, v);
        }
    }

    /// Iterates over stored upper-triangle entries `(i, j, v)` with `i <= j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a
    }

    /// Row-major vectorization over the full grid.
    pub fn to_vec(&self) -> Vec<f64> {
        let n = self.n;
        let mut v = vec![0.0; n * n];
        for (i, j, x) in self.iter() {
            v[vec_index(n, i, j)] = x;
            v[vec_index(n, j, i)] = x;
        }
        v
    }

    /// Trace inner product `⟨self, other⟩`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        let (small, large) = if self.nnz() <= other.nnz() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .iter()
            .map(|(i, j, v)| {
                let w = large.get(i, j);
                if i == j {
                    v * w
                } else {
                    2.0 * v * w
                }
            })
            .sum()
    }

    /// Trace inner product with a dense row-major vectorization.
    pub fn inner_dense(&self, x: &[f64]) -> f64 {
        let n = self.n;
        self.iter()
            .map(|(i, j, v)| {
                if i == j {
                    v * x[vec_index(n, i, i)]
                } else {
                    v * (x[vec_index(n, i, j)] + x[vec_index(n, j, i)])
                }
            })
            .sum()
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        let mut m = self.clone();
        for v in m.entries.values_mut() {
            *v *= s;
        }
        m.entries.retain(|_, v| *v != 0.0);
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    /// `+1` for minimization, `-1` for maximization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        }
    }
}

/// `optimize ⟨C, X⟩ s.t. ⟨A_i, X⟩ = b_i, X doubly nonnegative`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    n: usize,
    sense: Sense,
    c: SymMatrix,
    rows: Vec<SymMatrix>,
    b: Vec<f64>,
}

impl ConicProblem {
    pub fn new(
        n: usize,
        sense: Sense,
        c: SymMatrix,
        rows: Vec<SymMatrix>,
        b: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProblem("matrix order must be positive".into()));
        }
        if rows.is_empty() {
            return Err(Error::InvalidProblem("at least one constraint is required".into()));
        }
        if rows.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: b.len(),
            });
        }
        for m in std::iter::once(&c).chain(rows.iter()) {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.n(),
                });
            }
            if m.iter().any(|(_, _, v)| !v.is_finite()) {
                return Err(Error::InvalidProblem("non-finite coefficient".into()));
            }
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite right-hand side".into()));
        }
        Ok(ConicProblem {
            n,
            sense,
            c,
            rows,
            b,
        })
    }

    /// Builds a problem from sparse row-major vectors of length `n²`
    /// (`(index, value)` pairs). Every row, reshaped to `n × n`, must be
    /// symmetric within [`TAU_SYM`].
    pub fn from_vectorized(
        n: usize,
        sense: Sense,
        c: &[(usize, f64)],
        a: &[Vec<(usize, f64)>],
        b: Vec<f64>,
    ) -> Result<Self> {
        let to_sym = |entries: &[(usize, f64)], row: usize| -> Result<SymMatrix> {
            let mut full: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for &(idx, v) in entries {
                if idx >= n * n {
                    return Err(Error::InvalidInput(format!(
                        "vector index {idx} out of range for order {n}"
                    )));
                }
                *full.entry((idx / n, idx % n)).or_insert(0.0) += v;
            }
            let scale = full.values().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut m = SymMatrix::zeros(n);
            for (&(i, j), &v) in &full {
                if i > j {
                    continue;
                }
                let w = full.get(&(j, i)).copied().unwrap_or(0.0);
                let dev = (v - w).abs();
                if dev > TAU_SYM * scale {
                    return Err(Error::NonSymmetric {
                        row,
                        deviation: dev,
                    });
                }
                m.set(i, j, 0.5 * (v + w));
            }
            // entries present only below the diagonal
            for (&(i, j), &v) in &full {
                if i > j && !full.contains_key(&(j, i)) && v.abs() > TAU_SYM * scale {
                    return Err(Error::NonSymmetric {
                        row,
                        deviation: v.abs(),
                    });
                }
            }
            Ok(m)
        };
        let c = to_sym(c, usize::MAX)?;
        let rows = a
            .iter()
            .enumerate()
            .map(|(r, row)| to_sym(row, r))
            .collect::<Result<Vec<_>>>()?;
        ConicProblem::new(n, sense, c, rows, b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn c(&self) -> &SymMatrix {
        &self.c
    }

    pub fn rows(&self) -> &[SymMatrix] {
        &self.rows
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Dimension of the ambient space `𝕊ⁿ`, i.e. `n(n+1)/2`.
    pub fn ambient_dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Applies the constraint operator: `(⟨A_i, X⟩)_i`.
    pub fn apply(&self, x: &SymMatrix) -> Vec<f64> {
        self.rows.iter().map(|a| a.inner(x)).collect()
    }

    /// Same as [`ConicProblem::apply`] for a dense row-major vectorization.
    pub fn apply_dense(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|a| a.inner_dense(x)).collect()
    }

    /// Largest absolute constraint residual `|⟨A_i, X⟩ − b_i|`.
    pub fn residual(&self, x: &SymMatrix) -> f64 {
        self.apply(x)
            .iter()
            .zip(&self.b)
            .fold(0.0f64, |m, (ax, b)| m.max((ax - b).abs()))
    }
}

/// Orthonormal basis of `L⊥ = span{A_1, …, A_m}` in the trace inner product.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    n: usize,
    elems: Vec<Vec<f64>>,
}

impl OrthoBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.elems.len()
    }

    /// Dense row-major basis elements.
    pub fn elems(&self) -> &[Vec<f64>] {
        &self.elems
    }

    pub fn element(&self, k: usize) -> SymMatrix {
        SymMatrix::from_row_major(self.n, &self.elems[k]).expect("basis elements are symmetric")
    }

    /// Coordinates `⟨X, U_k⟩` of a dense matrix.
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        self.elems.iter().map(|u| dot(u, x)).collect()
    }

    pub fn project_lperp_dense(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for u in &self.elems {
            axpy(dot(u, x), u, &mut out);
        }
        out
    }

    /// Replaces `x` by `P_L(x) = x − P_L⊥(x)`.
    pub fn project_l_dense_inplace(&self, x: &mut [f64]) {
        let coeffs = self.coefficients(x);
        for (u, c) in self.elems.iter().zip(coeffs) {
            axpy(-c, u, x);
        }
    }

    fn check_dim(&self, x: &SymMatrix) -> Result<()> {
        if x.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.n(),
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha == 0.0 {
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthonormalizes the constraint rows by modified Gram–Schmidt with one
/// re-orthogonalization pass. Rows whose remaining norm falls below
/// `tol × (largest row norm)` are treated as dependent and dropped.
pub fn orthonormalize_constraints(problem: &ConicProblem, tol: f64) -> Result<OrthoBasis> {
    let n = problem.n();
    let max_norm = problem
        .rows()
        .iter()
        .map(|r| r.frobenius_norm())
        .fold(0.0f64, f64::max);
    let mut elems: Vec<Vec<f64>> = Vec::new();
    if max_norm == 0.0 {
        return Ok(OrthoBasis { n, elems });
    }
    for row in problem.rows() {
        let mut v = row.to_vec();
        for _ in 0..2 {
            for u in &elems {
                let c = dot(u, &v);
                axpy(-c, u, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > tol * max_norm {
            v.iter_mut().for_each(|x| *x /= norm);
            elems.push(v);
        }
    }
    Ok(OrthoBasis { n, elems })
}

/// Orthogonal projection onto `L⊥`.
pub fn project_lperp(x: &SymMatrix, basis: &OrthoBasis) -> Result<SymMatrix> {
    basis.check_dim(x)?;
    SymMatrix::from_row_major(basis.n, &basis.project_lperp_dense(&x.to_vec()))
}

/// Orthogonal projection onto `L`, computed as `X − P_L⊥(X)`.
pub fn project_l(x: &SymMatrix, basis: &OrthoBasis) -> Result<SymMatrix> {
    basis.check_dim(x)?;
    let mut v = x.to_vec();
    basis.project_l_dense_inplace(&mut v);
    SymMatrix::from_row_major(basis.n, &v)
}

/// Minimum-norm solution of `⟨A_i, X⟩ = b_i` as a dense row-major vector.
/// It lies in `L⊥` and equals `P_L⊥(X₀)` for any feasible `X₀`.
pub fn min_norm_feasible_dense(problem: &ConicProblem, basis: &OrthoBasis) -> Result<Vec<f64>> {
    let n = problem.n();
    let m = problem.m();
    let r = basis.rank();
    let bnorm = problem.b().iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0 {
        if bnorm > TAU_FEAS {
            return Err(Error::Infeasible { residual: bnorm });
        }
        return Ok(vec![0.0; n * n]);
    }
    let g = DMatrix::from_fn(m, r, |i, k| problem.rows()[i].inner_dense(&basis.elems[k]));
    let b = DVector::from_column_slice(problem.b());
    let svd = g.clone().svd(true, true);
    let alpha = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Solver(e.to_string()))?;
    let residual = (&g * &alpha - &b).amax();
    if residual > TAU_FEAS * bnorm.max(1.0) {
        return Err(Error::Infeasible { residual });
    }
    let mut x = vec![0.0; n * n];
    for (k, u) in basis.elems.iter().enumerate() {
        axpy(alpha[k], u, &mut x);
    }
    Ok(x)
}

/// Minimum-norm solution of the affine constraints, `X_{0,L⊥}`.
pub fn min_norm_feasible(problem: &ConicProblem, basis: &OrthoBasis) -> Result<SymMatrix> {
    SymMatrix::from_row_major(problem.n(), &min_norm_feasible_dense(problem, basis)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c5_adjacency() -> SymMatrix {
        let mut a = SymMatrix::zeros(5);
        for i in 0..5 {
            a.set(i, (i + 1) % 5, 1.0);
        }
        a
    }

    fn theta_c5() -> ConicProblem {
        ConicProblem::new(
            5,
            Sense::Max,
            SymMatrix::ones(5),
            vec![SymMatrix::identity(5), c5_adjacency()],
            vec![1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn single_identity_row_normalizes() {
        let p = ConicProblem::new(
            2,
            Sense::Min,
            SymMatrix::zeros(2),
            vec![SymMatrix::identity(2)],
            vec![1.0],
        )
        .unwrap();
        let basis = orthonormalize_constraints(&p, RANK_TOL).unwrap();
        assert_eq!(basis.rank(), 1);
        let s = 1.0 / 2f64.sqrt();
        for (got, want) in basis.elems()[0].iter().zip([s, 0.0, 0.0, s]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn dependent_rows_collapse() {
        let p = ConicProblem::new(
            2,
            Sense::Min,
            SymMatrix::zeros(2),
            vec![SymMatrix::identity(2), SymMatrix::identity(2).scaled(2.0)],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert_eq!(orthonormalize_constraints(&p, RANK_TOL).unwrap().rank(), 1);
    }

    #[test]
    fn theta_c5_rows_are_orthogonal() {
        let p = theta_c5();
        // Gram matrix of the raw rows, computed entrywise.
        let rows = p.rows();
        let gram: Vec<f64> = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| {
                let (a, b) = (rows[i].to_dense(), rows[j].to_dense());
                a.component_mul(&b).sum()
            })
            .collect();
        assert_eq!(gram, vec![5.0, 0.0, 0.0, 10.0]);
        let basis = orthonormalize_constraints(&p, RANK_TOL).unwrap();
        assert_eq!(basis.rank(), 2);
        for i in 0..2 {
            for j in 0..2 {
                let ip = dot(&basis.elems()[i], &basis.elems()[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < TAU_ORTH);
            }
        }
    }

    #[test]
    fn basis_reconstructs_rows() {
        let p = theta_c5();
        let basis = orthonormalize_constraints(&p, RANK_TOL).unwrap();
        for row in p.rows() {
            let v = row.to_vec();
            let back = basis.project_lperp_dense(&v);
            let dev = v.iter().zip(&back).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(dev < TAU_ORTH);
        }
    }

    #[test]
    fn projection_of_span_element_vanishes_on_l() {
        let p = theta_c5();
        let basis = orthonormalize_constraints(&p, RANK_TOL).unwrap();
        let x = SymMatrix::identity(5).scaled(3.0);
        let pl = project_l(&x, &basis).unwrap();
        assert!(pl.max_abs() < TAU_ORTH);
    }

    #[test]
    fn c_l_of_theta_is_complement_adjacency() {
        let p = theta_c5();
        let basis = orthonormalize_constraints(&p, RANK_TOL).unwrap();
        let cl = project_l(p.c(), &basis).unwrap().to_dense();
        let adj = c5_adjacency().to_dense();
        let comp = DMatrix::from_element(5, 5, 1.0) - DMatrix::identity(5, 5) - adj;
        assert!((cl - comp).amax() < TAU_ORTH);
    }

    #[test]
    fn theta_min_norm_point_is_scaled_identity() {
        let p = theta_c5();
        let basis = orthonormalize_constraints(&p, RANK_TOL).unwrap();
        let x0 = min_norm_feasible(&p, &basis).unwrap().to_dense();
        assert!((x0 - DMatrix::identity(5, 5) / 5.0).amax() < TAU_ORTH);
    }

    #[test]
    fn zero_rhs_gives_zero_point() {
        let mut p = theta_c5();
        p.b = vec![0.0, 0.0];
        let basis = orthonormalize_constraints(&p, RANK_TOL).unwrap();
        assert!(min_norm_feasible(&p, &basis).unwrap().is_zero());
    }

    #[test]
    fn inconsistent_rows_are_infeasible() {
        let p = ConicProblem::new(
            2,
            Sense::Min,
            SymMatrix::zeros(2),
            vec![SymMatrix::identity(2), SymMatrix::identity(2).scaled(2.0)],
            vec![1.0, 1.0],
        )
        .unwrap();
        let basis = orthonormalize_constraints(&p, RANK_TOL).unwrap();
        assert!(matches!(
            min_norm_feasible(&p, &basis),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn nonsymmetric_row_rejected() {
        let err = ConicProblem::from_vectorized(2, Sense::Min, &[], &[vec![(1, 1.0)]], vec![0.0])
            .unwrap_err();
        assert!(matches!(err, Error::NonSymmetric { row: 0, .. }));
        let ok = ConicProblem::from_vectorized(
            2,
            Sense::Min,
            &[],
            &[vec![(1, 1.0), (2, 1.0)]],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(ok.rows()[0].get(0, 1), 1.0);
    }

    #[test]
    fn projection_dimension_mismatch() {
        let basis = orthonormalize_constraints(&theta_c5(), RANK_TOL).unwrap();
        assert!(matches!(
            project_l(&SymMatrix::identity(3), &basis),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn vectorization_round_trip() {
        let m = SymMatrix::from_triplets(3, &[(0, 1, 2.5), (2, 2, -1.0), (0, 2, 0.25)]).unwrap();
        assert_eq!(SymMatrix::from_row_major(3, &m.to_vec()).unwrap(), m);
        assert_eq!(SymMatrix::from_dense(&m.to_dense()).unwrap(), m);
    }
}
