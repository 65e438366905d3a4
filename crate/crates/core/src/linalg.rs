//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending and
/// eigenvectors permuted to match.
pub fn sym_eigen_sorted(a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix; `+∞` for an empty matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    a.clone().symmetric_eigenvalues().min()
}

/// Symmetric matrix from a row-major vectorization (symmetric, so the layout
/// coincides with column-major).
pub fn sym_from_row_major(n: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v)
}

/// Symmetrizes in place: `A ← (A + Aᵀ) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_come_sorted() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        let (w, v) = sym_eigen_sorted(a.clone());
        assert_eq!(w.as_slice(), &[-1.0, 2.0, 3.0]);
        let back = &v * DMatrix::from_diagonal(&w) * v.transpose();
        assert!((back - a).amax() < 1e-12);
        assert_eq!(min_eigenvalue(&DMatrix::identity(2, 2)), 1.0);
    }
}
