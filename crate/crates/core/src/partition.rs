//! Partition subspaces of `𝕊ⁿ`: symmetric labelings of `[n] × [n]`.
//!
//! Labels are 0-based internally and always canonical: parts are numbered by
//! first occurrence in row-major order. Two partitions describe the same
//! subspace exactly when their label arrays are equal.
//!
//! A partition may mark one part as null: its cells lie outside the support
//! of the subspace, which is then spanned by the remaining parts only and
//! does not contain `J`.

use std::collections::HashMap;

use rand::Rng;

use crate::conic::{vec_index, SymMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    n_parts: usize,
    labels: Vec<u32>,
    null: Option<u32>,
}

impl Partition {
    /// The partition with a single part, spanning `J`.
    pub fn one_part(n: usize) -> Self {
        Partition {
            n,
            n_parts: 1,
            labels: vec![0; n * n],
            null: None,
        }
    }

    /// Every symmetric pair of cells in its own part (the full space `𝕊ⁿ`).
    pub fn discrete(n: usize) -> Self {
        let mut labels = vec![0u32; n * n];
        let mut next = 0u32;
        for i in 0..n {
            for j in i..n {
                labels[vec_index(n, i, j)] = next;
                labels[vec_index(n, j, i)] = next;
                next += 1;
            }
        }
        Partition {
            n,
            n_parts: next as usize,
            labels,
            null: None,
        }
    }

    /// Builds a partition from arbitrary row-major labels. The labeling must be
    /// symmetric; labels are renumbered canonically.
    pub fn from_labels(n: usize, labels: &[u32]) -> Result<Self> {
        if labels.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: labels.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidInput("partition of an empty grid".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if labels[vec_index(n, i, j)] != labels[vec_index(n, j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "labels not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self::canonical_from_upper(n, |i, j| labels[vec_index(n, i, j)]))
    }

    /// Renumbers by first occurrence while walking the upper triangle in
    /// row-major order; a cell `(i, j)` with `i > j` is always preceded by its
    /// mirror, so this matches the full row-major order.
    fn canonical_from_upper<K, F>(n: usize, key: F) -> Self
    where
        K: std::hash::Hash + Eq,
        F: Fn(usize, usize) -> K,
    {
        let mut map: HashMap<K, u32> = HashMap::new();
        let mut labels = vec![0u32; n * n];
        for i in 0..n {
            for j in i..n {
                let next = map.len() as u32;
                let l = *map.entry(key(i, j)).or_insert(next);
                labels[vec_index(n, i, j)] = l;
                labels[vec_index(n, j, i)] = l;
            }
        }
        Partition {
            n,
            n_parts: map.len(),
            labels,
            null: None,
        }
    }

    /// Marks part `k` as null (outside the span), or clears the mark.
    pub fn with_null_part(mut self, k: Option<usize>) -> Result<Self> {
        if let Some(k) = k {
            if k >= self.n_parts {
                return Err(Error::InvalidInput(format!(
                    "null part {} out of range 1..={}",
                    k + 1,
                    self.n_parts
                )));
            }
        }
        self.null = k.map(|k| k as u32);
        Ok(self)
    }

    /// The part outside the span, if any.
    pub fn null_part(&self) -> Option<usize> {
        self.null.map(|k| k as usize)
    }

    #[inline]
    pub fn is_null(&self, k: usize) -> bool {
        self.null == Some(k as u32)
    }

    /// Dimension of the spanned subspace.
    pub fn dim(&self) -> usize {
        self.n_parts - self.null.is_some() as usize
    }

    /// Whether `J` lies in the span, i.e. no part is null.
    pub fn contains_allones(&self) -> bool {
        self.null.is_none()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_parts(&self) -> usize {
        self.n_parts
    }

    /// Row-major 0-based labels.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, i: usize, j: usize) -> usize {
        self.labels[vec_index(self.n, i, j)] as usize
    }

    /// Upper-triangle cells `(i, j)`, `i <= j`, of every part.
    pub fn cells(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.n_parts];
        for i in 0..self.n {
            for j in i..self.n {
                out[self.label(i, j)].push((i, j));
            }
        }
        out
    }

    /// Number of full-grid cells in every part, i.e. `⟨B_k, J⟩`.
    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_parts];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// The 0/1 characteristic matrix `B_k` of part `k`.
    pub fn characteristic(&self, k: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                if self.label(i, j) == k {
                    m.set(i, j, 1.0);
                }
            }
        }
        m
    }

    /// Dense row-major `Σ_k coeffs[k] · B_k` over the spanning parts; the
    /// coefficient of a null part is ignored.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n_parts);
        self.labels
            .iter()
            .map(|&l| if Some(l) == self.null { 0.0 } else { coeffs[l as usize] })
            .collect()
    }

    /// Whether `I` lies in the span: the diagonal is covered by spanning parts
    /// that contain no off-diagonal cell.
    pub fn contains_identity(&self) -> bool {
        let mut diag = vec![false; self.n_parts];
        for i in 0..self.n {
            diag[self.label(i, i)] = true;
        }
        if self.null.is_some_and(|k| diag[k as usize]) {
            return false;
        }
        (0..self.n).all(|i| ((i + 1)..self.n).all(|j| !diag[self.label(i, j)]))
    }

    /// Parts that contain diagonal cells.
    pub fn diagonal_parts(&self) -> Vec<bool> {
        let mut diag = vec![false; self.n_parts];
        for i in 0..self.n {
            diag[self.label(i, i)] = true;
        }
        diag
    }

    /// Whether `self` refines `other` (every part of `self` lies inside a part
    /// of `other`).
    pub fn refines(&self, other: &Partition) -> bool {
        if self.n != other.n {
            return false;
        }
        let mut image: Vec<Option<u32>> = vec![None; self.n_parts];
        for (a, b) in self.labels.iter().zip(&other.labels) {
            match image[*a as usize] {
                None => image[*a as usize] = Some(*b),
                Some(x) if x != *b => return false,
                _ => {}
            }
        }
        true
    }
}

/// `part(M)`: the coarsest partition on which `M` is constant, with entries
/// identified when they agree to `digits` significant digits relative to the
/// largest entry.
pub fn part(m: &SymMatrix, digits: u32) -> Partition {
    part_dense(m.n(), &m.to_vec(), digits)
}

/// [`part`] for a dense row-major matrix. Only the upper triangle is read.
///
/// Values are sorted and split wherever consecutive values differ by more
/// than `max|M| · 10^-digits`.
pub fn part_dense(n: usize, v: &[f64], digits: u32) -> Partition {
    assert_eq!(v.len(), n * n);
    let mut cells: Vec<(f64, u32)> = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            cells.push((v[vec_index(n, i, j)], vec_index(n, i, j) as u32));
        }
    }
    let scale = cells.iter().fold(0.0f64, |m, c| m.max(c.0.abs()));
    let gap = scale * 10f64.powi(-(digits as i32));
    cells.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut cluster = vec![0u32; n * n];
    let mut id = 0u32;
    for w in 0..cells.len() {
        if w > 0 && cells[w].0 - cells[w - 1].0 > gap {
            id += 1;
        }
        cluster[cells[w].1 as usize] = id;
    }
    Partition::canonical_from_upper(n, |i, j| cluster[vec_index(n, i, j)])
}

/// `P₁ ∧ P₂`: the coarsest common refinement.
pub fn meet(p1: &Partition, p2: &Partition) -> Result<Partition> {
    if p1.n != p2.n {
        return Err(Error::DimensionMismatch {
            expected: p1.n,
            found: p2.n,
        });
    }
    let n = p1.n;
    let mut out = Partition::canonical_from_upper(n, |i, j| (p1.label(i, j), p2.label(i, j)));
    out.null = null_of_meet(p1, p2, &out);
    Ok(out)
}

/// The null part of a meet: the cells null in both inputs.
fn null_of_meet(p1: &Partition, p2: &Partition, out: &Partition) -> Option<u32> {
    let (a, b) = (p1.null?, p2.null?);
    p1.labels
        .iter()
        .zip(&p2.labels)
        .zip(&out.labels)
        .find(|((&x, &y), _)| x == a && y == b)
        .map(|(_, &l)| l)
}

/// `P ∧ part(M)` where the span grows by `M`: cells of the null part of `P`
/// on which `M` is nonzero join the support.
pub fn meet_part_dense(p: &Partition, v: &[f64], digits: u32) -> Result<Partition> {
    let n = p.n;
    let q = part_dense(n, v, digits);
    let mut out = meet(p, &q)?;
    out.null = p.null.and_then(|z| {
        (0..n * n)
            .find(|&c| p.labels[c] == z && v[c] == 0.0)
            .map(|c| out.labels[c])
    });
    if let Some(z) = out.null {
        // a value cluster may absorb tiny nonzeros next to 0; those cells are
        // in the support
        if (0..n * n).any(|c| out.labels[c] == z && v[c] != 0.0) {
            out.null = None;
        }
    }
    Ok(out)
}

/// The partition whose span is `{0}`: one null part.
pub fn empty_span(n: usize) -> Partition {
    let mut p = Partition::one_part(n);
    p.null = Some(0);
    p
}

const COEFF_RANGE: usize = 1 << 20;
const COEFF_SCALE: f64 = 1.0 / 1024.0;

/// Distinct random coefficients, one per part, drawn from `{1, …, 2²⁰} · 2⁻¹⁰`.
pub fn random_coefficients<R: Rng + ?Sized>(n_parts: usize, rng: &mut R) -> Vec<f64> {
    if n_parts <= COEFF_RANGE {
        rand::seq::index::sample(rng, COEFF_RANGE, n_parts)
            .into_iter()
            .map(|k| (k + 1) as f64 * COEFF_SCALE)
            .collect()
    } else {
        (0..n_parts).map(|_| rng.gen_range(1.0..1024.0)).collect()
    }
}

/// A random element `Σ t_k B_k` of the partition subspace, dense row-major.
/// The null part, if any, gets coefficient 0.
pub fn random_element_dense<R: Rng + ?Sized>(p: &Partition, rng: &mut R) -> Vec<f64> {
    p.combine(&random_coefficients(p.n_parts, rng))
}

/// A random element `Σ t_k B_k` of the partition subspace.
pub fn random_element<R: Rng + ?Sized>(p: &Partition, rng: &mut R) -> SymMatrix {
    SymMatrix::from_row_major(p.n, &random_element_dense(p, rng)).expect("symmetric by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, rows: &[&[u32]]) -> Vec<u32> {
        let v: Vec<u32> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        assert_eq!(v.len(), n * n);
        v
    }

    // The 3×3 examples: P1 = (a a b / a a b / b b c), P2 = (a b b / b a b / b b c).
    fn p1() -> Partition {
        Partition::from_labels(3, &grid(3, &[&[0, 0, 1], &[0, 0, 1], &[1, 1, 2]])).unwrap()
    }
    fn p2() -> Partition {
        Partition::from_labels(3, &grid(3, &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 2]])).unwrap()
    }

    #[test]
    fn part_of_identity() {
        let p = part(&SymMatrix::identity(3), 8);
        assert_eq!(p.n_parts(), 2);
        assert!(p.contains_identity());
    }

    #[test]
    fn part_of_patterned_matrix() {
        let m = SymMatrix::from_dense(&nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[1.5, 1.5, 2.0, 1.5, 1.5, 2.0, 2.0, 2.0, -3.0],
        ))
        .unwrap();
        assert_eq!(part(&m, 8), p1());
    }

    #[test]
    fn part_of_binary_matrix() {
        let mut a = SymMatrix::zeros(5);
        for i in 0..5 {
            a.set(i, (i + 1) % 5, 1.0);
        }
        assert_eq!(part(&a, 8).n_parts(), 2);
    }

    #[test]
    fn part_absorbs_noise_below_digits() {
        let v = vec![1.0, 0.5 + 1e-12, 0.5 - 1e-12, 1.0 + 1e-13];
        assert_eq!(part_dense(2, &v, 8).n_parts(), 2);
        let v = vec![1.0, 0.5 + 1e-6, 0.5 + 1e-6, 1.0];
        assert_eq!(part_dense(2, &v, 8).n_parts(), 2);
        let v = vec![1.0, 1.0 + 1e-6, 1.0 + 1e-6, 1.0];
        assert_eq!(part_dense(2, &v, 8).n_parts(), 2);
    }

    #[test]
    fn meet_of_examples_has_four_parts() {
        let p3 = meet(&p1(), &p2()).unwrap();
        assert_eq!(p3.n_parts(), 4);
        let want = Partition::from_labels(3, &grid(3, &[&[0, 1, 2], &[1, 0, 2], &[2, 2, 3]])).unwrap();
        assert_eq!(p3, want);
    }

    #[test]
    fn meet_identities() {
        let p = p1();
        assert_eq!(meet(&p, &p).unwrap(), p);
        assert_eq!(meet(&Partition::one_part(3), &p).unwrap(), p);
        assert!(meet(&p, &Partition::one_part(4)).is_err());
    }

    #[test]
    fn canonical_labels_follow_first_occurrence() {
        let p = Partition::from_labels(2, &[7, 3, 3, 9]).unwrap();
        assert_eq!(p.labels(), &[0, 1, 1, 2]);
        assert!(Partition::from_labels(2, &[0, 1, 2, 0]).is_err());
    }

    #[test]
    fn characteristic_matrices_sum_to_ones() {
        let p = meet(&p1(), &p2()).unwrap();
        let mut total = [0.0; 9];
        for k in 0..p.n_parts() {
            for (t, v) in total.iter_mut().zip(p.characteristic(k).to_vec()) {
                *t += v;
            }
        }
        assert!(total.iter().all(|&t| t == 1.0));
        assert_eq!(p.part_sizes().iter().sum::<usize>(), 9);
    }

    #[test]
    fn random_element_of_one_part_is_multiple_of_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_element(&Partition::one_part(4), &mut rng).to_vec();
        assert!(x.iter().all(|&v| v == x[0] && v > 0.0));
    }

    #[test]
    fn random_element_recovers_partition() {
        let p = meet(&p1(), &p2()).unwrap();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_element(&p, &mut rng);
            assert_eq!(part(&x, 8), p);
        }
    }

    #[test]
    fn support_grows_from_the_empty_span() {
        // diagonal entries first, then one off-diagonal pair
        let mut v = vec![0.0; 9];
        v[0] = 1.0;
        v[4] = 1.0;
        v[8] = 1.0;
        let p = meet_part_dense(&empty_span(3), &v, 8).unwrap();
        assert_eq!((p.n_parts(), p.dim()), (2, 1));
        assert!(p.contains_identity() && !p.contains_allones());
        let z = p.null_part().unwrap();
        assert_eq!(p.label(0, 1), z);
        let mut w = vec![0.0; 9];
        w[1] = 2.0;
        w[3] = 2.0;
        let q = meet_part_dense(&p, &w, 8).unwrap();
        assert_eq!((q.n_parts(), q.dim()), (3, 2));
        assert_eq!(q.label(0, 2), q.null_part().unwrap());
        // the null part takes no coefficient
        let x = q.combine(&[5.0, 6.0, 7.0]);
        assert_eq!(x[2], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_element_dense(&q, &mut rng)[2], 0.0);
    }

    #[test]
    fn null_diagonal_excludes_identity() {
        let p = p1().with_null_part(Some(2)).unwrap();
        assert!(!p.contains_identity());
        assert_eq!(p.dim(), 2);
        assert!(p1().with_null_part(Some(3)).is_err());
    }

    #[test]
    fn discrete_partition_counts() {
        let p = Partition::discrete(4);
        assert_eq!(p.n_parts(), 10);
        assert!(p.contains_identity());
        assert!(p.refines(&Partition::one_part(4)));
        assert!(!Partition::one_part(4).refines(&p));
    }
}
