//! Numerical block-diagonalization of the matrix algebra generated by a
//! Jordan configuration.
//!
//! A generic element `A` is eigendecomposed and its eigenvalues clustered.
//! A second generic element `B`, written in the eigenbasis, links clusters
//! that belong to the same simple component; within a component every
//! off-diagonal block of `B` is a scaled orthogonal matrix, which aligns the
//! clusters to a common frame. A third element `C` then tells real components
//! from complex ones. Copies of a component are read off column by column.

use std::collections::VecDeque;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, sym_eigen_sorted, sym_from_row_major};
use crate::partition::Partition;
use crate::reduce::is_square_closed;

/// Default verification tolerance for basis elements scaled to unit norm.
pub const TAU_BLK: f64 = 1e-7;
/// Relative eigenvalue gap (times the spectral radius) separating clusters.
pub const CLUSTER_GAP: f64 = 1e-6;
const COUPLING_TOL: f64 = 1e-8;
const FRAME_TOL: f64 = 1e-6;
const MAX_ATTEMPTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// Images of the part matrices in one block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockImages {
    /// Real symmetric `s × s` images.
    Real(Vec<DMatrix<f64>>),
    /// Complex Hermitian `s × s` images; the block occupies `2s` real
    /// dimensions per copy.
    Complex(Vec<DMatrix<Complex<f64>>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub size: usize,
    pub multiplicity: usize,
    pub images: BlockImages,
}

impl Block {
    pub fn field(&self) -> Field {
        match self.images {
            BlockImages::Real(_) => Field::Real,
            BlockImages::Complex(_) => Field::Complex,
        }
    }

    /// Real dimensions taken by one copy of this block.
    pub fn real_size(&self) -> usize {
        match self.images {
            BlockImages::Real(_) => self.size,
            BlockImages::Complex(_) => 2 * self.size,
        }
    }

    /// Real form of the image of part `i`: the image itself for real blocks,
    /// `[[Re, −Im], [Im, Re]]` for complex ones.
    pub fn real_image(&self, i: usize) -> DMatrix<f64> {
        match &self.images {
            BlockImages::Real(v) => v[i].clone(),
            BlockImages::Complex(v) => embed(&v[i]),
        }
    }

    pub fn n_parts(&self) -> usize {
        match &self.images {
            BlockImages::Real(v) => v.len(),
            BlockImages::Complex(v) => v.len(),
        }
    }

    /// Real form of `Σ_i x_i Y_i`.
    pub fn combine_real(&self, x: &[f64]) -> DMatrix<f64> {
        let s = self.real_size();
        let mut m = DMatrix::zeros(s, s);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                m += self.real_image(i) * xi;
            }
        }
        m
    }

    /// Dimension of the Jordan algebra of symmetric (Hermitian) matrices of
    /// this block's size.
    fn jordan_dim(&self) -> usize {
        match self.images {
            BlockImages::Real(_) => self.size * (self.size + 1) / 2,
            BlockImages::Complex(_) => self.size * self.size,
        }
    }

    fn sort_key(&self) -> Vec<f64> {
        let weights: Vec<f64> = (0..self.n_parts()).map(|i| ((i + 2) as f64).sqrt()).collect();
        let m = self.combine_real(&weights);
        let (w, _) = sym_eigen_sorted(m);
        match self.images {
            BlockImages::Real(_) => w.iter().copied().collect(),
            // embedded spectrum repeats every eigenvalue twice
            BlockImages::Complex(_) => w.iter().step_by(2).copied().collect(),
        }
    }
}

fn embed(h: &DMatrix<Complex<f64>>) -> DMatrix<f64> {
    let s = h.nrows();
    let mut m = DMatrix::zeros(2 * s, 2 * s);
    for i in 0..s {
        for j in 0..s {
            let z = h[(i, j)];
            m[(i, j)] = z.re;
            m[(i + s, j + s)] = z.re;
            m[(i, j + s)] = -z.im;
            m[(i + s, j)] = z.im;
        }
    }
    m
}

/// `Qᵀ B_i Q = ⊕_k (I_{mult_k} ⊗ Y_k(i))` for every part `i`, with complex
/// blocks in their real form. Blocks are sorted by size (descending), then by
/// the spectrum of a fixed generic combination.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagonalization {
    pub field: Field,
    pub blocks: Vec<Block>,
    pub q: DMatrix<f64>,
}

impl BlockDiagonalization {
    /// One block of size `n` with `Q = I`: the unreduced problem.
    pub fn trivial(p: &Partition) -> Self {
        let n = p.n();
        let images = (0..p.n_parts())
            .map(|k| {
                let mut e = vec![0.0; p.n_parts()];
                e[k] = 1.0;
                sym_from_row_major(n, &p.combine(&e))
            })
            .collect();
        BlockDiagonalization {
            field: Field::Real,
            blocks: vec![Block {
                size: n,
                multiplicity: 1,
                images: BlockImages::Real(images),
            }],
            q: DMatrix::identity(n, n),
        }
    }

    pub fn blk_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size).collect()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.multiplicity).collect()
    }

    /// Distinct blocks grouped by size, sizes descending:
    /// `"3×1, 2×2"` is one block of size 3 and two distinct blocks of size 2.
    pub fn structure_string(&self) -> String {
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for b in &self.blocks {
            match groups.iter_mut().find(|g| g.0 == b.size) {
                Some(g) => g.1 += 1,
                None => groups.push((b.size, 1)),
            }
        }
        groups.sort_by_key(|g| std::cmp::Reverse(g.0));
        groups
            .iter()
            .map(|(s, c)| format!("{s}×{c}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// The block-diagonal matrix `Σ_i x_i Qᵀ B_i Q` predicted by the blocks.
    pub fn block_pattern(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.q.nrows();
        let mut d = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let y = b.combine_real(x);
            let s = b.real_size();
            for _ in 0..b.multiplicity {
                d.view_mut((off, off), (s, s)).copy_from(&y);
                off += s;
            }
        }
        d
    }

    fn real_dimension(&self) -> usize {
        self.blocks.iter().map(|b| b.real_size() * b.multiplicity).sum()
    }
}

/// Replaces complex blocks by their real forms of doubled size.
pub fn complex_embed(blkd: &BlockDiagonalization) -> BlockDiagonalization {
    let blocks = blkd
        .blocks
        .iter()
        .map(|b| match &b.images {
            BlockImages::Real(_) => b.clone(),
            BlockImages::Complex(v) => Block {
                size: 2 * b.size,
                multiplicity: b.multiplicity,
                images: BlockImages::Real(v.iter().map(embed).collect()),
            },
        })
        .collect();
    BlockDiagonalization {
        field: Field::Real,
        blocks,
        q: blkd.q.clone(),
    }
}

enum Failure {
    Complex,
    Other(String),
}

/// Block-diagonalizes the algebra spanned by the non-null parts of a unital,
/// square-closed partition.
///
/// With `allow_complex = false` a component of complex type yields
/// [`Error::NoRealDecomposition`]; otherwise such components are returned as
/// Hermitian blocks and the result is flagged [`Field::Complex`].
pub fn block_diagonalize<R: Rng + ?Sized>(
    p: &Partition,
    tol: f64,
    rng: &mut R,
    allow_complex: bool,
) -> Result<BlockDiagonalization> {
    if !p.contains_identity() {
        return Err(Error::InvalidInput(
            "partition does not contain the identity".into(),
        ));
    }
    if !is_square_closed(p) {
        return Err(Error::InvalidInput(
            "partition is not closed under squares".into(),
        ));
    }
    let mut saw_complex = false;
    let mut last = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        match attempt_once(p, rng, allow_complex).and_then(|b| verify(p, &b, tol).map(|_| b)) {
            Ok(b) => return Ok(b),
            Err(Failure::Complex) => {
                saw_complex = true;
                last = "component of complex type".into();
            }
            Err(Failure::Other(reason)) => last = reason,
        }
        log::debug!("block-diagonalization attempt {attempt} failed: {last}");
    }
    if saw_complex && !allow_complex {
        return Err(Error::NoRealDecomposition {
            attempts: MAX_ATTEMPTS,
            reason: last,
        });
    }
    Err(Error::Decomposition {
        attempts: MAX_ATTEMPTS,
        reason: last,
    })
}

fn generic_element<R: Rng + ?Sized>(p: &Partition, norms: &[f64], rng: &mut R) -> DMatrix<f64> {
    let coeffs: Vec<f64> = norms.iter().map(|s| rng.gen_range(-1.0..1.0) / s).collect();
    sym_from_row_major(p.n(), &p.combine(&coeffs))
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

fn max_dev_from_identity(m: &DMatrix<f64>) -> f64 {
    (m - DMatrix::identity(m.nrows(), m.ncols())).amax()
}

struct Pending {
    block: Block,
    columns: DMatrix<f64>,
}

fn attempt_once<R: Rng + ?Sized>(
    p: &Partition,
    rng: &mut R,
    allow_complex: bool,
) -> std::result::Result<BlockDiagonalization, Failure> {
    let n = p.n();
    let norms: Vec<f64> = p.part_sizes().iter().map(|&s| (s as f64).sqrt()).collect();
    let (w, q) = sym_eigen_sorted(generic_element(p, &norms, rng));
    let rho = w.amax();
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || w[k] - w[k - 1] > CLUSTER_GAP * rho {
            clusters.push((start, k - start));
            start = k;
        }
    }
    let b = generic_element(p, &norms, rng);
    let c = generic_element(p, &norms, rng);
    let kb = q.transpose() * &b * &q;
    let kc = q.transpose() * &c * &q;
    let scale = kb.amax().max(f64::MIN_POSITIVE);
    let block = |k: &DMatrix<f64>, a: usize, b: usize| -> DMatrix<f64> {
        let (sa, da) = clusters[a];
        let (sb, db) = clusters[b];
        k.view((sa, sb), (da, db)).into_owned()
    };

    let nc = clusters.len();
    let mut weight = DMatrix::<f64>::zeros(nc, nc);
    for a in 0..nc {
        for bb in (a + 1)..nc {
            let blk = block(&kb, a, bb);
            if blk.amax() > COUPLING_TOL * scale {
                let f = frob(&blk);
                weight[(a, bb)] = f;
                weight[(bb, a)] = f;
            }
        }
    }

    let mut seen = vec![false; nc];
    let mut pending: Vec<Pending> = Vec::new();
    for root in 0..nc {
        if seen[root] {
            continue;
        }
        let mut comp = vec![root];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(a) = queue.pop_front() {
            for bb in 0..nc {
                if !seen[bb] && weight[(a, bb)] > 0.0 {
                    seen[bb] = true;
                    comp.push(bb);
                    queue.push_back(bb);
                }
            }
        }
        let d = clusters[root].1;
        if comp.iter().any(|&a| clusters[a].1 != d) {
            return Err(Failure::Other(format!(
                "clusters of unequal dimension in one component (root cluster {root})"
            )));
        }

        // Maximum spanning tree from the root; align each cluster to its parent.
        let mut frames: Vec<Option<DMatrix<f64>>> = vec![None; nc];
        frames[root] = Some(DMatrix::identity(d, d));
        let mut in_tree = vec![false; nc];
        in_tree[root] = true;
        for _ in 1..comp.len() {
            let mut best: Option<(usize, usize, f64)> = None;
            for &a in comp.iter().filter(|&&a| in_tree[a]) {
                for &bb in comp.iter().filter(|&&bb| !in_tree[bb]) {
                    let wgt = weight[(a, bb)];
                    if wgt > 0.0 && best.is_none_or(|x| wgt > x.2) {
                        best = Some((a, bb, wgt));
                    }
                }
            }
            let (parent, child, _) = best.expect("component is connected");
            let rp = frames[parent].as_ref().unwrap();
            let m = rp.transpose() * block(&kb, parent, child);
            let sigma = frob(&m) / (d as f64).sqrt();
            let o = m / sigma;
            if max_dev_from_identity(&(o.transpose() * &o)) > FRAME_TOL {
                return Err(Failure::Other(
                    "coupling block is not a scaled orthogonal matrix".into(),
                ));
            }
            frames[child] = Some(o.transpose());
            in_tree[child] = true;
        }
        let frame = |a: usize| frames[a].as_ref().unwrap();
        let aligned = |k: &DMatrix<f64>, a: usize, bb: usize| {
            frame(a).transpose() * block(k, a, bb) * frame(bb)
        };

        // N = Σ_a B_{root,a} C_{a,root} is a multiple of I for real components.
        let mut nmat = DMatrix::<f64>::zeros(d, d);
        for &a in &comp {
            nmat += aligned(&kb, root, a) * aligned(&kc, a, root);
        }
        let alpha = nmat.trace() / d as f64;
        let resid = &nmat - DMatrix::identity(d, d) * alpha;
        let nscale = frob(&nmat).max(f64::MIN_POSITIVE);
        let is_real = frob(&resid) <= FRAME_TOL * nscale;

        let m = comp.len();
        let cols_of = |a: usize| -> DMatrix<f64> {
            let (s, dd) = clusters[a];
            q.columns(s, dd) * frame(a)
        };
        if is_real {
            let mut columns = DMatrix::zeros(n, m * d);
            let aligned_cols: Vec<DMatrix<f64>> = comp.iter().map(|&a| cols_of(a)).collect();
            for copy in 0..d {
                for (pos, ac) in aligned_cols.iter().enumerate() {
                    columns.set_column(copy * m + pos, &ac.column(copy));
                }
            }
            let v0 = columns.columns(0, m).into_owned();
            let images = part_images(p, &v0);
            pending.push(Pending {
                block: Block {
                    size: m,
                    multiplicity: d,
                    images: BlockImages::Real(images),
                },
                columns,
            });
        } else {
            if !allow_complex {
                return Err(Failure::Complex);
            }
            let beta = frob(&resid) / (d as f64).sqrt();
            let j = resid / beta;
            let skew = (&j + j.transpose()).amax();
            let square = (&j * &j + DMatrix::identity(d, d)).amax();
            if !d.is_multiple_of(2) || skew > FRAME_TOL || square > FRAME_TOL {
                return Err(Failure::Other(
                    "component is neither of real nor of complex type".into(),
                ));
            }
            let t = complex_frame(&j);
            let half = d / 2;
            let mut columns = DMatrix::zeros(n, 2 * m * half);
            let aligned_cols: Vec<DMatrix<f64>> =
                comp.iter().map(|&a| cols_of(a) * &t).collect();
            for copy in 0..half {
                let base = copy * 2 * m;
                for (pos, ac) in aligned_cols.iter().enumerate() {
                    columns.set_column(base + pos, &ac.column(copy));
                    columns.set_column(base + m + pos, &ac.column(half + copy));
                }
            }
            let v0 = columns.columns(0, 2 * m).into_owned();
            let images = part_images(p, &v0)
                .into_iter()
                .map(|y| {
                    DMatrix::from_fn(m, m, |r, s| Complex::new(y[(r, s)], y[(r + m, s)]))
                })
                .collect();
            pending.push(Pending {
                block: Block {
                    size: m,
                    multiplicity: half,
                    images: BlockImages::Complex(images),
                },
                columns,
            });
        }
    }

    let keys: Vec<Vec<f64>> = pending.iter().map(|pb| pb.block.sort_key()).collect();
    let mut order: Vec<usize> = (0..pending.len()).collect();
    order.sort_by(|&x, &y| {
        let (bx, by) = (&pending[x].block, &pending[y].block);
        by.size
            .cmp(&bx.size)
            .then(bx.real_size().cmp(&by.real_size()))
            .then_with(|| {
                keys[x]
                    .iter()
                    .zip(&keys[y])
                    .map(|(u, v)| u.total_cmp(v))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    let mut qout = DMatrix::zeros(n, n);
    let mut off = 0;
    let mut blocks = Vec::with_capacity(pending.len());
    for &k in &order {
        let cols = &pending[k].columns;
        if off + cols.ncols() > n {
            return Err(Failure::Other("block columns exceed the matrix order".into()));
        }
        qout.columns_mut(off, cols.ncols()).copy_from(cols);
        off += cols.ncols();
        blocks.push(pending[k].block.clone());
    }
    let field = if blocks.iter().any(|b| b.field() == Field::Complex) {
        Field::Complex
    } else {
        Field::Real
    };
    Ok(BlockDiagonalization {
        field,
        blocks,
        q: qout,
    })
}

/// An orthonormal basis `[v_1 … v_h, Jv_1 … Jv_h]` adapted to a complex
/// structure `J`.
fn complex_frame(j: &DMatrix<f64>) -> DMatrix<f64> {
    let d = j.nrows();
    let half = d / 2;
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(half);
    let mut span: Vec<DVector<f64>> = Vec::with_capacity(d);
    for e in 0..d {
        if vs.len() == half {
            break;
        }
        let mut v = DVector::<f64>::zeros(d);
        v[e] = 1.0;
        for _ in 0..2 {
            for u in &span {
                let c = u.dot(&v);
                v.axpy(-c, u, 1.0);
            }
        }
        let nv = v.norm();
        if nv < 0.5 {
            continue;
        }
        v /= nv;
        let jv = j * &v;
        span.push(v.clone());
        span.push(jv);
        vs.push(v);
    }
    let mut t = DMatrix::zeros(d, d);
    for (k, v) in vs.iter().enumerate() {
        t.set_column(k, v);
        t.set_column(half + k, &(j * v));
    }
    t
}

/// `Vᵀ B_i V` for every part, accumulated over the cells of each part.
fn part_images(p: &Partition, v: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let n = p.n();
    let s = v.ncols();
    let mut images = vec![DMatrix::<f64>::zeros(s, s); p.n_parts()];
    for a in 0..n {
        for b in 0..n {
            let y = &mut images[p.label(a, b)];
            for r in 0..s {
                let var = v[(a, r)];
                if var == 0.0 {
                    continue;
                }
                for c in 0..s {
                    y[(r, c)] += var * v[(b, c)];
                }
            }
        }
    }
    for y in images.iter_mut() {
        let yt = y.transpose();
        *y = (&*y + yt) * 0.5;
    }
    if let Some(z) = p.null_part() {
        images[z].fill(0.0);
    }
    images
}

/// Largest residual `‖Qᵀ B_i − D_i Qᵀ‖_F / ‖B_i‖_F` over parts, which equals
/// `‖Qᵀ B_i Q − D_i‖_F / ‖B_i‖_F` for orthogonal `Q`.
fn reconstruction_error(p: &Partition, blkd: &BlockDiagonalization) -> f64 {
    let n = p.n();
    // columns of Qᵀ are rows of Q, so the accumulation below is contiguous
    let qt = blkd.q.transpose();
    let cells = p.cells();
    (0..p.n_parts())
        .into_par_iter()
        .filter(|&i| !p.is_null(i))
        .map(|i| {
            let mut r = DMatrix::<f64>::zeros(n, n);
            let mut count = 0usize;
            for &(a, b) in &cells[i] {
                r.column_mut(a).axpy(1.0, &qt.column(b), 1.0);
                count += 1;
                if a != b {
                    r.column_mut(b).axpy(1.0, &qt.column(a), 1.0);
                    count += 1;
                }
            }
            let mut off = 0;
            for blk in &blkd.blocks {
                let y = blk.real_image(i);
                let s = blk.real_size();
                for _ in 0..blk.multiplicity {
                    let dq = &y * qt.rows(off, s);
                    let mut target = r.rows_mut(off, s);
                    target -= dq;
                    off += s;
                }
            }
            r.norm() / (count as f64).sqrt()
        })
        .reduce(|| 0.0, f64::max)
}

fn verify(
    p: &Partition,
    blkd: &BlockDiagonalization,
    tol: f64,
) -> std::result::Result<(), Failure> {
    check_structure(p, blkd, tol).map_err(Failure::Other)
}

fn check_structure(
    p: &Partition,
    blkd: &BlockDiagonalization,
    tol: f64,
) -> std::result::Result<(), String> {
    let n = p.n();
    if blkd.real_dimension() != n {
        return Err(format!(
            "blocks account for {} of {n} dimensions",
            blkd.real_dimension()
        ));
    }
    let jdim: usize = blkd.blocks.iter().map(|b| b.jordan_dim()).sum();
    if p.dim() > jdim {
        return Err(format!(
            "{} parts do not fit into blocks of Jordan dimension {jdim}",
            p.dim()
        ));
    }
    let orth = max_dev_from_identity(&(blkd.q.transpose() * &blkd.q));
    if orth > tol {
        return Err(format!("Q deviates from orthogonality by {orth:.3e}"));
    }
    let rec = reconstruction_error(p, blkd);
    if rec > tol {
        return Err(format!("reconstruction error {rec:.3e}"));
    }
    Ok(())
}

/// Result of [`check_block_diagonalization`].
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct EquivalenceReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub reconstruction_error: f64,
    pub passed: bool,
}

/// Compares, for random coefficient vectors `x`, the smallest eigenvalue of
/// `Σ x_i B_i` with the smallest eigenvalue over the blocks `Σ x_i Y_k(i)`.
/// Every other sample is shifted along the identity so that both signs of
/// the minimum eigenvalue occur. Deviations are relative to
/// `max(1, spectral radius)`.
pub fn check_block_diagonalization<R: Rng + ?Sized>(
    p: &Partition,
    blkd: &BlockDiagonalization,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> EquivalenceReport {
    let n = p.n();
    let diag = p.diagonal_parts();
    let shift_ok = p.contains_identity();
    let mut worst = 0.0f64;
    let reconstruction = if blkd.real_dimension() == n && blkd.q.nrows() == n {
        reconstruction_error(p, blkd)
    } else {
        f64::INFINITY
    };
    for s in 0..samples {
        let mut x: Vec<f64> = (0..p.n_parts()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let full = sym_from_row_major(n, &p.combine(&x));
        let (w, _) = sym_eigen_sorted(full);
        let radius = w.amax().max(1.0);
        let mut lam = w[0];
        if s % 2 == 1 && shift_ok {
            let t = -w[0] + 0.25 * radius * rng.gen_range(0.1..1.0);
            for (k, xi) in x.iter_mut().enumerate() {
                if diag[k] {
                    *xi += t;
                }
            }
            lam += t;
        }
        let blocks_min = blkd
            .blocks
            .iter()
            .map(|b| min_eigenvalue(&b.combine_real(&x)))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((lam - blocks_min).abs() / radius);
    }
    EquivalenceReport {
        samples,
        max_deviation: worst,
        reconstruction_error: reconstruction,
        passed: worst <= tol && reconstruction <= tol,
    }
}
