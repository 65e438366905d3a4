//! Problem families: the ϑ′ number of a graph, the QAP relaxation, the
//! Erdős–Rényi polarity graphs `ER(q)` and small exhaustive oracles.

use crate::conic::{ConicProblem, Sense, SymMatrix};
use crate::error::{Error, Result};

/// A simple undirected graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: SymMatrix,
}

impl Graph {
    /// Builds a graph from 0-based edges. Duplicates are idempotent; loops
    /// are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = SymMatrix::zeros(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) out of range for {n} vertices",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("loop at vertex {}", i + 1)));
            }
            adjacency.set(i, j, 1.0);
        }
        Ok(Graph { n, adjacency })
    }

    pub fn from_adjacency(adjacency: SymMatrix) -> Result<Self> {
        for (i, j, v) in adjacency.iter() {
            if i == j || v != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "adjacency entry ({}, {}) = {v} is not a 0/1 off-diagonal value",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(Graph {
            n: adjacency.n(),
            adjacency,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.nnz()
    }

    pub fn adjacency(&self) -> &SymMatrix {
        &self.adjacency
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i, j) != 0.0
    }

    /// 0-based edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency.iter().map(|(i, j, _)| (i, j)).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for (i, j) in self.edges() {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::new(n, &edges).expect("valid cycle")
    }

    /// `m` pairwise non-adjacent vertices joined to `n − m` further vertices
    /// that are adjacent to everything. Its admissible subspace for ϑ′ need not
    /// contain `J`.
    pub fn independent_set_join(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(Error::InvalidInput(format!("need 0 < m < n, got m = {m}, n = {n}")));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if i >= m || j >= m {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, &edges)
    }
}

/// The complement graph with adjacency `J − I − A`.
pub fn complement(g: &Graph) -> Graph {
    let n = g.n;
    let mut adjacency = SymMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if !g.has_edge(i, j) {
                adjacency.set(i, j, 1.0);
            }
        }
    }
    Graph { n, adjacency }
}

/// ϑ′(G): maximize `⟨J, X⟩` subject to `tr X = 1`, `⟨A, X⟩ = 0`, `X` doubly
/// nonnegative. The adjacency row is omitted for edgeless graphs.
pub fn build_theta_prime(g: &Graph) -> Result<ConicProblem> {
    let n = g.n;
    let mut rows = vec![SymMatrix::identity(n)];
    let mut b = vec![1.0];
    if g.n_edges() > 0 {
        rows.push(g.adjacency.clone());
        b.push(0.0);
    }
    ConicProblem::new(n, Sense::Max, SymMatrix::ones(n), rows, b)
}

/// A symmetric QAP instance `min_φ Σ a_ij b_φ(i)φ(j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QapInstance {
    n: usize,
    a: SymMatrix,
    b: SymMatrix,
}

impl QapInstance {
    pub fn new(a: SymMatrix, b: SymMatrix) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::DimensionMismatch {
                expected: a.n(),
                found: b.n(),
            });
        }
        Ok(QapInstance { n: a.n(), a, b })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &SymMatrix {
        &self.b
    }

    /// `Σ_ij a_ij b_φ(i)φ(j)`.
    pub fn cost(&self, perm: &[usize]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a.get(i, j) * self.b.get(perm[i], perm[j]);
            }
        }
        s
    }
}

/// Index of the lifted variable `(i, p)` in the `n² × n²` matrix: block `p`,
/// position `i` within the block.
#[inline]
fn lifted(n: usize, block: usize, inner: usize) -> usize {
    block * n + inner
}

/// The doubly nonnegative QAP relaxation over `Y ∈ 𝕊^{n²}`:
/// minimize `⟨B ⊗ A, Y⟩` subject to `⟨I ⊗ E_jj, Y⟩ = 1`, `⟨E_jj ⊗ I, Y⟩ = 1`,
/// the gangster row `⟨I ⊗ (J − I) + (J − I) ⊗ I, Y⟩ = 0` and `⟨J, Y⟩ = n²`.
pub fn build_qap_relaxation(inst: &QapInstance) -> Result<ConicProblem> {
    let n = inst.n;
    if n < 2 {
        return Err(Error::InvalidProblem(format!("QAP order {n} is below 2")));
    }
    let nn = n * n;
    let mut c = SymMatrix::zeros(nn);
    for (p, q, bv) in inst.b.iter() {
        for i in 0..n {
            for j in 0..n {
                let av = inst.a.get(i, j);
                if av == 0.0 {
                    continue;
                }
                let (r, s) = (lifted(n, p, i), lifted(n, q, j));
                if p == q && r > s {
                    continue;
                }
                c.set(r, s, bv * av);
            }
        }
    }
    let mut rows = Vec::with_capacity(2 * n + 2);
    let mut b = Vec::with_capacity(2 * n + 2);
    for j in 0..n {
        let mut m = SymMatrix::zeros(nn);
        for p in 0..n {
            let r = lifted(n, p, j);
            m.set(r, r, 1.0);
        }
        rows.push(m);
        b.push(1.0);
    }
    for j in 0..n {
        let mut m = SymMatrix::zeros(nn);
        for i in 0..n {
            let r = lifted(n, j, i);
            m.set(r, r, 1.0);
        }
        rows.push(m);
        b.push(1.0);
    }
    let mut gangster = SymMatrix::zeros(nn);
    for p in 0..n {
        for i in 0..n {
            for k in (i + 1)..n {
                gangster.set(lifted(n, p, i), lifted(n, p, k), 1.0);
                gangster.set(lifted(n, i, p), lifted(n, k, p), 1.0);
            }
        }
    }
    rows.push(gangster);
    b.push(0.0);
    rows.push(SymMatrix::ones(nn));
    b.push(nn as f64);
    ConicProblem::new(nn, Sense::Min, c, rows, b)
}

/// The lifted permutation `vec(X_φ) vec(X_φ)ᵀ` with `X_φ[i, φ(i)] = 1`,
/// column-stacked; its objective value is `inst.cost(φ)`.
pub fn qap_lifted_point(n: usize, perm: &[usize]) -> SymMatrix {
    let mut y = SymMatrix::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            y.set(lifted(n, perm[i], i), lifted(n, perm[j], j), 1.0);
        }
    }
    y
}

fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Canonical representatives of the points of `PG(2, q)`:
/// `[0,0,1]`, `[0,1,b]`, `[1,a,b]`.
pub fn projective_points(q: u64) -> Vec<[u64; 3]> {
    let mut pts = vec![[0, 0, 1]];
    for b in 0..q {
        pts.push([0, 1, b]);
    }
    for a in 0..q {
        for b in 0..q {
            pts.push([1, a, b]);
        }
    }
    pts
}

/// The polarity graph `ER(q)`: points of `PG(2, q)`, adjacent when distinct
/// and orthogonal.
pub fn er_graph(q: u64) -> Result<Graph> {
    if q.is_multiple_of(2) || !is_prime(q) {
        return Err(Error::InvalidInput(format!("{q} is not an odd prime")));
    }
    let pts = projective_points(q);
    let mut edges = Vec::new();
    for (i, x) in pts.iter().enumerate() {
        for (j, y) in pts.iter().enumerate().skip(i + 1) {
            let dot = (x[0] * y[0] + x[1] * y[1] + x[2] * y[2]) % q;
            if dot == 0 {
                edges.push((i, j));
            }
        }
    }
    Graph::new(pts.len(), &edges)
}

/// Closed-form eigenvalue bound on the stability number of `ER(q)`.
pub fn ev_bound(q: f64) -> f64 {
    let k = q + q.sqrt() + 1.0;
    let ratio = k / (q * q + q + 1.0);
    (q.sqrt() + (q + 4.0 * (q + 1.0) * ratio).sqrt()) / (2.0 * ratio)
}

/// Largest instance order accepted by [`qap_brute_force`].
pub const BRUTE_FORCE_MAX_N: usize = 9;

/// Exact QAP optimum by enumerating all `n!` permutations (Heap's algorithm).
/// Data must be integral.
pub fn qap_brute_force(inst: &QapInstance) -> Result<i64> {
    let n = inst.n;
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::InvalidInput(format!(
            "brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}"
        )));
    }
    let to_int = |m: &SymMatrix| -> Result<Vec<i64>> {
        let mut out = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = m.get(i, j);
                if v.fract() != 0.0 {
                    return Err(Error::InvalidInput(format!("non-integral entry {v}")));
                }
                out[i * n + j] = v as i64;
            }
        }
        Ok(out)
    };
    let (a, b) = (to_int(&inst.a)?, to_int(&inst.b)?);
    let cost = |perm: &[usize]| -> i64 {
        let mut s = 0;
        for i in 0..n {
            for j in 0..n {
                s += a[i * n + j] * b[perm[i] * n + perm[j]];
            }
        }
        s
    };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}
