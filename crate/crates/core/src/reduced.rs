//! The reduced problem over part coefficients.
//!
//! With `X = Σ_i x_i B_i`, the constraints become `new_A x = new_b` where
//! `new_A[r][i] = ⟨A_r, B_i⟩`, the objective becomes `new_cᵀ x`, and
//! `X ⪰ 0` becomes `Σ_i x_i F_i^(k) ⪰ 0` for every block `k`. Entrywise
//! nonnegativity of `X` is exactly `x ≥ 0` because parts have disjoint 0/1
//! supports.

use nalgebra::{DMatrix, DVector};

use crate::blockdiag::{complex_embed, BlockDiagonalization};
use crate::conic::{ConicProblem, Sense, SymMatrix};
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::partition::Partition;

/// One linear matrix inequality `Σ_i x_i mats[i] ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiBlock {
    pub size: usize,
    pub mats: Vec<DMatrix<f64>>,
}

impl LmiBlock {
    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.size, self.size);
        for (m, &xi) in self.mats.iter().zip(x) {
            if xi != 0.0 {
                s += m * xi;
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedProblem {
    pub n_vars: usize,
    pub sense: Sense,
    pub new_c: Vec<f64>,
    /// `m × n_vars`.
    pub new_a: DMatrix<f64>,
    pub new_b: Vec<f64>,
    /// One entry per distinct block; complex blocks are already in real form.
    pub blocks: Vec<LmiBlock>,
    pub nonneg_vars: bool,
}

/// `(⟨M, B_0⟩, …, ⟨M, B_{k−1}⟩)`, i.e. `vec(M)ᵀ · PMat`. The null part,
/// which is not in the span, gets 0.
fn part_coefficients(m: &SymMatrix, p: &Partition) -> Vec<f64> {
    let mut out = vec![0.0; p.n_parts()];
    for (i, j, v) in m.iter() {
        out[p.label(i, j)] += if i == j { v } else { 2.0 * v };
    }
    if let Some(z) = p.null_part() {
        out[z] = 0.0;
    }
    out
}

/// Assembles the reduced problem. Complex blocks are embedded as real blocks
/// of doubled size.
pub fn assemble_reduced(
    problem: &ConicProblem,
    p: &Partition,
    blkd: &BlockDiagonalization,
) -> Result<ReducedProblem> {
    if p.n() != problem.n() {
        return Err(Error::DimensionMismatch {
            expected: problem.n(),
            found: p.n(),
        });
    }
    let blkd = complex_embed(blkd);
    for b in &blkd.blocks {
        if b.n_parts() != p.n_parts() {
            return Err(Error::DimensionMismatch {
                expected: p.n_parts(),
                found: b.n_parts(),
            });
        }
    }
    let k = p.n_parts();
    let m = problem.m();
    let extra = p.null_part().is_some() as usize;
    let mut new_a = DMatrix::zeros(m + extra, k);
    for (r, row) in problem.rows().iter().enumerate() {
        for (i, v) in part_coefficients(row, p).into_iter().enumerate() {
            new_a[(r, i)] = v;
        }
    }
    let mut new_b = problem.b().to_vec();
    // the null part's variable is pinned to 0
    if let Some(z) = p.null_part() {
        new_a[(m, z)] = 1.0;
        new_b.push(0.0);
    }
    let blocks = blkd
        .blocks
        .iter()
        .map(|b| LmiBlock {
            size: b.real_size(),
            mats: (0..k).map(|i| b.real_image(i)).collect(),
        })
        .collect();
    Ok(ReducedProblem {
        n_vars: k,
        sense: problem.sense(),
        new_c: part_coefficients(problem.c(), p),
        new_a,
        new_b,
        blocks,
        nonneg_vars: true,
    })
}

/// Objective and feasibility measures of a candidate `x`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Evaluation {
    pub objective: f64,
    /// `‖new_A x − new_b‖₂`.
    pub feas_residual: f64,
    /// Smallest eigenvalue over all blocks.
    pub min_block_eig: f64,
    /// Smallest variable (`+∞` without variables).
    pub min_x: f64,
}

impl ReducedProblem {
    pub fn m(&self) -> usize {
        self.new_b.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.new_c.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `Σ_k size_k²`, the quantity bounded by the solver cap.
    pub fn block_dim_sq(&self) -> usize {
        self.blocks.iter().map(|b| b.size * b.size).sum()
    }

    /// Block structure string of the LMI blocks ("size×count", sizes descending).
    pub fn structure_string(&self) -> String {
        let mut sizes: Vec<usize> = self.blocks.iter().map(|b| b.size).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for s in sizes {
            match groups.last_mut() {
                Some(g) if g.0 == s => g.1 += 1,
                _ => groups.push((s, 1)),
            }
        }
        groups
            .iter()
            .map(|(s, c)| format!("{s}×{c}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn evaluate(rp: &ReducedProblem, x: &[f64]) -> Result<Evaluation> {
    if x.len() != rp.n_vars {
        return Err(Error::DimensionMismatch {
            expected: rp.n_vars,
            found: x.len(),
        });
    }
    let xv = DVector::from_column_slice(x);
    let r = &rp.new_a * &xv - DVector::from_column_slice(&rp.new_b);
    let min_block_eig = rp
        .blocks
        .iter()
        .map(|b| min_eigenvalue(&b.eval(x)))
        .fold(f64::INFINITY, f64::min);
    Ok(Evaluation {
        objective: rp.objective(x),
        feas_residual: r.norm(),
        min_block_eig,
        min_x: x.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// The full matrix `X = Σ_i x_i B_i`.
pub fn lift(p: &Partition, x: &[f64]) -> Result<DMatrix<f64>> {
    if x.len() != p.n_parts() {
        return Err(Error::DimensionMismatch {
            expected: p.n_parts(),
            found: x.len(),
        });
    }
    Ok(crate::linalg::sym_from_row_major(p.n(), &p.combine(x)))
}
