//! Jordan symmetry reduction for semidefinite programs over the doubly
//! nonnegative cone.
//!
//! The pipeline is:
//!
//! 1. describe a problem as a [`ConicProblem`] (objective, constraint rows,
//!    right-hand side over the full `n × n` grid, row-major),
//! 2. find the optimal admissible partition subspace with
//!    [`reduce::admissible_subspace`] and certify it with
//!    [`reduce::certify_admissible`],
//! 3. block-diagonalize the Jordan algebra spanned by the partition with
//!    [`blockdiag::block_diagonalize`],
//! 4. assemble the reduced problem with [`reduced::assemble_reduced`] and solve
//!    it with [`solver::solve`] or export it in SDPA sparse format.
//!
//! [`builders`] constructs the ϑ′ and QAP relaxation families, and [`io`] /
//! [`fetch`] handle file formats and QAPLib instances.

pub mod blockdiag;
pub mod builders;
pub mod conic;
pub mod error;
pub mod fetch;
pub mod io;
mod linalg;
pub mod partition;
pub mod reduce;
pub mod reduced;
pub mod sdpa;
pub mod solver;

pub use blockdiag::{block_diagonalize, BlockDiagonalization, Field};
pub use builders::{Graph, QapInstance};
pub use conic::{ConicProblem, OrthoBasis, Sense, SymMatrix};
pub use error::{Error, Result};
pub use partition::Partition;
pub use reduce::{admissible_subspace, certify_admissible, CertificateReport};
pub use reduced::{assemble_reduced, ReducedProblem};
pub use solver::{solve, Solution, SolveOptions, Status};
