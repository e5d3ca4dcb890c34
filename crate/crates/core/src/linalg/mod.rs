//! Sparse matrices and iterative solvers.

mod dense;
mod solver;
mod sparse;

pub use dense::solve_dense;
pub use solver::{bicgstab, cg, cg_observed, solve, LinearOperator, Method, Preconditioner, SolveStats, SolverConfig};
pub use sparse::{constrain_dirichlet, SparseMatrix, Triplet};
