//! Small exact and convex solvers used by assignment, rebalancing and
//! calibration.

mod ilp;
pub mod lp;
mod matching;
mod qp;

use thiserror::Error;

pub use ilp::{solve_01_ilp, Constraint, IlpSolution, ZeroOneProgram};
pub use matching::min_cost_matching;
pub use qp::{min_eigenvalue, project_simplex, QpSolution, SimplexQp};

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("program has no feasible point")]
    InfeasibleProgram,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("objective is not convex: {0}")]
    NotConvex(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Solves a [`SimplexQp`] from the uniform starting point.
pub fn solve_simplex_qp(p: &SimplexQp) -> Result<QpSolution, OptimError> {
    p.solve(None)
}
