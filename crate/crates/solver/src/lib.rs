//! Sparse linear programming and mixed-integer linear programming.
//!
//! [`solve_lp`] runs a bounded revised primal simplex on a sparse LU basis;
//! [`solve_milp`] wraps it in a best-bound branch and bound.

mod lp;
mod lpformat;
mod lu;
mod milp;
mod simplex;
mod sparse;

pub use lp::{
    solve_lp, solve_lp_warm, solve_lp_with, Basis, Certificate, Direction, LpBuilder, LpProblem, LpSolution,
    LpStatus, RowSense, VarStatus,
};
pub use lpformat::write_lp;
pub use milp::{solve_milp, MilpOptions, MilpProblem, MilpSolution, MilpStatus};
pub use simplex::SimplexOptions;
pub use sparse::SparseMatrix;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("inconsistent problem dimensions: {0}")]
    Dimension(String),
    #[error("problem data contains NaN or infinite coefficients")]
    NonFinite,
    #[error("simplex iteration limit reached after {0} iterations")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
