//! Sparse linear programs and a bounded-variable revised simplex.

mod factor;
mod model;
mod simplex;

pub use model::{dual_objective, LinearProgram, Row, RowSense};
pub use simplex::{extract_duals, solve_lp, Basis, LpSolution, LpStatus, SimplexOptions, SimplexSolver, VarStatus};
