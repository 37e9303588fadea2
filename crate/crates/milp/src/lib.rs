//! Small exact-arithmetic-free MILP toolkit.
//!
//! [`solve_lp`] is a dense bounded-variable primal simplex with two phases,
//! periodic LU refactorization and a Bland fallback against cycling.
//! [`solve_milp`] runs best-first branch-and-bound on top of it, with SOS1
//! branching for one-hot groups and a lazy constraint callback invoked at
//! every integer-feasible node (the hook used for outer approximation).

mod bnb;
mod error;
pub mod lp;
mod lp_format;
mod simplex;

pub use bnb::{solve_milp, CutCallback, MilpModel, MilpResult, MilpStatus, NoCuts};
pub use error::{LpError, MilpError};
pub use lp::{solve_lp, Constraint, LpProblem, LpSolution, Sense};
pub use lp_format::write_lp_format;

/// Feasibility tolerance shared by the LP and the branch-and-bound layers.
pub const FEAS_TOL: f64 = 1e-9;
/// Distance from an integer below which a value counts as integral.
pub const INT_TOL: f64 = 1e-6;
