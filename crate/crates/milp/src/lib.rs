//! Exact mixed binary linear programming for desk-scale models.
//!
//! Everything runs in exact rational arithmetic: an LP relaxation is solved
//! by a bounded-variable primal simplex and integrality of binary variables
//! is enforced by depth-first branch-and-bound. Returned optima satisfy every
//! constraint with rational equality, so no tolerances appear anywhere.

mod branch;
mod lp_format;
mod model;
pub mod rational;
mod simplex;

use thiserror::Error;

pub use branch::{solve, MilpSolution, SolveLimits, SolveStats, SolveStatus};
pub use lp_format::export_lp;
pub use model::{Bounds, Constraint, LinExpr, MilpModel, Objective, Relation, Sense, VarId, VarKind, Variable};
pub use rational::Rational;
pub use simplex::{solve_relaxation, LpOutcome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MilpError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("LP relaxation is unbounded")]
    Unbounded,
}
