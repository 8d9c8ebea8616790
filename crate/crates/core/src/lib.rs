//! Credit-based balancing for international kidney exchange programmes.
//!
//! Countries pool patient-donor pairs in a compatibility graph. Each round a
//! maximum cycle packing is chosen and the resulting transplants are steered
//! toward a target allocation derived from a cooperative-game solution
//! concept plus carried-over credits.

pub mod allocation;
mod assignment;
pub mod balancing;
pub mod campaign;
pub mod fixtures;
pub mod formulation;
pub mod game;
pub mod graph;
pub mod packing;
pub mod par;
pub mod reductions;
pub mod simulator;

pub use ikep_milp as milp;
pub use ikep_milp::Rational;
