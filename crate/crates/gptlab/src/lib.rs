//! Toolkit for finite-dimensional generalized probabilistic theories with
//! polytopal state spaces.

pub mod channel;
pub mod distinguish;
pub mod fidelity;
pub mod fixtures;
pub mod json;
pub mod linalg;
pub mod lp;
pub mod polygon;
pub mod programming;
pub mod space;
pub mod structure;
pub mod tensor;

pub use lp::{lp_solve, LpOutcome, LpProblem, Tolerances};
pub use space::{Effect, Observable, SpaceError, State, StateSpace};
