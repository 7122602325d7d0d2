//! Numerical toolkit for H-monotone set-valued operators on the Heisenberg
//! group ℍⁿ: group primitives, value sets and operators, monotonicity
//! checkers, a horizontal Minty resolvent solver, and the constructive
//! geometry behind local boundedness.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod heis;
pub mod monotone;
pub mod resolvent;
pub mod sampling;
pub mod setval;

pub use error::{Error, Result};
pub use heis::{HPlane, HVec, Point, DEFAULT_TOL};
pub use setval::{LinearMap, OperatorConfig, OperatorSpec, ValueSet};
