//! Stabilized finite elements for scalar advection-reaction transport with
//! physically bounded concentrations.
//!
//! The solved variable can be mapped through a change of variable that keeps
//! the physical concentration below its saturation value, and
//! residual-based discontinuity capturing (isotropic or crosswind, defined on
//! the symmetric reference element) suppresses negative undershoots.

// Negated comparisons deliberately treat NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cases;
pub mod error;
pub mod femcore;
pub mod io;
pub mod mesh;
pub mod models;
pub mod morphology;
pub mod postproc;
pub mod solver;
pub mod xform;

pub use error::{Error, Result};
