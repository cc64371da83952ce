//! Artificial black holes for the wave equation in a moving medium.
//!
//! The crate builds stationary Lorentzian metrics (Kerr, Gordon, acoustic and
//! flow-form families), locates ergospheres and restricted ergospheres, tests
//! and integrates characteristic curves, manufactures metrics with prescribed
//! horizons, and evolves the wave equation outside an excised horizon while
//! monitoring its energy functionals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod curve;
pub mod ergosphere;
pub mod error;
pub mod horizon_design;
pub mod levelset;
pub mod metric;
pub mod stats;
pub mod wave;

pub use error::{Error, Result};
