//! Time-domain enclosure method for cavities in thermoelastic bodies.
//!
//! Probe fields in closed form, a P1 finite element forward solver for the
//! coupled displacement–temperature system (Laplace domain and time domain),
//! indicator functions computed from boundary data, and extraction of the
//! cavity–probe distance from their exponential decay.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;

pub mod bounds;
pub mod enclosure;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod indicator;
pub mod kernels;
pub mod material;
pub mod oracle;
pub mod probe;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod vec3;

pub use error::{Error, Result};
pub use material::Material;
pub use probe::{Ball, Probe, ProbeKind};
