//! Casimir-coupled sphere/magnet resonator simulator.
//!
//! * [`physics`]: force laws, potentials, quasistatic equilibrium.
//! * [`dynamics`]: RK4 integration with the crossing-locked drive controller.
//! * [`analysis`]: frequency tracking, sweeps, sensitivity, curve fitting.
//! * [`scenario`]: config parsing, built-in figure scenarios and file output.

// `!(a > b)` is used throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod defaults;
pub mod dynamics;
pub mod error;
pub mod physics;
pub mod scenario;

pub use error::{PhysicsError, Result, SimError};
