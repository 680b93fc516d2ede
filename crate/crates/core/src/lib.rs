//! Spin-1/2 dynamics in static, RF, kinetic and general fields, checked
//! against a Runge-Kutta Schrodinger integrator, with a gradient-echo
//! imaging forward model built on top.

pub mod error;
pub mod imaging;
pub mod multispin;
pub mod oracle;
pub mod propagators;
pub mod sequence;
pub mod spincore;
pub mod verify;

pub use error::{Error, Result};
