//! Dissipative quantum reservoir computing: exact channel simulation,
//! shot-based sampling, readout training and benchmark tasks.

pub mod channels;
pub mod harness;
pub mod circuits;
pub mod error;
pub mod learn;
pub mod qmath;
pub mod random;
pub mod reservoir;
pub mod sampling;
pub mod tasks;
pub mod theory_checks;

pub use error::{QrcError, Result};
