//! Quantum-deamplification Ramsey interferometry on an N-atom collective spin.

pub mod error;
pub mod estimation;
pub mod experiments;
pub mod hybrid;
pub mod optimize;
pub mod oqi;
pub mod protocol;
pub mod spin;

pub use error::{Error, Result};
