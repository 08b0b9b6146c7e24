//! Simulation and experiment harness for quantum error-correcting codes
//! distributed over networks of small processors.

pub mod circuit;
pub mod codes;
pub mod decode;
pub mod error;
pub mod experiments;
pub mod gf2;
pub mod netcompile;
pub mod partition;
pub mod sim;

pub use error::{Error, Result};
