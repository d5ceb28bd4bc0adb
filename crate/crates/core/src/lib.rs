//! Consistent-set selection by Schmidt projections for a system coupled to
//! an environment under a random Hamiltonian.

pub mod error;
pub mod gue;
pub mod histories;
pub mod linalg;
pub mod output;
pub mod rng;
pub mod schmidt;
pub mod selection;
pub mod stats;

pub use error::{Error, Result};
