//! Sequential Bayesian experimental design for contaminant source inversion,
//! comparing KL-divergence and Wasserstein utilities.

pub mod design;
pub mod discrepancy;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod grid;
pub mod inference;
pub mod ot;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{Axis, GridDistribution, Lattice};
