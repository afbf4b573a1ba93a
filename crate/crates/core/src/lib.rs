//! Numerical laboratory for time-symmetric stochastic trajectories of bosonic
//! phase-space densities.

pub mod error;
pub mod grid;
pub mod symbol;

pub use error::{Error, Result};
pub mod husimi;
pub mod bridge;
pub mod drift;
pub mod stats;
pub mod propagator;
pub mod markov;
pub mod represent;
