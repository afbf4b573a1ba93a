//! Husimi Q-function evolution: the full series, its Fokker–Planck
//! truncation, the number-basis reference dynamics and the residual checks
//! that tie them together. Forward time-stepping of the traceless-diffusion
//! equation is deliberately absent; it is ill-posed.

pub mod field;
pub mod fock;
pub mod liouville;
pub mod residual;
pub mod rhs;

pub use field::{alpha_cell_measure, expectation, QField};
pub use fock::{auto_cutoff, fock_evolve, husimi_from_fock, symbol_to_operator, FockPropagator, FockState, HusimiEvaluator};
pub use liouville::{liouville_evolve, LiouvilleOptions};
pub use residual::{fpe_residual_check, ResidualOptions, ResidualReport, ResidualRow, Verdict};
pub use rhs::{fpe_rhs, series_rhs, series_terms, MAX_SERIES_ORDER};
