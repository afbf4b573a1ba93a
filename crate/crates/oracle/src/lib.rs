//! Brute-force reference computations used to validate the optimized
//! implementations in `tsqlab-core`.
//!
//! This crate deliberately has no dependency on `tsqlab-core`: each oracle is
//! written from the defining formulas, favouring clarity over speed.

pub mod cache;
pub mod normal_ordering;
pub mod quadratic_form;
pub mod schur;

pub use cache::{OracleCache, OracleResult};
