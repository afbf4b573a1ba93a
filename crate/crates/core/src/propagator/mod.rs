//! Time-symmetric propagators estimated from bridge ensembles, their
//! mixtures over boundary distributions, and the check that such mixtures
//! obey the forward equation.

pub mod boundary;
pub mod estimate;
pub mod kde;
pub mod mixture;
pub mod residual;

pub use boundary::{gauss_hermite, BoundaryAtom, BoundaryDistribution};
pub use estimate::{estimate_tsp, exact_tsp, DensitySlice, PropagatorConfig, PropagatorEstimate};
pub use kde::{gaussian_smooth, kde, total_variation, Bandwidth};
pub use mixture::{exact_mixture, mix_over_boundaries, MixtureSeries, RESIDUAL_BANDWIDTH_FACTOR, RESIDUAL_SLICE_STRIDE};
pub use residual::{mixture_fpe_residual, MixtureResidualOptions, MixtureResidualReport};
