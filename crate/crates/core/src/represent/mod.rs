//! Fitting boundary distributions whose bridge mixtures reproduce a target
//! Husimi function, with verdicts tied to the Monte Carlo floor of the fit.

pub mod design;
pub mod fit;
pub mod sweep;
pub mod target;

pub use design::{build_design_matrix, ColumnSource, DesignConfig, DesignMatrix};
pub use fit::{
    classify, fit_boundary_distribution, fit_signed, fit_simplex, heldout_residual, project_simplex, uncovered_mass, weight_tv, FitOptions,
    RepVerdict, RepresentabilityReport, SimplexFit,
};
pub use sweep::{
    alternate_design, cell_seed, gap_sweep, manufactured_target, mc_floor, random_weights, AtomLattice, CellOutcome,
    GapSweep, GapSweepConfig, HamiltonianSpec, SweepCell, TargetSpec,
};
pub use target::{husimi_target, TargetSeries};
