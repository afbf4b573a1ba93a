//! Target densities for the inverse problem: evolved Husimi functions or
//! manufactured mixtures.

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::husimi::{FockPropagator, FockState, HusimiEvaluator};
use crate::propagator::gaussian_smooth;
use crate::represent::design::DesignMatrix;
use crate::symbol::{ComplexPolynomial, QuadratureFrame};

/// Largest grid-mass defect accepted for a target slice.
pub const TARGET_MASS_TOL: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct TargetSeries {
    pub label: String,
    pub grid: PhaseGrid,
    pub times: Vec<f64>,
    /// Densities per unit frame-coordinate volume.
    pub slices: Vec<Vec<f64>>,
}

impl TargetSeries {
    pub fn masses(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.iter().sum::<f64>() * self.grid.cell_volume()).collect()
    }

    /// The target convolved with the kernel of a sampled design.
    pub fn smoothed(&self, h: &[f64]) -> Self {
        Self {
            label: self.label.clone(),
            grid: self.grid.clone(),
            times: self.times.clone(),
            slices: self.slices.iter().map(|s| gaussian_smooth(&self.grid, s, h)).collect(),
        }
    }

    /// `Σ w_a column_a` of a design at every design time.
    pub fn from_mixture(label: &str, design: &DesignMatrix, weights: &[f64]) -> Result<Self> {
        design.require_complete()?;
        if weights.len() != design.n_atoms() {
            return Err(Error::Dimension { expected: design.n_atoms(), got: weights.len() });
        }
        Ok(Self {
            label: label.to_string(),
            grid: design.grid.clone(),
            times: design.times.clone(),
            slices: (0..design.times.len()).map(|t| design.mixture(weights, t)).collect(),
        })
    }
}

/// Husimi function of `state` evolved under `h`, in the frame coordinates
/// of the bridge. Densities are per unit `dφ`, i.e. `Q(α) / 2^N`.
pub fn husimi_target(
    label: &str,
    h: &ComplexPolynomial,
    state: &FockState,
    frame: &QuadratureFrame,
    grid: &PhaseGrid,
    times: &[f64],
) -> Result<TargetSeries> {
    let n = state.num_modes();
    if grid.dims() != 2 * n || frame.num_modes() != n {
        return Err(Error::Dimension { expected: 2 * n, got: grid.dims() });
    }
    let prop = FockPropagator::new(h, state.cutoff())?;
    let scale = 2f64.powi(n as i32);
    let mut slices = Vec::with_capacity(times.len());
    for &t in times {
        let q = HusimiEvaluator::new(&prop.evolve(state, t)?);
        let values = grid.map(|p| q.eval(&frame.inverse(p)) / scale);
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        if (mass - 1.0).abs() > TARGET_MASS_TOL {
            return Err(Error::InvalidField(format!("target mass {mass:.4} at t = {t}; widen the evaluation grid")));
        }
        slices.push(values);
    }
    Ok(TargetSeries { label: label.to_string(), grid: grid.clone(), times: times.to_vec(), slices })
}
