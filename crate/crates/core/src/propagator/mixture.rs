//! Mixtures of time-symmetric propagators over boundary distributions:
//! `ρ(φ, t) = Σ_a w_a G(φ, t | φ_IN,a)`.

use rayon::prelude::*;

use crate::drift::BridgeSystem;
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::propagator::boundary::BoundaryDistribution;
use crate::bridge::sample_bridges;
use crate::propagator::estimate::{exact_tsp, free_samples, PropagatorConfig};
use crate::propagator::kde::{kde, normal_reference_bandwidth, Bandwidth};

/// Minimum per-atom budget accepted by [`mix_over_boundaries`].
pub const MIN_BUDGET: usize = 1000;

/// Kernel width, in units of the normal-reference rule, for mixtures whose
/// forward-equation residual is checked. The residual differentiates the
/// estimate twice in space and once in time, which needs far wider kernels
/// than the density itself; for affine drift the smoothing is removed
/// exactly by [`crate::propagator::residual::smoothed_diffusion`].
pub const RESIDUAL_BANDWIDTH_FACTOR: f64 = 8.0;

/// Slice spacing, in bridge steps, for the same check.
pub const RESIDUAL_SLICE_STRIDE: usize = 20;

/// Densities on a common grid at strictly interior times.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSeries {
    pub grid: PhaseGrid,
    pub times: Vec<f64>,
    pub slices: Vec<Vec<f64>>,
    /// Common kernel bandwidth when the slices are density estimates.
    pub bandwidth: Option<Vec<f64>>,
    /// How the slices were produced, printed with every residual report.
    pub noise_model: String,
}

impl MixtureSeries {
    pub fn masses(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.iter().sum::<f64>() * self.grid.cell_volume()).collect()
    }
}

fn check_interior(t0: f64, tf: f64, times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|&&t| !(t > t0 && t < tf)) {
        return Err(Error::Unsupported(format!(
            "mixture slices need t0 < t < tf; at t = {t} each atom pins a different boundary value"
        )));
    }
    Ok(())
}

/// `Σ_a w_a slices_a` for per-atom slice lists of equal shape.
pub fn weighted_sum(per_atom: &[Vec<Vec<f64>>], weights: &[f64]) -> Vec<Vec<f64>> {
    let n_times = per_atom.first().map_or(0, Vec::len);
    (0..n_times)
        .map(|t| {
            let len = per_atom[0][t].len();
            let mut acc = vec![0.0; len];
            for (slices, w) in per_atom.iter().zip(weights) {
                for (a, v) in acc.iter_mut().zip(&slices[t]) {
                    *a += w * v;
                }
            }
            acc
        })
        .collect()
}

/// Seed of one atom: the run seed mixed with the atom location.
pub fn atom_seed(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[allow(clippy::too_many_arguments)]
pub fn mix_over_boundaries(
    sys: &BridgeSystem,
    p: &BoundaryDistribution,
    t0: f64,
    tf: f64,
    times: &[f64],
    budget: usize,
    seed: u64,
    grid: &PhaseGrid,
    cfg: &PropagatorConfig,
) -> Result<MixtureSeries> {
    if budget < MIN_BUDGET {
        return Err(Error::InvalidDistribution(format!("budget {budget} is below {MIN_BUDGET} paths per atom")));
    }
    check_interior(t0, tf, times)?;
    if grid.dims() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: grid.dims() });
    }
    let samples: Vec<Vec<Vec<Vec<f64>>>> = p
        .atoms()
        .par_iter()
        .map(|a| {
            let b = a.boundary(t0, tf)?;
            let ens = sample_bridges(sys, &b, cfg.steps, budget, atom_seed(seed, a.seed_key()), &cfg.sampler)?;
            Ok(free_samples(&ens, times, cfg.min_ess)?.into_iter().map(|(_, _, s)| s).collect())
        })
        .collect::<Result<_>>()?;
    // one kernel for every atom and time, so the smoothing commutes with the
    // time derivative and the mixture sum
    let h = match &cfg.bandwidth {
        Bandwidth::Fixed(h) => h.clone(),
        rule => {
            let factor = if let Bandwidth::SilvermanScaled(f) = rule { *f } else { 1.0 };
            let all: Vec<Vec<f64>> =
                samples.iter().flatten().map(|s| normal_reference_bandwidth(s)).collect::<Result<_>>()?;
            (0..grid.dims()).map(|j| factor * all.iter().map(|h| h[j]).sum::<f64>() / all.len() as f64).collect()
        }
    };
    let fixed = Bandwidth::Fixed(h.clone());
    let per_atom: Vec<Vec<Vec<f64>>> = samples
        .par_iter()
        .map(|atom| atom.iter().map(|s| Ok(kde(grid, s, &fixed)?.0)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = p.atoms().iter().map(|a| a.weight).collect();
    Ok(MixtureSeries {
        grid: grid.clone(),
        times: times.to_vec(),
        slices: weighted_sum(&per_atom, &weights),
        noise_model: format!(
            "kde: {} atoms x {budget} paths, common bandwidth {h:?}, {} steps; statistical threshold",
            weights.len(),
            cfg.steps
        ),
        bandwidth: Some(h),
    })
}

/// Exact Gaussian slices per atom (affine drift only).
pub fn exact_atom_slices(
    sys: &BridgeSystem,
    p: &BoundaryDistribution,
    t0: f64,
    tf: f64,
    steps: usize,
    times: &[f64],
    grid: &PhaseGrid,
) -> Result<Vec<Vec<Vec<f64>>>> {
    check_interior(t0, tf, times)?;
    p.atoms()
        .par_iter()
        .map(|a| Ok(exact_tsp(sys, &a.boundary(t0, tf)?, steps, times, grid)?.into_iter().map(|s| s.values).collect()))
        .collect()
}

/// Mixture built from exact Gaussian propagators instead of sampled ones.
pub fn exact_mixture(
    sys: &BridgeSystem,
    p: &BoundaryDistribution,
    t0: f64,
    tf: f64,
    steps: usize,
    times: &[f64],
    grid: &PhaseGrid,
) -> Result<MixtureSeries> {
    let per_atom = exact_atom_slices(sys, p, t0, tf, steps, times, grid)?;
    let weights: Vec<f64> = p.atoms().iter().map(|a| a.weight).collect();
    Ok(MixtureSeries {
        grid: grid.clone(),
        times: times.to_vec(),
        slices: weighted_sum(&per_atom, &weights),
        bandwidth: None,
        noise_model: format!("exact Gaussian propagators, {steps} steps; discretization error only"),
    })
}
