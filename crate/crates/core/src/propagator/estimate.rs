//! Time-symmetric propagator `G(φ, t | φ_IN)` estimated from one bridge
//! ensemble, and its exact counterpart for affine drift.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::bridge::{gaussian_bridge_exact, sample_bridges, BridgeBoundary, BridgeEnsemble, GaussianBridge, SamplerConfig, DEFAULT_STEPS};
use crate::drift::BridgeSystem;
use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseGrid};
use crate::propagator::kde::{kde, Bandwidth};

/// Density at one time. Components fixed by the boundary at that time are
/// stored as exact values, the rest live on `grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySlice {
    pub time: f64,
    pub pinned: Vec<Option<f64>>,
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
}

impl DensitySlice {
    pub fn free_components(&self) -> Vec<usize> {
        (0..self.pinned.len()).filter(|&c| self.pinned[c].is_none()).collect()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Same columns as a Q-field export; pinned components repeat their value.
    pub fn to_csv(&self) -> String {
        let n = self.pinned.len() / 2;
        let mut s = String::new();
        let header: Vec<String> =
            (1..=n).map(|i| format!("x{i}")).chain((1..=n).map(|i| format!("y{i}"))).chain(["Q".into()]).collect();
        let _ = writeln!(s, "{}", header.join(","));
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            let mut free = p.iter();
            for c in &self.pinned {
                let val = c.unwrap_or_else(|| *free.next().expect("grid matches free components"));
                let _ = write!(s, "{val},");
            }
            let _ = writeln!(s, "{v}");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorConfig {
    pub steps: usize,
    pub sampler: SamplerConfig,
    pub bandwidth: Bandwidth,
    /// Every marginal used for a density must reach this effective sample size.
    pub min_ess: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { steps: DEFAULT_STEPS, sampler: SamplerConfig::default(), bandwidth: Bandwidth::Silverman, min_ess: 100.0 }
    }
}

#[derive(Clone, Debug)]
pub struct PropagatorEstimate {
    pub boundary: BridgeBoundary,
    pub steps: usize,
    pub slices: Vec<DensitySlice>,
    pub bandwidths: Vec<Vec<f64>>,
    pub n_samples: usize,
    pub acceptance_rate: f64,
    pub min_ess: f64,
}

/// Index of the bridge time step that `t` falls on.
pub fn step_of_time(boundary: &BridgeBoundary, steps: usize, t: f64) -> Result<usize> {
    let dt = boundary.dt(steps);
    let u = (t - boundary.t0) / dt;
    let k = u.round();
    if !(k >= 0.0 && k <= steps as f64) || (u - k).abs() > 1e-9 * steps as f64 {
        return Err(Error::InvalidGrid(format!(
            "time {t} is not on the bridge grid {}..{} with {steps} steps",
            boundary.t0, boundary.tf
        )));
    }
    Ok(k as usize)
}

fn pinned_at(boundary: &BridgeBoundary, steps: usize, k: usize) -> Vec<Option<f64>> {
    let n = boundary.half();
    (0..2 * n)
        .map(|c| match (k, c < n) {
            (0, true) => Some(boundary.x0[c]),
            (k, false) if k == steps => Some(boundary.yf[c - n]),
            _ => None,
        })
        .collect()
}

fn sub_grid(grid: &PhaseGrid, comps: &[usize]) -> Result<PhaseGrid> {
    PhaseGrid::new(comps.iter().map(|&c| *grid.axis(c)).collect::<Vec<Axis>>())
}

fn check_grid(sys: &BridgeSystem, grid: &PhaseGrid) -> Result<()> {
    if grid.dims() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: grid.dims() });
    }
    Ok(())
}

/// Samples of the free components at each requested time.
pub(crate) fn free_samples(ens: &BridgeEnsemble, times: &[f64], min_ess: f64) -> Result<Vec<(usize, Vec<Option<f64>>, Vec<Vec<f64>>)>> {
    times
        .iter()
        .map(|&t| {
            let k = step_of_time(&ens.boundary, ens.steps, t)?;
            let pinned = pinned_at(&ens.boundary, ens.steps, k);
            let free: Vec<usize> = (0..pinned.len()).filter(|&c| pinned[c].is_none()).collect();
            for &c in &free {
                let ess = ens.ess_of(k, c).unwrap_or(f64::INFINITY);
                if ess < min_ess {
                    return Err(Error::SamplerFailure(format!(
                        "effective sample size {ess:.0} of component {c} at t = {t} is below {min_ess}"
                    )));
                }
            }
            let samples = ens.paths.iter().map(|p| free.iter().map(|&c| p.at(k)[c]).collect()).collect();
            Ok((k, pinned, samples))
        })
        .collect()
}

/// KDE slices of a sampled ensemble at the requested times.
pub fn slices_from_ensemble(
    ens: &BridgeEnsemble,
    times: &[f64],
    grid: &PhaseGrid,
    bandwidth: &Bandwidth,
    min_ess: f64,
) -> Result<(Vec<DensitySlice>, Vec<Vec<f64>>)> {
    let mut slices = Vec::with_capacity(times.len());
    let mut widths = Vec::with_capacity(times.len());
    for (&t, (_, pinned, samples)) in times.iter().zip(free_samples(ens, times, min_ess)?) {
        let free: Vec<usize> = (0..pinned.len()).filter(|&c| pinned[c].is_none()).collect();
        let g = sub_grid(grid, &free)?;
        let (values, h) = kde(&g, &samples, bandwidth)?;
        widths.push(h);
        slices.push(DensitySlice { time: t, pinned, grid: g, values });
    }
    Ok((slices, widths))
}

pub fn estimate_tsp(
    sys: &BridgeSystem,
    boundary: &BridgeBoundary,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    grid: &PhaseGrid,
    cfg: &PropagatorConfig,
) -> Result<PropagatorEstimate> {
    check_grid(sys, grid)?;
    for &t in times {
        step_of_time(boundary, cfg.steps, t)?;
    }
    let ens = sample_bridges(sys, boundary, cfg.steps, n_paths, seed, &cfg.sampler)?;
    let (slices, bandwidths) = slices_from_ensemble(&ens, times, grid, &cfg.bandwidth, cfg.min_ess)?;
    Ok(PropagatorEstimate {
        boundary: boundary.clone(),
        steps: cfg.steps,
        slices,
        bandwidths,
        n_samples: ens.paths.len(),
        acceptance_rate: ens.acceptance_rate,
        min_ess: ens.min_ess(),
    })
}

/// Normal density of the free components at step `k` of an exact bridge.
pub fn gaussian_slice(bridge: &GaussianBridge, k: usize, time: f64, grid: &PhaseGrid) -> Result<DensitySlice> {
    let pinned = pinned_at(&bridge.boundary, bridge.layout.steps, k);
    let free: Vec<usize> = (0..pinned.len()).filter(|&c| pinned[c].is_none()).collect();
    let coords: Vec<(usize, usize)> = free.iter().map(|&c| (k, c)).collect();
    let (mu, cov) = bridge.joint(&coords);
    let g = sub_grid(grid, &free)?;
    let values = normal_density_on(&g, &mu, &cov)?;
    Ok(DensitySlice { time, pinned, grid: g, values })
}

pub fn normal_density_on(grid: &PhaseGrid, mu: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("marginal covariance is not positive definite".into()))?;
    let d = mu.len();
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    let l = chol.l();
    Ok(grid.map(|p| {
        let r = DVector::from_fn(d, |i, _| p[i] - mu[i]);
        let z = l.solve_lower_triangular(&r).expect("nonsingular factor");
        (log_norm - 0.5 * z.norm_squared()).exp()
    }))
}

/// Exact slices for affine drift, in the same shape as [`estimate_tsp`].
pub fn exact_tsp(
    sys: &BridgeSystem,
    boundary: &BridgeBoundary,
    steps: usize,
    times: &[f64],
    grid: &PhaseGrid,
) -> Result<Vec<DensitySlice>> {
    check_grid(sys, grid)?;
    let bridge = gaussian_bridge_exact(sys, boundary, steps)?;
    times.iter().map(|&t| gaussian_slice(&bridge, step_of_time(boundary, steps, t)?, t, grid)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_drift(d: f64) -> BridgeSystem {
        BridgeSystem::affine(DMatrix::zeros(2, 2), DVector::zeros(2), d).unwrap()
    }

    #[test]
    fn time_must_lie_on_the_step_grid() {
        let b = BridgeBoundary::new(0.0, 1.0, vec![0.0], vec![0.0]).unwrap();
        assert_eq!(step_of_time(&b, 8, 0.25).unwrap(), 2);
        assert_eq!(step_of_time(&b, 8, 1.0).unwrap(), 8);
        assert!(step_of_time(&b, 8, 0.3).is_err());
        assert!(step_of_time(&b, 8, 1.2).is_err());
    }

    #[test]
    fn initial_slice_pins_x_exactly() {
        let b = BridgeBoundary::new(0.0, 1.0, vec![0.4], vec![-0.3]).unwrap();
        let grid = PhaseGrid::uniform(2, -4.0, 4.0, 0.05).unwrap();
        let cfg = PropagatorConfig { steps: 16, ..PropagatorConfig::default() };
        let est = estimate_tsp(&zero_drift(0.5), &b, &[0.0, 0.5, 1.0], 2000, 1, &grid, &cfg).unwrap();
        assert_eq!(est.slices[0].pinned, vec![Some(0.4), None]);
        assert_eq!(est.slices[1].pinned, vec![None, None]);
        assert_eq!(est.slices[2].pinned, vec![None, Some(-0.3)]);
        for s in &est.slices {
            assert!((s.mass() - 1.0).abs() < 1e-2);
        }
        assert!(est.slices[0].to_csv().lines().nth(1).unwrap().starts_with("0.4,"));
    }

    #[test]
    fn exact_zero_drift_slice_is_heat_kernel() {
        let b = BridgeBoundary::new(0.0, 2.0, vec![0.2], vec![0.1]).unwrap();
        let grid = PhaseGrid::uniform(2, -5.0, 5.0, 0.1).unwrap();
        let s = &exact_tsp(&zero_drift(0.5), &b, b_steps(), &[0.5], &grid).unwrap()[0];
        let (vx, vy) = (0.5 * 0.5, 0.5 * 1.5);
        for i in [0, 1234, 5050, 9000] {
            let p = s.grid.point(i);
            let heat = (-(p[0] - 0.2).powi(2) / (2.0 * vx) - (p[1] - 0.1).powi(2) / (2.0 * vy)).exp()
                / (2.0 * std::f64::consts::PI * (vx * vy).sqrt());
            assert!((s.values[i] - heat).abs() < 1e-12);
        }
    }

    fn b_steps() -> usize {
        64
    }
}
