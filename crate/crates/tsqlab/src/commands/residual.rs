//! `tsqlab residual`: the forward-equation residual of an evolved Q-function,
//! or of a bridge mixture over a Gaussian boundary distribution.

use tsqlab_core::drift::BridgeSystem;
use tsqlab_core::grid::PhaseGrid;
use tsqlab_core::husimi::{auto_cutoff, fpe_residual_check, ResidualOptions, Verdict};
use tsqlab_core::propagator::{
    exact_mixture, mix_over_boundaries, mixture_fpe_residual, Bandwidth, BoundaryDistribution, MixtureResidualOptions,
    PropagatorConfig,
};
use tsqlab_core::symbol::ComplexPolynomial;
use tsqlab_core::Error;

use super::{cfg_err, Artifact, Outcome, Status};
use crate::config::{Config, ResidualCfg};
use crate::error::Result;
use crate::presets;

pub enum Prepared {
    Husimi { h: ComplexPolynomial, modes: usize, grid: PhaseGrid, r: ResidualCfg },
    Mixture { sys: BridgeSystem, p: BoundaryDistribution, grid: PhaseGrid, times: Vec<f64>, prop: PropagatorConfig, r: ResidualCfg, seed: u64 },
}

/// Consecutive bridge steps centred on the midpoint of `[t0, tf]`.
fn slice_times(r: &ResidualCfg, steps: usize, stride: usize) -> Result<Vec<f64>> {
    let half = (r.slices / 2) * stride;
    let mid = steps / 2;
    if half >= mid {
        return Err(cfg_err(format!("{} slices {stride} steps apart do not fit inside {steps} steps", r.slices)));
    }
    let dt = (r.tf - r.t0) / steps as f64;
    Ok((0..r.slices).map(|i| r.t0 + (mid - half + i * stride) as f64 * dt).collect())
}

pub fn prepare(cfg: &Config) -> Result<Prepared> {
    let r = cfg.residual.clone().expect("resolved");
    if r.mode == "husimi" {
        let h = super::hamiltonian(cfg)?.expect("resolved");
        let modes = h.num_modes();
        let grid = super::grid(cfg, 2 * modes)?;
        presets::state(&r.state, modes, r.cutoff_start)?;
        return Ok(Prepared::Husimi { h, modes, grid, r });
    }
    let sys = super::system(cfg)?;
    let half = sys.half();
    if r.boundary_x0.len() != half || r.boundary_yf.len() != half || r.boundary_std.len() != 2 * half {
        return Err(cfg_err(format!("residual boundary needs x0/yf of length {half} and std of length {}", 2 * half)));
    }
    if r.source == "exact" && sys.drift.affine().is_none() {
        return Err(cfg_err("exact mixtures need an affine drift; use source = \"sampled\""));
    }
    let p = BoundaryDistribution::gaussian(&r.boundary_x0, &r.boundary_yf, &r.boundary_std, r.boundary_points)?;
    let grid = super::grid(cfg, sys.dim())?;
    let s = cfg.sampler.as_ref().expect("resolved");
    let times = slice_times(&r, s.steps, r.stride.expect("resolved"))?;
    let prop = PropagatorConfig {
        steps: s.steps,
        sampler: super::sampler(s)?,
        bandwidth: Bandwidth::SilvermanScaled(r.bandwidth_factor),
        min_ess: s.min_ess,
    };
    Ok(Prepared::Mixture { sys, p, grid, times, prop, r, seed: cfg.seed.expect("resolved") })
}

fn status(passed: bool, expect: &str) -> Status {
    Status::from_checks(passed == (expect == "pass"))
}

pub fn run(p: Prepared) -> Result<Outcome> {
    match p {
        Prepared::Husimi { h, modes, grid, r } => {
            let make = |c: usize| presets::state(&r.state, modes, c).map_err(|e| Error::InvalidState(e.to_string()));
            let cutoff = auto_cutoff(&h, make, &r.times, r.cutoff_start, r.cutoff_max)?;
            let opts = ResidualOptions { delta: r.delta, threshold: r.threshold.expect("resolved"), margin: r.margin, ..Default::default() };
            let report = fpe_residual_check(&h, &make(cutoff)?, &r.times, &grid, &opts)?;
            let status = match report.verdict {
                Verdict::SeriesTermDetected => Status::Neutral,
                _ => status(report.passed(), &r.expect),
            };
            let worst = report.rows.iter().map(|row| row.l2_residual).fold(0.0, f64::max);
            let csv = format!("# state: {}\n# cutoff: {cutoff}\n# verdict: {}\n{}", r.state.label(), report.verdict.as_str(), report.to_csv());
            Ok(Outcome {
                status,
                summary: format!("{}; max relative L2 residual {worst:.3e} at cutoff {cutoff}", report.verdict.as_str()),
                ensemble: "Q",
                artifacts: vec![Artifact::new("residual.csv", csv)],
            })
        }
        Prepared::Mixture { sys, p, grid, times, prop, r, seed } => {
            let series = if r.source == "exact" {
                exact_mixture(&sys, &p, r.t0, r.tf, prop.steps, &times, &grid)?
            } else {
                mix_over_boundaries(&sys, &p, r.t0, r.tf, &times, r.budget, seed, &grid, &prop)?
            };
            let opts = MixtureResidualOptions { threshold: r.threshold.expect("resolved"), margin: r.margin, ..Default::default() };
            let report = mixture_fpe_residual(&series, &sys, &opts)?;
            let passed = report.passed();
            Ok(Outcome {
                status: status(passed, &r.expect),
                summary: format!(
                    "{} mixture {}; max relative L2 residual {:.3e} (expected to {})",
                    r.source,
                    if passed { "passes" } else { "fails" },
                    report.max_l2(),
                    r.expect
                ),
                ensemble: "E2",
                artifacts: vec![Artifact::new("mixture_residual.csv", report.to_csv())],
            })
        }
    }
}
