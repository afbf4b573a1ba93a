//! `tsqlab bridge`: sample one fixed-boundary bridge ensemble and compare
//! its moments with the exact Gaussian bridge when the drift is affine.

use std::fmt::Write;

use tsqlab_core::bridge::io::{diagnostics_csv, ess_csv, write_ensemble};
use tsqlab_core::bridge::{gaussian_bridge_exact, sample_bridges, BridgeBoundary, SamplerConfig};
use tsqlab_core::drift::BridgeSystem;
use tsqlab_core::stats::{covariance, mean};

use super::{cfg_err, Artifact, Outcome, Status};
use crate::config::{BridgeCfg, Config};
use crate::error::Result;

pub struct Prepared {
    sys: BridgeSystem,
    boundary: BridgeBoundary,
    steps: usize,
    sampler: SamplerConfig,
    b: BridgeCfg,
    seed: u64,
}

/// Fills boundary values and check steps the config leaves empty.
pub fn prepare(cfg: &mut Config) -> Result<Prepared> {
    let sys = super::system(cfg)?;
    let half = sys.half();
    let s = cfg.sampler.clone().expect("resolved");
    let sampler = super::sampler(&s)?;
    let b = cfg.bridge.as_mut().expect("resolved");
    if b.x0.is_empty() {
        b.x0 = vec![0.0; half];
    }
    if b.yf.is_empty() {
        b.yf = vec![0.0; half];
    }
    if b.x0.len() != half || b.yf.len() != half {
        return Err(cfg_err(format!("bridge.x0 and bridge.yf need length {half}")));
    }
    if b.check_steps.is_empty() {
        b.check_steps = vec![s.steps / 4, s.steps / 2, 3 * s.steps / 4];
    }
    if let Some(k) = b.check_steps.iter().find(|&&k| k > s.steps) {
        return Err(cfg_err(format!("bridge.check_steps: step {k} beyond {}", s.steps)));
    }
    let boundary = BridgeBoundary::new(b.t0, b.tf, b.x0.clone(), b.yf.clone())?;
    Ok(Prepared { sys, boundary, steps: s.steps, sampler, b: b.clone(), seed: cfg.seed.expect("resolved") })
}

pub fn run(p: Prepared) -> Result<Outcome> {
    let ens = sample_bridges(&p.sys, &p.boundary, p.steps, p.b.n_paths, p.seed, &p.sampler)?;
    let min_ess = ens.min_ess();
    let ess_ok = min_ess >= p.b.min_ess;
    let mut artifacts = Vec::new();
    if p.b.write_paths {
        artifacts.push(Artifact::new("ensemble.csv", write_ensemble(&ens)));
    }
    artifacts.push(Artifact::new("diagnostics.csv", diagnostics_csv(&ens)));
    artifacts.push(Artifact::new("ess.csv", ess_csv(&ens)));
    if p.sys.drift.affine().is_none() {
        return Ok(Outcome {
            status: if ess_ok { Status::Neutral } else { Status::Fail },
            summary: format!("{} paths, min ESS {min_ess:.0}; no exact reference for a non-affine drift", ens.paths.len()),
            ensemble: "E1",
            artifacts,
        });
    }
    let exact = gaussian_bridge_exact(&p.sys, &p.boundary, p.steps)?;
    let dim = p.sys.dim();
    let mut csv = String::from("step,i,j,quantity,sampled,exact,tolerance,pass\n");
    let mut moments_ok = true;
    for &k in &p.b.check_steps {
        let (mu, cov) = exact.marginal(k);
        let cols: Vec<Vec<f64>> = (0..dim).map(|c| ens.column(k, c)).collect();
        for i in 0..dim {
            if cov[(i, i)] <= 0.0 {
                continue;
            }
            let ess = ens.ess_of(k, i).unwrap_or(min_ess);
            let tol = p.b.mean_se * (cov[(i, i)] / ess).sqrt();
            let m = mean(&cols[i]);
            let ok = (m - mu[i]).abs() <= tol;
            moments_ok &= ok;
            let _ = writeln!(csv, "{k},{i},{i},mean,{m:.9e},{:.9e},{tol:.3e},{ok}", mu[i]);
            for j in i..dim {
                if cov[(j, j)] <= 0.0 {
                    continue;
                }
                let c = covariance(&cols[i], &cols[j]);
                let tol = p.b.cov_rel * (cov[(i, i)] * cov[(j, j)]).sqrt();
                let ok = (c - cov[(i, j)]).abs() <= tol;
                moments_ok &= ok;
                let _ = writeln!(csv, "{k},{i},{j},cov,{c:.9e},{:.9e},{tol:.3e},{ok}", cov[(i, j)]);
            }
        }
    }
    artifacts.push(Artifact::new("oracle.csv", csv));
    Ok(Outcome {
        status: Status::from_checks(ess_ok && moments_ok),
        summary: format!(
            "{} paths, min ESS {min_ess:.0} (need {}); moments {} the exact bridge",
            ens.paths.len(),
            p.b.min_ess,
            if moments_ok { "match" } else { "do not match" }
        ),
        ensemble: "E1",
        artifacts,
    })
}
