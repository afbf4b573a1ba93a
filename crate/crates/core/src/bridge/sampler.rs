//! Metropolis sampling of the path measure `exp(−S)` with preconditioned
//! Crank–Nicolson proposals built from the Gaussian approximation at the
//! action minimizer. For affine drift the proposal is the exact law, so with
//! `rho = 0` every move is an independent exact draw.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bridge::action::action_free;
use crate::bridge::gaussian::check_positive_definite;
use crate::bridge::mpp::{minimize_action, NewtonOptions};
use crate::bridge::path::{BridgeBoundary, DiscretePath, FreeLayout};
use crate::drift::BridgeSystem;
use crate::error::{Error, Result};
use crate::stats::ess_geyer;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    /// Initial pCN autocorrelation; 0 is an independence sampler.
    pub rho: f64,
    /// Raise `rho` during burn-in while the acceptance rate is low.
    pub adapt: bool,
    /// Proposal spread relative to the Gaussian approximation.
    pub proposal_scale: f64,
    pub min_acceptance: f64,
    pub newton: NewtonOptions,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            burn_in: 200,
            rho: 0.0,
            adapt: true,
            proposal_scale: 1.0,
            min_acceptance: 0.01,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BridgeEnsemble {
    pub boundary: BridgeBoundary,
    pub steps: usize,
    pub paths: Vec<DiscretePath>,
    pub acceptance_rate: f64,
    pub chain_acceptance: Vec<f64>,
    pub final_rho: Vec<f64>,
    /// Effective sample size of every free coordinate, summed over chains.
    pub ess: Vec<f64>,
    pub rng_seed: u64,
}

impl BridgeEnsemble {
    pub fn layout(&self) -> FreeLayout {
        FreeLayout { half: self.boundary.half(), steps: self.steps }
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ESS of a path coordinate; pinned coordinates report `None`.
    pub fn ess_of(&self, step: usize, comp: usize) -> Option<f64> {
        self.layout().free_index(step, comp).map(|i| self.ess[i])
    }

    /// Values of one coordinate across the ensemble.
    pub fn column(&self, step: usize, comp: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.at(step)[comp]).collect()
    }
}

struct Chain {
    samples: Vec<DVector<f64>>,
    accepted: usize,
    proposed: usize,
    rho: f64,
}

pub fn sample_bridges(
    sys: &BridgeSystem,
    boundary: &BridgeBoundary,
    steps: usize,
    n_paths: usize,
    seed: u64,
    cfg: &SamplerConfig,
) -> Result<BridgeEnsemble> {
    if n_paths == 0 || cfg.n_chains == 0 {
        return Err(Error::SamplerFailure("need at least one path and one chain".into()));
    }
    if !(0.0..1.0).contains(&cfg.rho) || !(cfg.proposal_scale > 0.0) {
        return Err(Error::SamplerFailure(format!("invalid rho {} or proposal scale {}", cfg.rho, cfg.proposal_scale)));
    }
    let layout = FreeLayout::new(boundary.half(), steps)?;
    let min = minimize_action(sys, boundary, steps, &cfg.newton)?;
    check_positive_definite(&min.hessian)?;
    let scaled = &min.hessian / (cfg.proposal_scale * cfg.proposal_scale);
    let chol = scaled
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NonNormalizable("Hessian at the action minimum is not positive definite".into()))?;
    let upper = chol.l().transpose();
    probe_unbounded(sys, boundary, &layout, &min.z, min.action, &min.hessian)?;

    let mode = min.z.clone();
    let log_target = |z: &DVector<f64>| -> f64 {
        let s = action_free(sys, boundary, &layout, z.as_slice()).unwrap_or(f64::INFINITY);
        let dz = z - &mode;
        // target relative to the reference Gaussian the pCN move preserves
        -s + 0.5 * dz.dot(&(&scaled * &dz))
    };

    let per_chain: Vec<usize> = (0..cfg.n_chains)
        .map(|c| n_paths / cfg.n_chains + usize::from(c < n_paths % cfg.n_chains))
        .collect();
    let chains: Vec<Chain> = per_chain
        .par_iter()
        .enumerate()
        .map(|(chain, &count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chain as u64);
            let mut z = mode.clone();
            let mut lt = log_target(&z);
            let mut rho = cfg.rho;
            let mut window = (0usize, 0usize);
            let mut out = Chain { samples: Vec::with_capacity(count), accepted: 0, proposed: 0, rho };
            for it in 0..cfg.burn_in + count {
                let xi = DVector::from_fn(layout.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let noise = upper.solve_upper_triangular(&xi).expect("nonsingular factor");
                let proposal = &mode + (&z - &mode) * rho + noise * (1.0 - rho * rho).sqrt();
                let lp = log_target(&proposal);
                let u: f64 = rng.random();
                let accept = lp.is_finite() && u.ln() < lp - lt;
                if accept {
                    z = proposal;
                    lt = lp;
                }
                if it < cfg.burn_in {
                    window.0 += usize::from(accept);
                    window.1 += 1;
                    if cfg.adapt && window.1 == 50 {
                        if (window.0 as f64) < 0.15 * 50.0 && rho < 0.99 {
                            rho = 1.0 - (1.0 - rho) / 2.0;
                        }
                        window = (0, 0);
                    }
                } else {
                    out.accepted += usize::from(accept);
                    out.proposed += 1;
                    out.samples.push(z.clone());
                }
            }
            out.rho = rho;
            out
        })
        .collect();

    let accepted: usize = chains.iter().map(|c| c.accepted).sum();
    let proposed: usize = chains.iter().map(|c| c.proposed).sum();
    let acceptance_rate = accepted as f64 / proposed.max(1) as f64;
    if acceptance_rate < cfg.min_acceptance {
        return Err(Error::SamplerFailure(format!(
            "acceptance rate {acceptance_rate:.4} below {} after adaptation",
            cfg.min_acceptance
        )));
    }
    let ess: Vec<f64> = (0..layout.len())
        .into_par_iter()
        .map(|i| {
            chains
                .iter()
                .filter(|c| !c.samples.is_empty())
                .map(|c| ess_geyer(&c.samples.iter().map(|z| z[i]).collect::<Vec<_>>()))
                .sum()
        })
        .collect();
    let chain_acceptance = chains.iter().map(|c| c.accepted as f64 / c.proposed.max(1) as f64).collect();
    let final_rho = chains.iter().map(|c| c.rho).collect();
    let paths = chains
        .into_iter()
        .flat_map(|c| c.samples)
        .map(|z| layout.to_path(boundary, z.as_slice()))
        .collect();
    Ok(BridgeEnsemble {
        boundary: boundary.clone(),
        steps,
        paths,
        acceptance_rate,
        chain_acceptance,
        final_rho,
        ess,
        rng_seed: seed,
    })
}

/// Looks for directions along which the action falls below its minimum far
/// from the mode, which would mean `exp(−S)` is not a probability measure.
fn probe_unbounded(
    sys: &BridgeSystem,
    b: &BridgeBoundary,
    layout: &FreeLayout,
    mode: &DVector<f64>,
    s_min: f64,
    hessian: &DMatrix<f64>,
) -> Result<()> {
    if sys.drift.affine().is_some() {
        return Ok(());
    }
    let eig = hessian.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    for &k in order.iter().take(4) {
        let v = eig.eigenvectors.column(k);
        let sigma = 1.0 / eig.eigenvalues[k].sqrt();
        for s in [10.0, 30.0, -10.0, -30.0] {
            let trial = mode + v * (s * sigma);
            let st = action_free(sys, b, layout, trial.as_slice())?;
            if st < s_min {
                return Err(Error::NonNormalizable(format!(
                    "action drops to {st:.4e} below its local minimum {s_min:.4e} along a probe direction"
                )));
            }
        }
    }
    Ok(())
}
