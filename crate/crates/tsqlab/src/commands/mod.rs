//! One module per subcommand. Each splits into a `prepare` step that builds
//! every numerical object from the configuration, and a `run` step that
//! computes and returns the artifacts in memory.

pub mod bridge;
pub mod markov;
pub mod represent;
pub mod residual;

use nalgebra::{DMatrix, DVector};
use tsqlab_core::bridge::SamplerConfig;
use tsqlab_core::drift::BridgeSystem;
use tsqlab_core::grid::PhaseGrid;
use tsqlab_core::markov::GaussianPreparation;
use tsqlab_core::symbol::ComplexPolynomial;

use crate::config::{Config, GridCfg, PrepCfg, SamplerCfg};
use crate::error::{HarnessError, Result};
use crate::presets;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// Ran to completion with a verdict that is neither pass nor fail.
    Neutral,
    Fail,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Neutral => "neutral",
            Status::Fail => "fail",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass | Status::Neutral => 0,
            Status::Fail => 2,
        }
    }

    pub fn from_checks(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: &str, contents: String) -> Self {
        Self { name: name.into(), contents }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub summary: String,
    /// Ensemble level of the run: E1, E2, E3, Q, or `summary` for reports.
    pub ensemble: &'static str,
    pub artifacts: Vec<Artifact>,
}

pub(crate) fn cfg_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

pub(crate) fn hamiltonian(cfg: &Config) -> Result<Option<ComplexPolynomial>> {
    let Some(h) = &cfg.hamiltonian else { return Ok(None) };
    let poly = presets::hamiltonian(h, std::path::Path::new("."))?;
    poly.require_hermitian()?;
    Ok(Some(poly))
}

pub(crate) fn system(cfg: &Config) -> Result<BridgeSystem> {
    if let Some(s) = &cfg.system {
        let n = s.drift.len();
        if n == 0 || s.drift.iter().any(|r| r.len() != n) {
            return Err(cfg_err("system.drift must be a square matrix"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| s.drift[i][j]);
        let c = if s.offset.is_empty() { DVector::zeros(n) } else { DVector::from_column_slice(&s.offset) };
        if c.len() != n {
            return Err(cfg_err(format!("system.offset has length {}, drift is {n}x{n}", c.len())));
        }
        return Ok(BridgeSystem::affine(m, c, s.d)?);
    }
    let h = hamiltonian(cfg)?.ok_or_else(|| cfg_err("missing [hamiltonian] or [system]"))?;
    Ok(BridgeSystem::from_hamiltonian(&h)?)
}

pub(crate) fn grid(cfg: &Config, dims: usize) -> Result<PhaseGrid> {
    let g: &GridCfg = cfg.grid.as_ref().ok_or_else(|| cfg_err("missing [grid]"))?;
    let grid = PhaseGrid::uniform(dims, g.min, g.max, g.h)?;
    let cells = grid.len();
    if cells > 20_000_000 {
        return Err(cfg_err(format!("grid has {cells} cells in {dims} dimensions; coarsen it")));
    }
    Ok(grid)
}

pub(crate) fn sampler(s: &SamplerCfg) -> Result<SamplerConfig> {
    if s.chains == 0 || s.steps < 2 || !(0.0..1.0).contains(&s.rho) {
        return Err(cfg_err("sampler: need chains >= 1, steps >= 2 and 0 <= rho < 1"));
    }
    Ok(SamplerConfig { n_chains: s.chains, burn_in: s.burn_in, rho: s.rho, adapt: s.adapt, ..SamplerConfig::default() })
}

pub(crate) fn preparation(p: &PrepCfg, half: usize) -> Result<GaussianPreparation> {
    let n = p.mean.len();
    if n != 2 * half || p.cov.len() != n || p.cov.iter().any(|r| r.len() != n) {
        return Err(cfg_err(format!("preparation needs a mean of length {} and a square covariance", 2 * half)));
    }
    Ok(GaussianPreparation::new(DVector::from_column_slice(&p.mean), DMatrix::from_fn(n, n, |i, j| p.cov[i][j]))?)
}

/// Correlated `(x0, yf)` law used when a config names none.
pub(crate) fn default_preparation(half: usize) -> PrepCfg {
    let n = 2 * half;
    let mean = (0..n).map(|i| if i < half { 0.1 } else { 0.2 }).collect();
    let cov = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (i, j) {
                    _ if i == j => if i < half { 0.6 } else { 0.5 },
                    _ if i + half == j || j + half == i => 0.3,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    PrepCfg { mean, cov }
}

/// Turns core errors raised while validating into configuration errors.
pub(crate) fn as_config<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        HarnessError::Core(c) => HarnessError::Config(c.to_string()),
        other => other,
    })
}
