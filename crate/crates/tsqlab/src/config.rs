//! Experiment configuration: one TOML document per run.
//!
//! Every section has defaults; [`Config::resolve`] fills them in so the
//! echoed `resolved.toml` carries every value the run used.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::presets;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Residual,
    Bridge,
    Markov,
    Bernstein,
    Lambda,
    Represent,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Residual => "residual",
            Command::Bridge => "bridge",
            Command::Markov => "markov",
            Command::Bernstein => "bernstein",
            Command::Lambda => "lambda",
            Command::Represent => "represent",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory, relative to the working directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge: Option<BridgeCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub markov: Option<MarkovCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bernstein: Option<BernsteinCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub represent: Option<RepresentCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportCfg>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianCfg {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Inline symbol in the text format of `ComplexPolynomial::from_text`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    /// Path to a symbol file, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quartic: Option<f64>,
}

/// Affine drift `M φ + c` with diffusion magnitude `d`, in place of a
/// Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemCfg {
    /// Rows of `M`.
    pub drift: Vec<Vec<f64>>,
    #[serde(default)]
    pub offset: Vec<f64>,
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridCfg {
    pub min: f64,
    pub max: f64,
    pub h: f64,
}

impl Default for GridCfg {
    fn default() -> Self {
        Self { min: -6.0, max: 6.0, h: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerCfg {
    /// Time steps per bridge interval.
    pub steps: usize,
    pub chains: usize,
    pub burn_in: usize,
    pub rho: f64,
    pub adapt: bool,
    pub min_ess: f64,
}

impl Default for SamplerCfg {
    fn default() -> Self {
        Self { steps: 128, chains: 4, burn_in: 200, rho: 0.0, adapt: true, min_ess: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateCfg {
    /// `vacuum`, `coherent`, `cat` or `number`.
    pub kind: String,
    pub re: f64,
    pub im: f64,
    pub even: bool,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Default for StateCfg {
    fn default() -> Self {
        Self { kind: "vacuum".into(), re: 0.0, im: 0.0, even: true, n: 0, label: None }
    }
}

impl StateCfg {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| match self.kind.as_str() {
            "vacuum" => "vacuum".into(),
            "number" => format!("number-{}", self.n),
            "cat" => format!("cat-{}-{}{:+}i", if self.even { "even" } else { "odd" }, self.re, self.im),
            k => format!("{k}-{}{:+}i", self.re, self.im),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResidualCfg {
    /// `husimi` checks the evolved Q-function; `mixture` checks a bridge
    /// mixture over a Gaussian boundary distribution.
    pub mode: String,
    pub times: Vec<f64>,
    pub state: StateCfg,
    pub cutoff_start: usize,
    pub cutoff_max: usize,
    pub delta: f64,
    /// Relative L² pass threshold; defaults to 1e-3, or 0.1 for sampled
    /// mixtures.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub margin: usize,
    /// Mixture slices sit on consecutive bridge steps around the midpoint,
    /// `stride` steps apart (default 1 exact, 20 sampled).
    pub slices: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    pub t0: f64,
    pub tf: f64,
    pub boundary_x0: Vec<f64>,
    pub boundary_yf: Vec<f64>,
    pub boundary_std: Vec<f64>,
    pub boundary_points: usize,
    /// `exact` (affine drift) or `sampled`.
    pub source: String,
    pub budget: usize,
    pub bandwidth_factor: f64,
    /// `pass` or `fail`: the outcome the run is expected to produce.
    pub expect: String,
}

impl Default for ResidualCfg {
    fn default() -> Self {
        Self {
            mode: "husimi".into(),
            times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            state: StateCfg::default(),
            cutoff_start: 20,
            cutoff_max: 60,
            delta: 1e-3,
            threshold: None,
            margin: 3,
            slices: 7,
            stride: None,
            t0: 0.0,
            tf: 1.0,
            boundary_x0: vec![0.3],
            boundary_yf: vec![-0.2],
            boundary_std: vec![0.4, 0.4],
            boundary_points: 3,
            source: "exact".into(),
            budget: 10_000,
            bandwidth_factor: 8.0,
            expect: "pass".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeCfg {
    pub t0: f64,
    pub tf: f64,
    pub x0: Vec<f64>,
    pub yf: Vec<f64>,
    pub n_paths: usize,
    /// Steps compared against the exact Gaussian bridge; empty picks the
    /// quarter points.
    pub check_steps: Vec<usize>,
    pub min_ess: f64,
    pub mean_se: f64,
    pub cov_rel: f64,
    pub write_paths: bool,
}

impl Default for BridgeCfg {
    fn default() -> Self {
        Self {
            t0: 0.0,
            tf: 1.0,
            x0: Vec::new(),
            yf: Vec::new(),
            n_paths: 4000,
            check_steps: Vec::new(),
            min_ess: 1000.0,
            mean_se: 3.0,
            cov_rel: 0.05,
            write_paths: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepCfg {
    pub mean: Vec<f64>,
    /// Rows of the covariance of `(x0, yf)`.
    pub cov: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarkovCfg {
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
    /// Past, present and future step indices.
    pub at: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preparation: Option<PrepCfg>,
    /// `dependent`, `independent` or `any`.
    pub expect: String,
    /// Check the verdict against the factorization criterion (one mode only).
    pub factorization: bool,
    /// Randomized instances per kind; 0 skips the sweep.
    pub sweep_per_kind: usize,
}

impl Default for MarkovCfg {
    fn default() -> Self {
        Self {
            t0: 0.0,
            tf: 1.0,
            steps: 32,
            at: vec![0, 16, 32],
            preparation: None,
            expect: "any".into(),
            factorization: true,
            sweep_per_kind: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BernsteinCfg {
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
    /// `s < t1 < t2 < t3 < u` as step indices.
    pub five: Vec<usize>,
    /// `mixed` or `full` endpoint data.
    pub ends: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preparation: Option<PrepCfg>,
    /// Run the partial-configuration controls, expected dependent.
    pub control: bool,
}

impl Default for BernsteinCfg {
    fn default() -> Self {
        Self {
            t0: 0.0,
            tf: 1.0,
            steps: 32,
            five: vec![0, 8, 16, 24, 32],
            ends: "mixed".into(),
            preparation: None,
            control: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaCfg {
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prep1: Option<PrepCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prep2: Option<PrepCfg>,
    /// Values of `φ(t0)`.
    pub probes: Vec<Vec<f64>>,
    /// Values of `(x(t0), y(tf))`.
    pub kernel_probes: Vec<Vec<f64>>,
}

impl Default for LambdaCfg {
    fn default() -> Self {
        let p = vec![vec![0.0, 0.0], vec![0.3, -0.2], vec![-0.2, 0.3]];
        Self { t0: 0.0, tf: 1.0, steps: 32, prep1: None, prep2: None, probes: p.clone(), kernel_probes: p }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepresentCfg {
    /// Preset names, run with their default parameters.
    pub hamiltonians: Vec<String>,
    pub states: Vec<StateCfg>,
    /// Add a manufactured mixture of the design's own atoms.
    pub manufactured: bool,
    pub cutoff: usize,
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
    /// Paths per atom; 0 uses exact Gaussian columns.
    pub budget: usize,
    pub times: Vec<f64>,
    pub fit: Vec<usize>,
    pub heldout: Vec<usize>,
    pub lattice_lo: f64,
    pub lattice_hi: f64,
    pub lattice_n: usize,
    pub floor_replicates: usize,
    pub confirm_gaps: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RepresentCfg {
    fn default() -> Self {
        Self {
            hamiltonians: vec!["squeezed-rotor".into()],
            states: Vec::new(),
            manufactured: true,
            cutoff: 60,
            t0: 0.0,
            tf: 1.0,
            steps: 64,
            budget: 1500,
            times: vec![0.25, 0.375, 0.5, 0.625, 0.75],
            fit: vec![0, 2, 4],
            heldout: vec![1, 3],
            lattice_lo: -2.0,
            lattice_hi: 2.0,
            lattice_n: 3,
            floor_replicates: 4,
            confirm_gaps: true,
            max_iter: 200_000,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportCfg {
    /// Manifest files, relative to the config file.
    pub manifests: Vec<String>,
}

fn cfg_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(cfg_err(format!("{name} must be positive, got {v}")))
    }
}

fn check_interval(section: &str, t0: f64, tf: f64) -> Result<()> {
    if t0.is_finite() && tf.is_finite() && tf > t0 {
        Ok(())
    } else {
        Err(cfg_err(format!("{section}: need t0 < tf, got [{t0}, {tf}]")))
    }
}

fn check_one_of(name: &str, v: &str, allowed: &[&str]) -> Result<()> {
    if allowed.contains(&v) {
        Ok(())
    } else {
        Err(cfg_err(format!("{name} = {v:?}; expected one of {}", allowed.join(", "))))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version)));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fills the defaults the command uses and checks the plain-value
    /// constraints. Building the numerical objects is left to the command's
    /// own validation step.
    /// `base` is the directory relative paths in the config refer to.
    pub fn resolve(mut self, cmd: Command, base: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        if let Some(o) = out {
            self.out = Some(o.to_string_lossy().into_owned());
        }
        if self.out.is_none() {
            self.out = Some(format!("tsqlab-out/{}", cmd.name()));
        }
        if cmd == Command::Report {
            let r = self.report.get_or_insert_with(Default::default);
            if r.manifests.is_empty() {
                return Err(cfg_err("report needs at least one manifest"));
            }
            for m in &mut r.manifests {
                *m = base.join(&*m).to_string_lossy().into_owned();
            }
            return Ok(self);
        }
        if self.seed.is_none() {
            return Err(cfg_err("seed is mandatory (config `seed` or --seed)"));
        }
        if let Some(h) = &mut self.hamiltonian {
            // inline symbol files so the resolved config stands alone
            if let Some(file) = h.symbol_file.take() {
                if h.symbol.is_some() {
                    return Err(cfg_err("hamiltonian: give symbol or symbol_file, not both"));
                }
                let path = base.join(&file);
                h.symbol = Some(std::fs::read_to_string(&path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?);
            }
            if let Some(p) = &h.preset {
                let (w, k, q) = presets::preset_defaults(p)?;
                h.omega.get_or_insert(w);
                h.kappa.get_or_insert(k);
                h.quartic.get_or_insert(q);
            }
        }
        let needs_system = !matches!(cmd, Command::Represent);
        let needs_hamiltonian = matches!(cmd, Command::Residual) && self.residual.as_ref().is_none_or(|r| r.mode == "husimi");
        match (&self.hamiltonian, &self.system) {
            (Some(_), Some(_)) => return Err(cfg_err("give either [hamiltonian] or [system], not both")),
            (None, None) if needs_system => return Err(cfg_err("missing [hamiltonian] or [system] section")),
            (None, Some(_)) if needs_hamiltonian => return Err(cfg_err("residual mode husimi needs a [hamiltonian]")),
            _ => {}
        }
        if let Some(s) = &self.system {
            check_positive("system.d", s.d)?;
        }
        let g = self.grid.get_or_insert_with(|| match cmd {
            Command::Represent => GridCfg { min: -6.0, max: 6.0, h: 0.12 },
            Command::Lambda => GridCfg { min: -5.0, max: 5.0, h: 0.05 },
            _ => GridCfg::default(),
        });
        check_positive("grid.h", g.h)?;
        if !(g.max > g.min) {
            return Err(cfg_err(format!("grid: need min < max, got [{}, {}]", g.min, g.max)));
        }
        match cmd {
            Command::Residual => {
                let r = self.residual.get_or_insert_with(Default::default);
                check_one_of("residual.mode", &r.mode, &["husimi", "mixture"])?;
                check_one_of("residual.source", &r.source, &["exact", "sampled"])?;
                check_one_of("residual.expect", &r.expect, &["pass", "fail"])?;
                check_positive("residual.delta", r.delta)?;
                let sampled = r.mode == "mixture" && r.source == "sampled";
                check_positive("residual.threshold", *r.threshold.get_or_insert(if sampled { 0.1 } else { 1e-3 }))?;
                if r.mode == "mixture" {
                    if *r.stride.get_or_insert(if sampled { 20 } else { 1 }) == 0 {
                        return Err(cfg_err("residual.stride must be positive"));
                    }
                    if r.slices < 3 {
                        return Err(cfg_err("residual.slices must be at least 3"));
                    }
                }
                check_interval("residual", r.t0, r.tf)?;
                if r.times.is_empty() {
                    return Err(cfg_err("residual.times is empty"));
                }
                if r.cutoff_start == 0 || r.cutoff_start > r.cutoff_max {
                    return Err(cfg_err("residual: need 0 < cutoff_start <= cutoff_max"));
                }
                if r.mode == "mixture" {
                    self.sampler.get_or_insert_with(Default::default);
                }
            }
            Command::Bridge => {
                self.sampler.get_or_insert_with(Default::default);
                let b = self.bridge.get_or_insert_with(Default::default);
                check_interval("bridge", b.t0, b.tf)?;
                check_positive("bridge.cov_rel", b.cov_rel)?;
                check_positive("bridge.mean_se", b.mean_se)?;
                if b.n_paths == 0 {
                    return Err(cfg_err("bridge.n_paths must be positive"));
                }
            }
            Command::Markov => {
                let m = self.markov.get_or_insert_with(Default::default);
                check_interval("markov", m.t0, m.tf)?;
                check_one_of("markov.expect", &m.expect, &["dependent", "independent", "any"])?;
                if m.at.len() != 3 || !(m.at[0] < m.at[1] && m.at[1] < m.at[2] && m.at[2] <= m.steps) {
                    return Err(cfg_err(format!("markov.at must be three increasing steps within 0..={}", m.steps)));
                }
            }
            Command::Bernstein => {
                let b = self.bernstein.get_or_insert_with(Default::default);
                check_interval("bernstein", b.t0, b.tf)?;
                check_one_of("bernstein.ends", &b.ends, &["mixed", "full"])?;
                if b.five.len() != 5 || b.five.iter().any(|&k| k > b.steps) {
                    return Err(cfg_err(format!("bernstein.five must list five steps within 0..={}", b.steps)));
                }
            }
            Command::Lambda => {
                let l = self.lambda.get_or_insert_with(Default::default);
                check_interval("lambda", l.t0, l.tf)?;
                if l.prep1.is_none() || l.prep2.is_none() {
                    return Err(cfg_err("lambda needs [lambda.prep1] and [lambda.prep2]"));
                }
            }
            Command::Represent => {
                if self.hamiltonian.is_some() || self.system.is_some() {
                    return Err(cfg_err("represent takes its Hamiltonians from represent.hamiltonians"));
                }
                self.sampler.get_or_insert_with(Default::default);
                let r = self.represent.get_or_insert_with(Default::default);
                check_interval("represent", r.t0, r.tf)?;
                for h in &r.hamiltonians {
                    presets::preset_defaults(h)?;
                }
                if r.hamiltonians.is_empty() || (r.states.is_empty() && !r.manufactured) {
                    return Err(cfg_err("represent needs at least one Hamiltonian and one target"));
                }
                if r.lattice_n < 2 || !(r.lattice_hi > r.lattice_lo) {
                    return Err(cfg_err("represent lattice needs n >= 2 and lo < hi"));
                }
                if let Some(&i) = r.fit.iter().chain(&r.heldout).find(|&&i| i >= r.times.len()) {
                    return Err(cfg_err(format!("represent: time index {i} out of range")));
                }
                if r.fit.iter().any(|i| r.heldout.contains(i)) {
                    return Err(cfg_err("represent: fit and held-out times overlap"));
                }
            }
            Command::Report => unreachable!(),
        }
        Ok(self)
    }
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        // a run manifest carries the resolved configuration verbatim
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let inner = v
            .get("resolved_config")
            .and_then(|c| c.as_str())
            .ok_or_else(|| cfg_err(format!("{}: not a run manifest", path.display())))?;
        return Config::parse(inner);
    }
    Config::parse(&text)
}
