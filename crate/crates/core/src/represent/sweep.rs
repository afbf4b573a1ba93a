//! Monte Carlo floor of a design and the sweep over Hamiltonians and
//! target states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::drift::BridgeSystem;
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::husimi::FockState;
use crate::propagator::mixture::atom_seed;
use crate::propagator::{Bandwidth, BoundaryAtom};
use crate::represent::design::{build_design_matrix, ColumnSource, DesignConfig, DesignMatrix};
use crate::represent::fit::{
    fit_boundary_distribution, fit_signed, fit_simplex, heldout_residual, uncovered_mass, weight_tv, FitOptions,
    RepVerdict, RepresentabilityReport,
};
use crate::represent::target::{husimi_target, TargetSeries};
use crate::symbol::{diagonalize_diffusion, ComplexPolynomial};

/// Density level below which the target is treated as empty.
pub const COVERAGE_LEVEL: f64 = 1e-6;
/// Target mass left outside every column above which a misfit is blamed on
/// the atom placement rather than reported as a gap.
pub const COVERAGE_TOL: f64 = 1e-3;

const FLOOR_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const TARGET_SALT: u64 = 0xd1b5_4a32_d192_ed03;

fn fnv(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Flat Dirichlet draw of `n` weights.
pub fn random_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// The same atoms and times with independent noise: a fresh seed for
/// sampled columns (bandwidth held fixed), twice the steps for exact ones.
pub fn alternate_design(sys: &BridgeSystem, design: &DesignMatrix, cfg: &DesignConfig, seed: u64) -> Result<DesignMatrix> {
    let mut alt = cfg.clone();
    match &design.bandwidth {
        Some(h) => alt.bandwidth = Bandwidth::Fixed(h.clone()),
        None => alt.steps = 2 * design.steps,
    }
    build_design_matrix(sys, &design.atoms, &design.times, &design.grid, &alt, seed)
}

/// Root-mean-square held-out residual of refitting `replicates` random
/// mixtures of an independently drawn copy of the design.
#[allow(clippy::too_many_arguments)]
pub fn mc_floor(
    sys: &BridgeSystem,
    design: &DesignMatrix,
    cfg: &DesignConfig,
    fit: &[usize],
    heldout: &[usize],
    opts: &FitOptions,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::InvalidDistribution("floor needs at least one replicate".into()));
    }
    let alt = alternate_design(sys, design, cfg, seed ^ FLOOR_SALT)?;
    let mut acc = 0.0;
    for r in 0..replicates {
        let w = random_weights(design.n_atoms(), atom_seed(seed ^ FLOOR_SALT, r as u64));
        let target = TargetSeries::from_mixture("floor", &alt, &w)?;
        let sol = fit_simplex(design, &target, fit, opts)?;
        acc += heldout_residual(design, &target, &sol.weights, heldout)?.0.powi(2);
    }
    Ok((acc / replicates as f64).sqrt())
}

/// A known mixture drawn from an independent copy of the design, with its weights.
pub fn manufactured_target(sys: &BridgeSystem, design: &DesignMatrix, cfg: &DesignConfig, seed: u64) -> Result<(TargetSeries, Vec<f64>)> {
    let alt = alternate_design(sys, design, cfg, seed ^ TARGET_SALT)?;
    let w = random_weights(design.n_atoms(), seed ^ TARGET_SALT);
    Ok((TargetSeries::from_mixture("manufactured", &alt, &w)?, w))
}

/// Regular lattice over `φ_IN = (x0, yf)` with `n` points per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomLattice {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: usize,
}

impl AtomLattice {
    pub fn atoms(&self) -> Result<Vec<BoundaryAtom>> {
        let dim = self.lo.len();
        if dim == 0 || dim % 2 != 0 || self.hi.len() != dim {
            return Err(Error::Dimension { expected: 2, got: dim });
        }
        if self.n < 2 {
            return Err(Error::InvalidGrid(format!("lattice needs at least 2 points per coordinate, got {}", self.n)));
        }
        let total = self.n.pow(dim as u32);
        let w = 1.0 / total as f64;
        Ok((0..total)
            .map(|mut k| {
                let phi: Vec<f64> = (0..dim)
                    .map(|c| {
                        let i = k % self.n;
                        k /= self.n;
                        self.lo[c] + (self.hi[c] - self.lo[c]) * i as f64 / (self.n - 1) as f64
                    })
                    .collect();
                BoundaryAtom::new(phi[..dim / 2].to_vec(), phi[dim / 2..].to_vec(), w)
            })
            .collect())
    }

    /// Halves the spacing.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, ..self.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    pub label: String,
    pub h: ComplexPolynomial,
}

#[derive(Clone, Debug)]
pub enum TargetSpec {
    Husimi { label: String, state: FockState },
    /// A random mixture of the design's own atoms.
    Manufactured,
}

impl TargetSpec {
    pub fn label(&self) -> &str {
        match self {
            TargetSpec::Husimi { label, .. } => label,
            TargetSpec::Manufactured => "manufactured",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GapSweepConfig {
    pub design: DesignConfig,
    pub grid: PhaseGrid,
    pub times: Vec<f64>,
    pub fit: Vec<usize>,
    pub heldout: Vec<usize>,
    pub lattice: AtomLattice,
    pub fit_options: FitOptions,
    pub floor_replicates: usize,
    /// Re-run gap verdicts with a refined lattice and twice the budget.
    pub confirm_gaps: bool,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub report: RepresentabilityReport,
    pub atoms: usize,
    pub budget: Option<usize>,
    /// Weight error against the known mixture, for manufactured targets.
    pub weight_tv: Option<f64>,
    /// Held-out residual of the signed diagnostic fit.
    pub signed_residual_l2: f64,
    /// See [`uncovered_mass`].
    pub uncovered_mass: f64,
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub hamiltonian: String,
    pub state: String,
    pub seed: u64,
    pub outcome: std::result::Result<CellOutcome, String>,
}

#[derive(Clone, Debug)]
pub struct GapSweep {
    pub cells: Vec<SweepCell>,
}

impl GapSweep {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("hamiltonian,state,atoms,budget,residual_l2,residual_linf,mc_floor,verdict,seed\n");
        for c in &self.cells {
            match &c.outcome {
                Ok(o) => out.push_str(&format!(
                    "{},{},{},{},{:.6e},{:.6e},{},{},{}\n",
                    c.hamiltonian,
                    c.state,
                    o.atoms,
                    o.budget.map(|b| b.to_string()).unwrap_or_else(|| "exact".into()),
                    o.report.residual_l2,
                    o.report.residual_linf,
                    o.report.mc_floor.map(|f| format!("{f:.6e}")).unwrap_or_default(),
                    o.report.verdict,
                    c.seed
                )),
                Err(_) => out.push_str(&format!("{},{},,,,,,error,{}\n", c.hamiltonian, c.state, c.seed)),
            }
        }
        out
    }
}

/// Seed of one sweep cell, fixed by the sweep seed and the cell labels.
pub fn cell_seed(seed: u64, hamiltonian: &str, state: &str) -> u64 {
    atom_seed(seed, fnv(&format!("{hamiltonian}/{state}")))
}

fn run_cell(
    h: &ComplexPolynomial,
    target: &TargetSpec,
    cfg: &GapSweepConfig,
    lattice: &AtomLattice,
    design_cfg: &DesignConfig,
    seed: u64,
) -> Result<CellOutcome> {
    let frame = diagonalize_diffusion(h)?;
    if frame.is_degenerate() {
        return Err(Error::Unsupported("zero diffusion: the mixture is a deterministic transport, no bridge columns".into()));
    }
    let sys = BridgeSystem::from_hamiltonian(h)?;
    let design = build_design_matrix(&sys, &lattice.atoms()?, &cfg.times, &cfg.grid, design_cfg, seed)?;
    design.require_complete()?;
    let floor = mc_floor(&sys, &design, design_cfg, &cfg.fit, &cfg.heldout, &cfg.fit_options, cfg.floor_replicates, seed)?;
    let (series, truth) = match target {
        TargetSpec::Husimi { label, state } => {
            let t = husimi_target(label, h, state, &frame, &cfg.grid, &cfg.times)?;
            let t = match &design.bandwidth {
                Some(bw) => t.smoothed(bw),
                None => t,
            };
            (t, None)
        }
        TargetSpec::Manufactured => {
            let (t, w) = manufactured_target(&sys, &design, design_cfg, seed)?;
            (t, Some(w))
        }
    };
    let mut report = fit_boundary_distribution(&design, &series, &cfg.fit, &cfg.heldout, Some(floor), &cfg.fit_options)?;
    let uncovered = uncovered_mass(&design, &series, COVERAGE_LEVEL)?;
    if report.verdict == RepVerdict::GapDetected && uncovered > COVERAGE_TOL {
        report.verdict = RepVerdict::Inconclusive;
    }
    let signed = fit_signed(&design, &series, &cfg.fit)?;
    let signed_residual_l2 = heldout_residual(&design, &series, &signed, &cfg.heldout)?.0;
    Ok(CellOutcome {
        weight_tv: truth.map(|w| weight_tv(&w, &report.weights)),
        atoms: design.n_atoms(),
        budget: design.budget,
        signed_residual_l2,
        uncovered_mass: uncovered,
        report,
    })
}

fn refined_config(cfg: &DesignConfig) -> DesignConfig {
    let mut out = cfg.clone();
    if let ColumnSource::Sampled { budget } = cfg.source {
        out.source = ColumnSource::Sampled { budget: 2 * budget };
    }
    out
}

/// Every `(hamiltonian, target)` pair. Cell failures are recorded in the
/// summary and do not stop the sweep.
pub fn gap_sweep(hamiltonians: &[HamiltonianSpec], targets: &[TargetSpec], cfg: &GapSweepConfig) -> GapSweep {
    let mut cells = Vec::new();
    for hs in hamiltonians {
        for ts in targets {
            let seed = cell_seed(cfg.seed, &hs.label, ts.label());
            let mut outcome = run_cell(&hs.h, ts, cfg, &cfg.lattice, &cfg.design, seed);
            if let Ok(o) = &mut outcome {
                if cfg.confirm_gaps && o.report.verdict == RepVerdict::GapDetected {
                    let again = run_cell(&hs.h, ts, cfg, &cfg.lattice.refined(), &refined_config(&cfg.design), seed);
                    if !matches!(&again, Ok(a) if a.report.verdict == RepVerdict::GapDetected) {
                        o.report.verdict = RepVerdict::Inconclusive;
                    }
                }
            }
            if let Err(e) = &outcome {
                log::warn!("sweep cell {}/{} failed: {e}", hs.label, ts.label());
            }
            cells.push(SweepCell {
                hamiltonian: hs.label.clone(),
                state: ts.label().to_string(),
                seed,
                outcome: outcome.map_err(|e| e.to_string()),
            });
        }
    }
    GapSweep { cells }
}
