//! Columns of propagator densities, one per boundary atom, stacked over
//! evaluation times.

use rayon::prelude::*;

use crate::bridge::{sample_bridges, SamplerConfig};
use crate::drift::BridgeSystem;
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::propagator::estimate::{exact_tsp, free_samples};
use crate::propagator::kde::{kde, normal_reference_bandwidth, Bandwidth};
use crate::propagator::mixture::atom_seed;
use crate::propagator::BoundaryAtom;

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnSource {
    /// Exact Gaussian propagators (affine drift only).
    Exact,
    /// Kernel density estimates from `budget` sampled paths per atom.
    Sampled { budget: usize },
}

#[derive(Clone, Debug)]
pub struct DesignConfig {
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
    pub source: ColumnSource,
    pub sampler: SamplerConfig,
    /// Kernel for sampled columns; one common width is used for all atoms
    /// and times so that mixtures commute with the smoothing.
    pub bandwidth: Bandwidth,
    pub min_ess: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            tf: 1.0,
            steps: 64,
            source: ColumnSource::Sampled { budget: 10_000 },
            sampler: SamplerConfig::default(),
            bandwidth: Bandwidth::Silverman,
            min_ess: 100.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DesignMatrix {
    pub grid: PhaseGrid,
    pub times: Vec<f64>,
    pub atoms: Vec<BoundaryAtom>,
    /// One column per atom: the density at each time, concatenated in time order.
    pub columns: Vec<Vec<f64>>,
    /// Atoms whose column could not be built, with the reason.
    pub failed: Vec<(usize, String)>,
    pub bandwidth: Option<Vec<f64>>,
    pub budget: Option<usize>,
    pub seed: u64,
    pub steps: usize,
}

impl DesignMatrix {
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Entries of column `atom` at time index `ti`.
    pub fn block(&self, atom: usize, ti: usize) -> &[f64] {
        let n = self.grid.len();
        &self.columns[atom][ti * n..(ti + 1) * n]
    }

    /// Grid integral of every column at every time.
    pub fn column_masses(&self) -> Vec<Vec<f64>> {
        let dv = self.grid.cell_volume();
        (0..self.n_atoms())
            .map(|a| (0..self.times.len()).map(|t| self.block(a, t).iter().sum::<f64>() * dv).collect())
            .collect()
    }

    /// `Σ_a w_a column_a` at time index `ti`.
    pub fn mixture(&self, weights: &[f64], ti: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (a, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.block(a, ti)) {
                *o += w * v;
            }
        }
        out
    }

    pub fn require_complete(&self) -> Result<()> {
        if let Some((i, why)) = self.failed.first() {
            return Err(Error::SamplerFailure(format!(
                "{} of {} design columns failed (first: atom {i}: {why})",
                self.failed.len(),
                self.n_atoms()
            )));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> String {
        match (self.budget, &self.bandwidth) {
            (Some(b), Some(h)) => format!("kde columns, {b} paths/atom, common bandwidth {h:?}, {} steps", self.steps),
            _ => format!("exact Gaussian columns, {} steps", self.steps),
        }
    }
}

/// One column per atom, evaluated on `grid` at strictly interior `times`.
pub fn build_design_matrix(
    sys: &BridgeSystem,
    atoms: &[BoundaryAtom],
    times: &[f64],
    grid: &PhaseGrid,
    cfg: &DesignConfig,
    seed: u64,
) -> Result<DesignMatrix> {
    if atoms.is_empty() {
        return Err(Error::InvalidDistribution("design needs at least one atom".into()));
    }
    if grid.dims() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: grid.dims() });
    }
    if let Some(t) = times.iter().find(|&&t| !(t > cfg.t0 && t < cfg.tf)) {
        return Err(Error::Unsupported(format!("design times must lie strictly inside ({}, {}), got {t}", cfg.t0, cfg.tf)));
    }
    let concat = |slices: Vec<Vec<f64>>| slices.into_iter().flatten().collect::<Vec<f64>>();
    let mut failed = Vec::new();
    let mut columns = Vec::with_capacity(atoms.len());
    let (bandwidth, budget) = match cfg.source {
        ColumnSource::Exact => {
            let built: Vec<Result<Vec<f64>>> = atoms
                .par_iter()
                .map(|a| {
                    let b = a.boundary(cfg.t0, cfg.tf)?;
                    Ok(concat(exact_tsp(sys, &b, cfg.steps, times, grid)?.into_iter().map(|s| s.values).collect()))
                })
                .collect();
            for (i, c) in built.into_iter().enumerate() {
                match c {
                    Ok(v) => columns.push(v),
                    Err(e) => {
                        failed.push((i, e.to_string()));
                        columns.push(Vec::new());
                    }
                }
            }
            (None, None)
        }
        ColumnSource::Sampled { budget } => {
            let samples: Vec<Result<Vec<Vec<Vec<f64>>>>> = atoms
                .par_iter()
                .map(|a| {
                    let b = a.boundary(cfg.t0, cfg.tf)?;
                    let ens = sample_bridges(sys, &b, cfg.steps, budget, atom_seed(seed, a.seed_key()), &cfg.sampler)?;
                    Ok(free_samples(&ens, times, cfg.min_ess)?.into_iter().map(|(_, _, s)| s).collect())
                })
                .collect();
            let ok: Vec<&Vec<Vec<Vec<f64>>>> = samples.iter().filter_map(|s| s.as_ref().ok()).collect();
            if ok.is_empty() {
                return Err(Error::SamplerFailure("every design column failed".into()));
            }
            let h = match &cfg.bandwidth {
                Bandwidth::Fixed(h) => h.clone(),
                rule => {
                    let factor = if let Bandwidth::SilvermanScaled(f) = rule { *f } else { 1.0 };
                    let all: Vec<Vec<f64>> = ok.iter().flat_map(|a| a.iter()).map(|s| normal_reference_bandwidth(s)).collect::<Result<_>>()?;
                    (0..grid.dims()).map(|j| factor * all.iter().map(|h| h[j]).sum::<f64>() / all.len() as f64).collect()
                }
            };
            let fixed = Bandwidth::Fixed(h.clone());
            let built: Vec<Result<Vec<f64>>> = samples
                .into_par_iter()
                .map(|s| {
                    let s = s?;
                    Ok(concat(s.iter().map(|x| Ok(kde(grid, x, &fixed)?.0)).collect::<Result<_>>()?))
                })
                .collect();
            for (i, c) in built.into_iter().enumerate() {
                match c {
                    Ok(v) => columns.push(v),
                    Err(e) => {
                        failed.push((i, e.to_string()));
                        columns.push(Vec::new());
                    }
                }
            }
            (Some(h), Some(budget))
        }
    };
    for (i, why) in &failed {
        log::warn!("design column for atom {i} failed: {why}");
    }
    Ok(DesignMatrix {
        grid: grid.clone(),
        times: times.to_vec(),
        atoms: atoms.to_vec(),
        columns,
        failed,
        bandwidth,
        budget,
        seed,
        steps: cfg.steps,
    })
}
