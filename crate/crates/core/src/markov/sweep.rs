//! Randomized families of affine systems for the screening-off test and
//! its factorization counterpart.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::drift::BridgeSystem;
use crate::error::Result;
use crate::grid::{Axis, PhaseGrid};
use crate::markov::ci::{CITestResult, PermutationOptions, Verdict};
use crate::markov::fgz::{factorization_check, fgz_decomposition, FactorizationCheck};
use crate::markov::joint::{conditional_law, gaussian_joint, GaussianPreparation};
use crate::markov::screening::markov_screening_test;

pub const SWEEP_STEPS: usize = 32;
pub const FACTORIZATION_THRESHOLD: f64 = 1e-6;
const STENCIL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    /// x–y coupling in the drift, correlated boundary law.
    CoupledGeneric,
    /// x–y coupling in the drift, product boundary law.
    CoupledProduct,
    /// Diagonal drift, product boundary law.
    DecoupledProduct,
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstanceKind::CoupledGeneric => "coupled-generic",
            InstanceKind::CoupledProduct => "coupled-product",
            InstanceKind::DecoupledProduct => "decoupled-product",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ScreeningInstance {
    pub id: String,
    pub kind: InstanceKind,
    pub m: DMatrix<f64>,
    pub d: f64,
    pub prep: GaussianPreparation,
    pub result: CITestResult,
    pub factorization: FactorizationCheck,
}

impl ScreeningInstance {
    /// The screening verdict matches the factorization of `P_IN / Z`.
    pub fn agrees(&self) -> bool {
        (self.result.verdict == Verdict::Independent) == self.factorization.factorizes
    }
}

fn random_drift(rng: &mut ChaCha8Rng, coupled: bool) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.6..0.6));
    if coupled {
        for (i, j) in [(0, 1), (1, 0)] {
            let s: f64 = if m[(i, j)] < 0.0 { -1.0 } else { 1.0 };
            let v: f64 = m[(i, j)];
            m[(i, j)] = s * v.abs().max(0.15);
        }
    } else {
        m[(0, 1)] = 0.0;
        m[(1, 0)] = 0.0;
    }
    m
}

fn random_prep(rng: &mut ChaCha8Rng, correlated: bool) -> Result<GaussianPreparation> {
    let mean = DVector::from_fn(2, |_, _| rng.random_range(-0.5..0.5));
    let (sx, sy) = (rng.random_range(0.4..1.0), rng.random_range(0.4..1.0));
    let rho = if correlated { rng.random_range(0.3..0.8) * if rng.random_bool(0.5) { 1.0 } else { -1.0 } } else { 0.0 };
    let cov = DMatrix::from_row_slice(2, 2, &[sx * sx, rho * sx * sy, rho * sx * sy, sy * sy]);
    GaussianPreparation::new(mean, cov)
}

/// Quadrature grid over `φ(t2)` sized from its law given the boundary data
/// at the preparation mean.
pub fn fgz_grid(sys: &BridgeSystem, prep: &GaussianPreparation, t0: f64, tf: f64, steps: usize, k2: usize) -> Result<PhaseGrid> {
    let coords: Vec<(usize, usize)> = (0..sys.dim()).map(|c| (k2, c)).collect();
    let law = conditional_law(sys, t0, tf, steps, &coords)?;
    let centre = law.mean_at(&prep.mean);
    let axes = (0..sys.dim())
        .map(|c| {
            let sd = law.cov[(c, c)].sqrt();
            let reach = 12.0 * sd + 2.0 * STENCIL * law.gain.row(c).amax();
            Axis::span(centre[c] - reach, centre[c] + reach, sd / 8.0)
        })
        .collect::<Result<Vec<_>>>()?;
    PhaseGrid::new(axes)
}

fn run_instance(id: String, kind: InstanceKind, m: DMatrix<f64>, d: f64, prep: GaussianPreparation) -> Result<ScreeningInstance> {
    let sys = BridgeSystem::affine(m.clone(), DVector::zeros(2), d)?;
    let k2 = SWEEP_STEPS / 2;
    let joint = gaussian_joint(&sys, &prep, 0.0, 1.0, SWEEP_STEPS, &[0, k2, SWEEP_STEPS])?;
    let result = markov_screening_test(&joint, &PermutationOptions::default())?;
    let grid = fgz_grid(&sys, &prep, 0.0, 1.0, SWEEP_STEPS, k2)?;
    let fgz = fgz_decomposition(&sys, 0.0, 1.0, SWEEP_STEPS, k2, grid)?;
    let factorization = factorization_check(&fgz, &prep, STENCIL, FACTORIZATION_THRESHOLD)?;
    Ok(ScreeningInstance { id, kind, m, d, prep, result, factorization })
}

/// `per_kind` random instances of each [`InstanceKind`], in exact Gaussian mode.
pub fn screening_sweep(per_kind: usize, seed: u64) -> Result<Vec<ScreeningInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::new();
    for kind in [InstanceKind::CoupledGeneric, InstanceKind::CoupledProduct, InstanceKind::DecoupledProduct] {
        for i in 0..per_kind {
            let m = random_drift(&mut rng, kind != InstanceKind::DecoupledProduct);
            let d = rng.random_range(0.2..0.8);
            let prep = random_prep(&mut rng, kind == InstanceKind::CoupledGeneric)?;
            specs.push((format!("{kind}-{i:02}"), kind, m, d, prep));
        }
    }
    specs.into_par_iter().map(|(id, kind, m, d, prep)| run_instance(id, kind, m, d, prep)).collect()
}
