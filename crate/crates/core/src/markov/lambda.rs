//! Comparison of time-oriented conditionals and the mixed-time kernel
//! across two preparations of the boundary data.
//!
//! With `φ1` the configuration at the start and `φ2` at the end of the
//! bridge, the mixed-time kernel `P(x2, y1 | y2, x1)` is the bridge law
//! itself, while `P_R(φ2 | φ1)` carries the preparation through Bayes' rule.

use nalgebra::{DMatrix, DVector};

use crate::drift::BridgeSystem;
use crate::error::{Error, Result};
use crate::grid::{integrate, Axis, PhaseGrid};
use crate::markov::joint::{gaussian_density, gaussian_joint, GaussianPreparation, JointData, MultiTimeJoint};

/// Probes farther than this Mahalanobis distance from a preparation's
/// marginal mean lie outside its support (density ratio below 1e−8).
const SUPPORT_RADIUS_SQ: f64 = 36.84;

/// Noise floor for exact Gaussian comparisons, where the only error is
/// quadrature and rounding.
const EXACT_NOISE_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LambdaReport {
    /// Total-variation distance of `P_R(φ2 | φ1)` between the preparations,
    /// one entry per probe.
    pub conditional_tv: Vec<f64>,
    /// Total-variation distance of `P(x2, y1 | y2, x1)`, one entry per kernel probe.
    pub kernel_tv: Vec<f64>,
    /// Quadrature error estimate from the grid and its coarsening.
    pub noise: f64,
}

impl LambdaReport {
    pub fn sup_conditional(&self) -> f64 {
        self.conditional_tv.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_kernel(&self) -> f64 {
        self.kernel_tv.iter().copied().fold(0.0, f64::max)
    }

    /// Time-oriented conditionals differ by more than ten times the noise.
    pub fn conditionals_differ(&self) -> bool {
        self.sup_conditional() > 10.0 * self.noise
    }

    /// Mixed-time kernels agree within the noise.
    pub fn kernel_agrees(&self) -> bool {
        self.sup_kernel() <= self.noise
    }
}

/// Conditional Gaussian of `target` given `given = value`.
fn condition(mean: &DVector<f64>, cov: &DMatrix<f64>, target: &[usize], given: &[usize], value: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| cov[(r[i], c[j])]);
    let gg = sub(given, given)
        .cholesky()
        .ok_or_else(|| Error::Numerical("conditioning block is singular".into()))?;
    let tg = sub(target, given);
    let r = DVector::from_iterator(given.len(), given.iter().zip(value).map(|(&i, v)| v - mean[i]));
    let mu = DVector::from_iterator(target.len(), target.iter().map(|&i| mean[i])) + &tg * gg.solve(&r);
    let c = sub(target, target) - &tg * gg.solve(&tg.transpose());
    Ok((mu, (&c + c.transpose()) * 0.5))
}

fn check_support(mean: &DVector<f64>, cov: &DMatrix<f64>, given: &[usize], value: &[f64], what: &str) -> Result<()> {
    let m = DVector::from_iterator(given.len(), given.iter().map(|&i| mean[i]));
    let c = DMatrix::from_fn(given.len(), given.len(), |i, j| cov[(given[i], given[j])]);
    let ch = c.cholesky().ok_or_else(|| Error::DisjointSupport(format!("{what}: degenerate marginal")))?;
    let r = DVector::from_column_slice(value) - m;
    let d2 = r.dot(&ch.solve(&r));
    if d2 > SUPPORT_RADIUS_SQ {
        return Err(Error::DisjointSupport(format!(
            "{what} probe {value:?} lies at Mahalanobis distance {:.2} from one preparation",
            d2.sqrt()
        )));
    }
    Ok(())
}

fn coarsened(grid: &PhaseGrid) -> Result<PhaseGrid> {
    PhaseGrid::new(grid.axes().iter().map(|a| Axis::new(a.min, 2.0 * a.h, a.n.div_ceil(2))).collect::<Result<Vec<_>>>()?)
}

/// TV distance and the larger of the two mass defects on `grid`.
fn tv_on(grid: &PhaseGrid, a: &(DVector<f64>, DMatrix<f64>), b: &(DVector<f64>, DMatrix<f64>)) -> (f64, f64) {
    let dens = |law: &(DVector<f64>, DMatrix<f64>)| {
        grid.map(|p| gaussian_density(&law.0, &law.1, &DVector::from_column_slice(p)).unwrap_or(0.0))
    };
    let (p, q) = (dens(a), dens(b));
    let diff: Vec<f64> = p.iter().zip(&q).map(|(u, v)| (u - v).abs()).collect();
    let defect = (1.0 - integrate(grid, &p)).abs().max((1.0 - integrate(grid, &q)).abs());
    (0.5 * integrate(grid, &diff), defect)
}

/// TV on the grid and the noise estimate from the coarsened grid.
fn tv_with_noise(grid: &PhaseGrid, coarse: &PhaseGrid, a: &(DVector<f64>, DMatrix<f64>), b: &(DVector<f64>, DMatrix<f64>)) -> (f64, f64) {
    let (fine, defect) = tv_on(grid, a, b);
    let (rough, _) = tv_on(coarse, a, b);
    (fine, (fine - rough).abs() + defect)
}

fn moments(j: &MultiTimeJoint) -> (&DVector<f64>, &DMatrix<f64>) {
    match &j.data {
        JointData::Gaussian { mean, cov } => (mean, cov),
        JointData::Samples { .. } => unreachable!("gaussian_joint returns moments"),
    }
}

/// Exact comparison for affine drift and Gaussian preparations. `probes`
/// are values of `φ1 = φ(t0)`; `kernel_probes` are values of `(x1, y2)`.
/// `grid` spans the conditioned variables, `(x2, y2)` and `(x2, y1)`.
#[allow(clippy::too_many_arguments)]
pub fn lambda_mediation_test(
    sys: &BridgeSystem,
    t0: f64,
    tf: f64,
    steps: usize,
    r1: &GaussianPreparation,
    r2: &GaussianPreparation,
    probes: &[Vec<f64>],
    kernel_probes: &[Vec<f64>],
    grid: &PhaseGrid,
) -> Result<LambdaReport> {
    let n = sys.half();
    if grid.dims() != 2 * n {
        return Err(Error::Dimension { expected: 2 * n, got: grid.dims() });
    }
    if let Some(p) = probes.iter().chain(kernel_probes).find(|p| p.len() != 2 * n) {
        return Err(Error::Dimension { expected: 2 * n, got: p.len() });
    }
    let joints = [gaussian_joint(sys, r1, t0, tf, steps, &[0, steps])?, gaussian_joint(sys, r2, t0, tf, steps, &[0, steps])?];
    let j = &joints[0];
    let phi1 = j.phi(0)?;
    let phi2 = j.phi(steps)?;
    let mixed_given: Vec<usize> = j.x(0)?.into_iter().chain(j.y(steps)?).collect();
    let mixed_target: Vec<usize> = j.x(steps)?.into_iter().chain(j.y(0)?).collect();
    let coarse = coarsened(grid)?;
    let mut noise: f64 = EXACT_NOISE_FLOOR;

    let mut conditional_tv = Vec::with_capacity(probes.len());
    for p in probes {
        let mut laws = Vec::with_capacity(2);
        for jr in &joints {
            let (mean, cov) = moments(jr);
            check_support(mean, cov, &phi1, p, "phi(t0)")?;
            laws.push(condition(mean, cov, &phi2, &phi1, p)?);
        }
        let (tv, err) = tv_with_noise(grid, &coarse, &laws[0], &laws[1]);
        noise = noise.max(err);
        conditional_tv.push(tv);
    }

    let mut kernel_tv = Vec::with_capacity(kernel_probes.len());
    for p in kernel_probes {
        let mut laws = Vec::with_capacity(2);
        for jr in &joints {
            let (mean, cov) = moments(jr);
            check_support(mean, cov, &mixed_given, p, "(x1, y2)")?;
            laws.push(condition(mean, cov, &mixed_target, &mixed_given, p)?);
        }
        let (tv, err) = tv_with_noise(grid, &coarse, &laws[0], &laws[1]);
        noise = noise.max(err);
        kernel_tv.push(tv);
    }
    Ok(LambdaReport { conditional_tv, kernel_tv, noise })
}
