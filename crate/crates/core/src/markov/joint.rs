//! Joint laws of path coordinates at several times, either as exact Gaussian
//! moments or as raw samples.

use nalgebra::{DMatrix, DVector};

use crate::bridge::{gaussian_bridge_exact, BridgeBoundary, BridgeEnsemble};
use crate::drift::BridgeSystem;
use crate::error::{Error, Result};
use crate::propagator::estimate::step_of_time;

/// Gaussian law of the boundary data `φ_IN = (x(t0), y(tf))`, stacked as
/// `(x0_1..x0_N, yf_1..yf_N)`. A zero covariance is a fixed boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPreparation {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianPreparation {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidDistribution(format!("boundary data needs an even, nonzero length, got {n}")));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::Dimension { expected: n, got: cov.nrows() });
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::InvalidDistribution("covariance is not symmetric".into()));
        }
        let eig = cov.clone().symmetric_eigenvalues();
        if eig.min() < -1e-12 * eig.amax().max(1.0) {
            return Err(Error::InvalidDistribution(format!("covariance has eigenvalue {:.3e}", eig.min())));
        }
        Ok(Self { mean, cov })
    }

    pub fn fixed(x0: &[f64], yf: &[f64]) -> Result<Self> {
        let mean = DVector::from_iterator(x0.len() + yf.len(), x0.iter().chain(yf).copied());
        let n = mean.len();
        if x0.len() != yf.len() {
            return Err(Error::Dimension { expected: x0.len(), got: yf.len() });
        }
        Self::new(mean, DMatrix::zeros(n, n))
    }

    /// Independent `x0` and `yf` blocks.
    pub fn product(mean: DVector<f64>, cov_x: DMatrix<f64>, cov_y: DMatrix<f64>) -> Result<Self> {
        let h = cov_x.nrows();
        let mut cov = DMatrix::zeros(2 * h, 2 * h);
        cov.view_mut((0, 0), (h, h)).copy_from(&cov_x);
        cov.view_mut((h, h), (cov_y.nrows(), cov_y.ncols())).copy_from(&cov_y);
        Self::new(mean, cov)
    }

    pub fn half(&self) -> usize {
        self.mean.len() / 2
    }

    /// Gaussian density at `(x0, yf)`; `None` when the covariance is singular.
    pub fn density(&self, point: &DVector<f64>) -> Option<f64> {
        gaussian_density(&self.mean, &self.cov, point)
    }
}

pub fn gaussian_density(mean: &DVector<f64>, cov: &DMatrix<f64>, point: &DVector<f64>) -> Option<f64> {
    let ch = cov.clone().cholesky()?;
    let r = point - mean;
    let q = r.dot(&ch.solve(&r));
    let logdet: f64 = ch.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let n = mean.len() as f64;
    Some((-0.5 * (q + logdet + n * (2.0 * std::f64::consts::PI).ln())).exp())
}

/// Law of selected path coordinates given the boundary data:
/// `v | φ_IN ~ N(offset + gain φ_IN, cov)`.
#[derive(Clone, Debug)]
pub struct AffineGaussianLaw {
    pub offset: DVector<f64>,
    pub gain: DMatrix<f64>,
    pub cov: DMatrix<f64>,
}

impl AffineGaussianLaw {
    pub fn mean_at(&self, phi_in: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.gain * phi_in
    }

    /// Marginal moments after averaging the boundary data over `prep`.
    pub fn mix(&self, prep: &GaussianPreparation) -> (DVector<f64>, DMatrix<f64>) {
        let mean = self.mean_at(&prep.mean);
        let cov = &self.gain * &prep.cov * self.gain.transpose() + &self.cov;
        (mean, cov)
    }
}

/// The bridge mean is affine in the boundary data and its covariance does
/// not depend on it, so one solve per unit boundary recovers the map.
pub fn conditional_law(
    sys: &BridgeSystem,
    t0: f64,
    tf: f64,
    steps: usize,
    coords: &[(usize, usize)],
) -> Result<AffineGaussianLaw> {
    let n = sys.half();
    let solve = |phi: &[f64]| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let b = BridgeBoundary::new(t0, tf, phi[..n].to_vec(), phi[n..].to_vec())?;
        Ok(gaussian_bridge_exact(sys, &b, steps)?.joint(coords))
    };
    let (offset, cov) = solve(&vec![0.0; 2 * n])?;
    let mut gain = DMatrix::zeros(coords.len(), 2 * n);
    for i in 0..2 * n {
        let mut e = vec![0.0; 2 * n];
        e[i] = 1.0;
        let (m, _) = solve(&e)?;
        gain.set_column(i, &(m - &offset));
    }
    Ok(AffineGaussianLaw { offset, gain, cov })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointCoord {
    pub step: usize,
    pub time: f64,
    pub comp: usize,
}

#[derive(Clone, Debug)]
pub enum JointData {
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
    /// One row per draw, columns in coordinate order.
    Samples { rows: Vec<Vec<f64>>, seed: u64 },
}

/// Joint law of all phase-space components at a set of bridge steps.
#[derive(Clone, Debug)]
pub struct MultiTimeJoint {
    pub half: usize,
    pub coords: Vec<JointCoord>,
    pub data: JointData,
}

impl MultiTimeJoint {
    pub fn index(&self, step: usize, comp: usize) -> Option<usize> {
        self.coords.iter().position(|c| c.step == step && c.comp == comp)
    }

    fn block(&self, step: usize, comps: std::ops::Range<usize>) -> Result<Vec<usize>> {
        comps
            .map(|c| {
                self.index(step, c)
                    .ok_or_else(|| Error::InvalidGrid(format!("step {step} component {c} is not part of the joint")))
            })
            .collect()
    }

    pub fn x(&self, step: usize) -> Result<Vec<usize>> {
        self.block(step, 0..self.half)
    }

    pub fn y(&self, step: usize) -> Result<Vec<usize>> {
        self.block(step, self.half..2 * self.half)
    }

    pub fn phi(&self, step: usize) -> Result<Vec<usize>> {
        self.block(step, 0..2 * self.half)
    }

    pub fn steps(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.coords.iter().map(|c| c.step).collect();
        s.dedup();
        s
    }

    pub fn n_samples(&self) -> Option<usize> {
        match &self.data {
            JointData::Gaussian { .. } => None,
            JointData::Samples { rows, .. } => Some(rows.len()),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.data {
            JointData::Gaussian { .. } => None,
            JointData::Samples { seed, .. } => Some(*seed),
        }
    }

    /// Density of the selected coordinates at `point` (Gaussian joints only).
    pub fn density(&self, idx: &[usize], point: &[f64]) -> Result<f64> {
        let JointData::Gaussian { mean, cov } = &self.data else {
            return Err(Error::Unsupported("density evaluation needs a Gaussian joint".into()));
        };
        let m = DVector::from_iterator(idx.len(), idx.iter().map(|&i| mean[i]));
        let c = DMatrix::from_fn(idx.len(), idx.len(), |a, b| cov[(idx[a], idx[b])]);
        gaussian_density(&m, &c, &DVector::from_column_slice(point))
            .ok_or_else(|| Error::Numerical("singular covariance in density evaluation".into()))
    }

    /// Rows of an ensemble at the given steps; the fixed boundary makes the
    /// pinned columns constant.
    pub fn from_ensemble(ens: &BridgeEnsemble, steps: &[usize]) -> Result<Self> {
        let half = ens.boundary.half();
        let coords = coords_at(&ens.boundary, ens.steps, steps)?;
        let rows = ens.paths.iter().map(|p| coords.iter().map(|c| p.at(c.step)[c.comp]).collect()).collect();
        Ok(Self { half, coords, data: JointData::Samples { rows, seed: ens.rng_seed } })
    }
}

fn coords_at(b: &BridgeBoundary, total: usize, steps: &[usize]) -> Result<Vec<JointCoord>> {
    if steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("joint steps must be strictly increasing".into()));
    }
    if let Some(&k) = steps.iter().find(|&&k| k > total) {
        return Err(Error::InvalidGrid(format!("step {k} beyond the bridge's {total} steps")));
    }
    let dt = b.dt(total);
    Ok(steps
        .iter()
        .flat_map(|&k| (0..2 * b.half()).map(move |c| JointCoord { step: k, time: b.t0 + k as f64 * dt, comp: c }))
        .collect())
}

/// Steps of `times` on a bridge over `[t0, tf]` with `steps` intervals.
pub fn steps_of_times(t0: f64, tf: f64, steps: usize, times: &[f64]) -> Result<Vec<usize>> {
    let b = BridgeBoundary::new(t0, tf, vec![0.0], vec![0.0])?;
    times.iter().map(|&t| step_of_time(&b, steps, t)).collect()
}

/// Exact joint of all components at `steps` when the boundary data are
/// drawn from `prep` and the drift is affine.
pub fn gaussian_joint(
    sys: &BridgeSystem,
    prep: &GaussianPreparation,
    t0: f64,
    tf: f64,
    total: usize,
    steps: &[usize],
) -> Result<MultiTimeJoint> {
    if sys.drift.affine().is_none() {
        return Err(Error::Unsupported("exact multi-time joint needs an affine drift".into()));
    }
    if prep.half() != sys.half() {
        return Err(Error::Dimension { expected: sys.half(), got: prep.half() });
    }
    let b = BridgeBoundary::new(t0, tf, vec![0.0; sys.half()], vec![0.0; sys.half()])?;
    let coords = coords_at(&b, total, steps)?;
    let pairs: Vec<(usize, usize)> = coords.iter().map(|c| (c.step, c.comp)).collect();
    let law = conditional_law(sys, t0, tf, total, &pairs)?;
    let (mean, cov) = law.mix(prep);
    Ok(MultiTimeJoint { half: sys.half(), coords, data: JointData::Gaussian { mean, cov } })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn law_gain_reproduces_a_direct_solve() {
        let m = DMatrix::from_row_slice(2, 2, &[-0.4, 0.3, -0.2, 0.5]);
        let sys = BridgeSystem::affine(m, DVector::from_vec(vec![0.1, 0.0]), 0.5).unwrap();
        let coords = [(0, 1), (5, 0), (5, 1), (16, 0)];
        let law = conditional_law(&sys, 0.0, 1.0, 16, &coords).unwrap();
        let b = BridgeBoundary::new(0.0, 1.0, vec![0.7], vec![-1.3]).unwrap();
        let (mu, cov) = gaussian_bridge_exact(&sys, &b, 16).unwrap().joint(&coords);
        let phi = DVector::from_vec(vec![0.7, -1.3]);
        assert!((law.mean_at(&phi) - mu).amax() < 1e-10);
        assert!((&law.cov - cov).amax() < 1e-12);
    }

    #[test]
    fn fixed_preparation_pins_the_boundary_columns() {
        let sys = BridgeSystem::affine(DMatrix::zeros(2, 2), DVector::zeros(2), 0.5).unwrap();
        let prep = GaussianPreparation::fixed(&[0.2], &[0.4]).unwrap();
        let j = gaussian_joint(&sys, &prep, 0.0, 1.0, 8, &[0, 4, 8]).unwrap();
        let JointData::Gaussian { mean, cov } = &j.data else { unreachable!() };
        let x0 = j.index(0, 0).unwrap();
        let yf = j.index(8, 1).unwrap();
        assert_eq!(mean[x0], 0.2);
        assert_eq!(mean[yf], 0.4);
        assert_eq!(cov[(x0, x0)], 0.0);
        assert_eq!(cov[(yf, yf)], 0.0);
    }
}
