//! Split of the four-variable joint `P(x1, y3, x2, y2)` into the boundary
//! law, the two sub-interval kernels `F` and `G`, and the normalizer `Z`.
//!
//! `F(x2, y2; x1)` is the density of `x(t2)` on the bridge over `[t1, t2]`
//! pinned by `(x1, y2)`, and `G(x2, y2; y3)` the density of `y(t2)` on the
//! bridge over `[t2, t3]` pinned by `(x2, y3)`. With the boundary data drawn
//! from `P_IN`, the joint is `P_IN · F · G / Z`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{integrate, PhaseGrid};
use crate::markov::joint::{conditional_law, gaussian_density, AffineGaussianLaw, GaussianPreparation};
use crate::drift::BridgeSystem;

/// Relative change of `Z` between the quadrature grid and its coarsening
/// above which the grid counts as under-resolved.
pub const QUADRATURE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct FgzDecomposition {
    pub half: usize,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// Law of `x2` given `(x1, y2)`.
    pub f_law: AffineGaussianLaw,
    /// Law of `y2` given `(x2, y3)`.
    pub g_law: AffineGaussianLaw,
    /// Quadrature grid over `(x2, y2)`.
    pub grid: PhaseGrid,
}

impl FgzDecomposition {
    fn split<'a>(&self, v: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        v.split_at(self.half)
    }

    pub fn f(&self, x2: &[f64], y2: &[f64], x1: &[f64]) -> f64 {
        let cond = DVector::from_iterator(2 * self.half, x1.iter().chain(y2).copied());
        let mean = self.f_law.mean_at(&cond);
        gaussian_density(&mean, &self.f_law.cov, &DVector::from_column_slice(x2)).unwrap_or(0.0)
    }

    pub fn g(&self, x2: &[f64], y2: &[f64], y3: &[f64]) -> f64 {
        let cond = DVector::from_iterator(2 * self.half, x2.iter().chain(y3).copied());
        let mean = self.g_law.mean_at(&cond);
        gaussian_density(&mean, &self.g_law.cov, &DVector::from_column_slice(y2)).unwrap_or(0.0)
    }

    fn z_on(&self, grid: &PhaseGrid, x1: &[f64], y3: &[f64]) -> f64 {
        let vals = grid.map(|p| {
            let (x2, y2) = self.split(p);
            self.f(x2, y2, x1) * self.g(x2, y2, y3)
        });
        integrate(grid, &vals)
    }

    /// `Z(x1, y3) = ∬ F G dx2 dy2` by quadrature on the grid.
    pub fn z(&self, x1: &[f64], y3: &[f64]) -> f64 {
        self.z_on(&self.grid, x1, y3)
    }

    /// `Z` with a refinement check: the result on the grid must agree with
    /// the result on the grid with doubled spacing.
    pub fn z_checked(&self, x1: &[f64], y3: &[f64]) -> Result<f64> {
        let fine = self.z(x1, y3);
        let coarse_axes = self
            .grid
            .axes()
            .iter()
            .map(|a| crate::grid::Axis::new(a.min, 2.0 * a.h, a.n.div_ceil(2)))
            .collect::<Result<Vec<_>>>()?;
        let coarse = self.z_on(&PhaseGrid::new(coarse_axes)?, x1, y3);
        let rel = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
        if !(rel <= QUADRATURE_TOL) {
            return Err(Error::InvalidGrid(format!(
                "Z changes by {rel:.2e} under grid coarsening; refine or widen the (x2, y2) grid"
            )));
        }
        Ok(fine)
    }

    /// Joint density `P_IN(x1, y3) F G / Z`.
    pub fn joint(&self, prep: &GaussianPreparation, x1: &[f64], y3: &[f64], x2: &[f64], y2: &[f64]) -> Result<f64> {
        let phi_in = DVector::from_iterator(2 * self.half, x1.iter().chain(y3).copied());
        let p_in = prep
            .density(&phi_in)
            .ok_or_else(|| Error::Unsupported("reconstruction needs a nondegenerate boundary law".into()))?;
        Ok(p_in * self.f(x2, y2, x1) * self.g(x2, y2, y3) / self.z_checked(x1, y3)?)
    }

    /// Mixed second difference `∂²/∂x1_i∂y3_j log Z` at `(x1, y3)` with step `delta`.
    pub fn log_z_mixed(&self, x1: &[f64], y3: &[f64], i: usize, j: usize, delta: f64) -> Result<f64> {
        let mut v = 0.0;
        for (sx, sy, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
            let mut a = x1.to_vec();
            let mut b = y3.to_vec();
            a[i] += sx * delta;
            b[j] += sy * delta;
            v += sign * self.z_checked(&a, &b)?.ln();
        }
        Ok(v / (4.0 * delta * delta))
    }
}

/// Builds `F` and `G` from the exact sub-interval bridges. `k2` is the step
/// of `t2` on a grid of `steps` intervals over `[t1, t3]`, so both kernels
/// use the same time step as the full bridge.
pub fn fgz_decomposition(
    sys: &BridgeSystem,
    t1: f64,
    t3: f64,
    steps: usize,
    k2: usize,
    grid: PhaseGrid,
) -> Result<FgzDecomposition> {
    let n = sys.half();
    if k2 == 0 || k2 >= steps {
        return Err(Error::InvalidGrid(format!("t2 must be an interior step, got {k2} of {steps}")));
    }
    if grid.dims() != 2 * n {
        return Err(Error::Dimension { expected: 2 * n, got: grid.dims() });
    }
    let t2 = t1 + (t3 - t1) * k2 as f64 / steps as f64;
    let f_coords: Vec<(usize, usize)> = (0..n).map(|c| (k2, c)).collect();
    let g_coords: Vec<(usize, usize)> = (n..2 * n).map(|c| (0, c)).collect();
    let f_law = conditional_law(sys, t1, t2, k2, &f_coords)?;
    let g_law = conditional_law(sys, t2, t3, steps - k2, &g_coords)?;
    Ok(FgzDecomposition { half: n, t1, t2, t3, f_law, g_law, grid })
}

/// Outcome of checking whether `P_IN / Z` factorizes over `(x1, y3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationCheck {
    /// Frobenius norm of the mixed Hessian of `log(P_IN / Z)`, scaled by
    /// the diagonal curvature of `log P_IN`.
    pub statistic: f64,
    pub threshold: f64,
    pub factorizes: bool,
}

/// Factorization of `P_IN / Z` for a Gaussian boundary law, evaluated at
/// the boundary mean. `log P_IN` has the constant mixed Hessian `−(C⁻¹)_xy`.
pub fn factorization_check(fgz: &FgzDecomposition, prep: &GaussianPreparation, delta: f64, threshold: f64) -> Result<FactorizationCheck> {
    let n = fgz.half;
    let prec = prep
        .cov
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Unsupported("factorization check needs a nondegenerate boundary law".into()))?;
    let x1: Vec<f64> = prep.mean.rows(0, n).iter().copied().collect();
    let y3: Vec<f64> = prep.mean.rows(n, n).iter().copied().collect();
    let mut mixed = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let lz = fgz.log_z_mixed(&x1, &y3, i, j, delta)?;
            mixed[(i, j)] = (-prec[(i, n + j)] - lz) / (prec[(i, i)] * prec[(n + j, n + j)]).sqrt();
        }
    }
    let statistic = mixed.norm();
    Ok(FactorizationCheck { statistic, threshold, factorizes: statistic <= threshold })
}
