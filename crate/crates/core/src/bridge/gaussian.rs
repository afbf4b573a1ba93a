//! Exact description of the path measure when the drift is affine: the
//! action is a quadratic form in the free variables.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::bridge::path::{BridgeBoundary, DiscretePath, FreeLayout, Slot};
use crate::drift::BridgeSystem;
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which the precision counts as singular.
const PD_TOL: f64 = 1e-12;

/// Stacked midpoint residuals `r = L z − f`, with `r_k = A φ_{k+1} − B φ_k − c`,
/// `A = I/Δt − M/2`, `B = I/Δt + M/2`.
pub struct ResidualMap {
    pub l: DMatrix<f64>,
    pub f: DVector<f64>,
}

pub fn residual_map(sys: &BridgeSystem, b: &BridgeBoundary, layout: &FreeLayout) -> Result<ResidualMap> {
    let (m, c) = sys
        .drift
        .affine()
        .ok_or_else(|| Error::Unsupported("exact bridge description needs an affine drift".into()))?;
    let dim = layout.dim();
    if dim != sys.dim() || b.half() != layout.half {
        return Err(Error::Dimension { expected: sys.dim(), got: dim });
    }
    let dt = b.dt(layout.steps);
    let eye = DMatrix::<f64>::identity(dim, dim);
    let a_mat = &eye / dt - &m * 0.5;
    let b_mat = &eye / dt + &m * 0.5;
    let rows = layout.steps * dim;
    let mut l = DMatrix::zeros(rows, layout.len());
    let mut f = DVector::zeros(rows);
    for k in 0..layout.steps {
        for i in 0..dim {
            let row = k * dim + i;
            f[row] = c[i];
            for j in 0..dim {
                for (step, coeff) in [(k + 1, a_mat[(i, j)]), (k, -b_mat[(i, j)])] {
                    if coeff == 0.0 {
                        continue;
                    }
                    match layout.slot(b, step, j) {
                        Slot::Free(col) => l[(row, col)] += coeff,
                        Slot::Pinned(v) => f[row] -= coeff * v,
                    }
                }
            }
        }
    }
    Ok(ResidualMap { l, f })
}

/// Gaussian law of the free path variables.
#[derive(Clone, Debug)]
pub struct GaussianBridge {
    pub boundary: BridgeBoundary,
    pub layout: FreeLayout,
    pub precision: DMatrix<f64>,
    pub b: DVector<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianBridge {
    /// Lower Cholesky factor `L` of the precision, `P = L Lᵀ`.
    pub fn precision_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn mean_path(&self) -> DiscretePath {
        self.layout.to_path(&self.boundary, self.mean.as_slice())
    }

    /// Mean and covariance of selected `(step, component)` coordinates;
    /// pinned coordinates have zero variance.
    pub fn joint(&self, coords: &[(usize, usize)]) -> (DVector<f64>, DMatrix<f64>) {
        let slots: Vec<Slot> = coords.iter().map(|&(k, c)| self.layout.slot(&self.boundary, k, c)).collect();
        let mean = DVector::from_iterator(
            slots.len(),
            slots.iter().map(|s| match s {
                Slot::Free(i) => self.mean[*i],
                Slot::Pinned(v) => *v,
            }),
        );
        let cov = DMatrix::from_fn(slots.len(), slots.len(), |a, b| match (slots[a], slots[b]) {
            (Slot::Free(i), Slot::Free(j)) => self.cov[(i, j)],
            _ => 0.0,
        });
        (mean, cov)
    }

    pub fn marginal(&self, step: usize) -> (DVector<f64>, DMatrix<f64>) {
        let coords: Vec<(usize, usize)> = (0..self.layout.dim()).map(|c| (step, c)).collect();
        self.joint(&coords)
    }
}

/// Quadratic form `S(z) = ½ zᵀ P z − bᵀ z + const` of an affine-drift bridge.
pub fn gaussian_bridge_exact(sys: &BridgeSystem, boundary: &BridgeBoundary, steps: usize) -> Result<GaussianBridge> {
    let layout = FreeLayout::new(boundary.half(), steps)?;
    let map = residual_map(sys, boundary, &layout)?;
    let w = boundary.dt(steps) / sys.d;
    let precision = map.l.tr_mul(&map.l) * w;
    let b = map.l.tr_mul(&map.f) * w;
    check_positive_definite(&precision)?;
    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NonNormalizable("precision of the path measure is not positive definite".into()))?;
    let mean = chol.solve(&b);
    let cov = chol.inverse();
    Ok(GaussianBridge { boundary: boundary.clone(), layout, precision, b, mean, cov, chol })
}

pub(crate) fn check_positive_definite(p: &DMatrix<f64>) -> Result<()> {
    let eig = p.clone().symmetric_eigenvalues();
    let max = eig.amax();
    let min = eig.min();
    if !(min > PD_TOL * max) {
        return Err(Error::NonNormalizable(format!(
            "precision eigenvalues span [{min:.3e}, {max:.3e}]; the path integral does not normalize"
        )));
    }
    Ok(())
}
