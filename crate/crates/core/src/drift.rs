//! Drift fields in frame coordinates `φ = (x, y)`, as consumed by the path
//! measure.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symbol::{diagonalize_diffusion, drift_field, ComplexPolynomial, DriftField, QuadratureFrame};

const FD_STEP: f64 = 1e-5;

pub trait DriftModel: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;

    fn eval(&self, phi: &[f64]) -> DVector<f64>;

    fn jacobian(&self, phi: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut j = DMatrix::zeros(n, n);
        let mut p = phi.to_vec();
        for k in 0..n {
            p[k] = phi[k] + FD_STEP;
            let hi = self.eval(&p);
            p[k] = phi[k] - FD_STEP;
            let lo = self.eval(&p);
            p[k] = phi[k];
            j.set_column(k, &((hi - lo) / (2.0 * FD_STEP)));
        }
        j
    }

    fn divergence(&self, phi: &[f64]) -> f64 {
        self.jacobian(phi).trace()
    }

    fn divergence_gradient(&self, phi: &[f64]) -> DVector<f64> {
        let mut p = phi.to_vec();
        DVector::from_fn(self.dim(), |k, _| {
            p[k] = phi[k] + FD_STEP;
            let hi = self.divergence(&p);
            p[k] = phi[k] - FD_STEP;
            let lo = self.divergence(&p);
            p[k] = phi[k];
            (hi - lo) / (2.0 * FD_STEP)
        })
    }

    /// `(M, c)` when the drift is exactly `M φ + c`.
    fn affine(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        None
    }
}

/// `A(φ) = M φ + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineDrift {
    pub m: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl AffineDrift {
    pub fn new(m: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || n % 2 != 0 || m.ncols() != n {
            return Err(Error::Dimension { expected: n, got: m.ncols() });
        }
        if c.len() != n {
            return Err(Error::Dimension { expected: n, got: c.len() });
        }
        Ok(Self { m, c })
    }

    pub fn linear(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        Self::new(m, DVector::zeros(n))
    }

    pub fn zero(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim), c: DVector::zeros(dim) }
    }
}

impl DriftModel for AffineDrift {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn eval(&self, phi: &[f64]) -> DVector<f64> {
        &self.m * DVector::from_column_slice(phi) + &self.c
    }

    fn jacobian(&self, _phi: &[f64]) -> DMatrix<f64> {
        self.m.clone()
    }

    fn divergence(&self, _phi: &[f64]) -> f64 {
        self.m.trace()
    }

    fn divergence_gradient(&self, _phi: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim())
    }

    fn affine(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.m.clone(), self.c.clone()))
    }
}

/// Affine drift plus a diagonal cubic term, `A_i += ε g_i φ_i³`.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicDrift {
    pub base: AffineDrift,
    pub epsilon: f64,
    pub g: DVector<f64>,
}

impl CubicDrift {
    pub fn new(base: AffineDrift, epsilon: f64, g: DVector<f64>) -> Result<Self> {
        if g.len() != base.dim() {
            return Err(Error::Dimension { expected: base.dim(), got: g.len() });
        }
        Ok(Self { base, epsilon, g })
    }
}

impl DriftModel for CubicDrift {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, phi: &[f64]) -> DVector<f64> {
        let mut a = self.base.eval(phi);
        for i in 0..phi.len() {
            a[i] += self.epsilon * self.g[i] * phi[i].powi(3);
        }
        a
    }

    fn jacobian(&self, phi: &[f64]) -> DMatrix<f64> {
        let mut j = self.base.m.clone();
        for i in 0..phi.len() {
            j[(i, i)] += 3.0 * self.epsilon * self.g[i] * phi[i] * phi[i];
        }
        j
    }

    fn divergence(&self, phi: &[f64]) -> f64 {
        self.base.m.trace() + (0..phi.len()).map(|i| 3.0 * self.epsilon * self.g[i] * phi[i] * phi[i]).sum::<f64>()
    }

    fn divergence_gradient(&self, phi: &[f64]) -> DVector<f64> {
        DVector::from_fn(phi.len(), |i, _| 6.0 * self.epsilon * self.g[i] * phi[i])
    }
}

/// Drift of a symbol expressed in its quadrature frame:
/// `A_frame(φ) = Rᵀ A_std(R φ)`.
#[derive(Clone, Debug)]
pub struct HamiltonianDrift {
    field: DriftField,
    frame: QuadratureFrame,
    affine: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl HamiltonianDrift {
    pub fn new(h: &ComplexPolynomial, frame: QuadratureFrame) -> Result<Self> {
        if frame.num_modes() != h.num_modes() {
            return Err(Error::Dimension { expected: h.num_modes(), got: frame.num_modes() });
        }
        let field = drift_field(h)?;
        let mut out = Self { field, frame, affine: None };
        if h.total_degree() <= 2 {
            let zero = vec![0.0; 2 * h.num_modes()];
            out.affine = Some((out.jacobian(&zero), out.eval(&zero)));
        }
        Ok(out)
    }

    pub fn frame(&self) -> &QuadratureFrame {
        &self.frame
    }

    fn to_std(&self, phi: &[f64]) -> Vec<f64> {
        self.frame.frame_to_std(phi).as_slice().to_vec()
    }
}

impl DriftModel for HamiltonianDrift {
    fn dim(&self) -> usize {
        2 * self.frame.num_modes()
    }

    fn eval(&self, phi: &[f64]) -> DVector<f64> {
        self.frame.rotation().tr_mul(&self.field.eval(&self.to_std(phi)))
    }

    fn jacobian(&self, phi: &[f64]) -> DMatrix<f64> {
        self.frame.conjugate(&self.field.jacobian(&self.to_std(phi)))
    }

    fn divergence(&self, phi: &[f64]) -> f64 {
        self.field.divergence(&self.to_std(phi))
    }

    fn affine(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        self.affine.clone()
    }
}

/// Drift and constant diffusion magnitude of a mixed-boundary path measure.
#[derive(Clone, Debug)]
pub struct BridgeSystem {
    pub drift: Arc<dyn DriftModel>,
    pub d: f64,
}

impl BridgeSystem {
    pub fn new(drift: Arc<dyn DriftModel>, d: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::DegenerateMeasure(d));
        }
        if drift.dim() % 2 != 0 {
            return Err(Error::Dimension { expected: drift.dim() + 1, got: drift.dim() });
        }
        Ok(Self { drift, d })
    }

    /// Frame, drift and diffusion magnitude of a constant-diffusion symbol.
    pub fn from_hamiltonian(h: &ComplexPolynomial) -> Result<Self> {
        let frame = diagonalize_diffusion(h)?;
        let d = frame.d();
        if d == 0.0 {
            return Err(Error::DegenerateMeasure(0.0));
        }
        Self::new(Arc::new(HamiltonianDrift::new(h, frame)?), d)
    }

    pub fn affine(m: DMatrix<f64>, c: DVector<f64>, d: f64) -> Result<Self> {
        Self::new(Arc::new(AffineDrift::new(m, c)?), d)
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    /// Number of coordinates in each of the x and y blocks.
    pub fn half(&self) -> usize {
        self.drift.dim() / 2
    }
}
