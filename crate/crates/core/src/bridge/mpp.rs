//! Minimizer of the discretized action (the most probable path).

use nalgebra::{DMatrix, DVector};

use crate::bridge::action::{action_free, gradient_free};
use crate::bridge::gaussian::residual_map;
use crate::bridge::path::{BridgeBoundary, DiscretePath, FreeLayout};
use crate::drift::BridgeSystem;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub gradient_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 100, gradient_tol: 1e-8 }
    }
}

/// Hessian of the action in the free variables: exact for affine drift,
/// otherwise central differences of the analytic gradient.
pub fn action_hessian(sys: &BridgeSystem, b: &BridgeBoundary, layout: &FreeLayout, z: &[f64]) -> Result<DMatrix<f64>> {
    if sys.drift.affine().is_some() {
        let map = residual_map(sys, b, layout)?;
        return Ok(map.l.tr_mul(&map.l) * (b.dt(layout.steps) / sys.d));
    }
    let n = layout.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut p = z.to_vec();
    for i in 0..n {
        let h = 1e-5 * (1.0 + z[i].abs());
        p[i] = z[i] + h;
        let up = gradient_free(sys, b, layout, &p)?;
        p[i] = z[i] - h;
        let dn = gradient_free(sys, b, layout, &p)?;
        p[i] = z[i];
        hess.set_column(i, &((up - dn) / (2.0 * h)));
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Free variables of the straight line from the pinned data, with the free
/// endpoint blocks held at their pinned partners' values.
pub fn initial_guess(b: &BridgeBoundary, layout: &FreeLayout) -> DVector<f64> {
    let n = layout.half;
    let mut z = DVector::zeros(layout.len());
    for k in 0..=layout.steps {
        for c in 0..2 * n {
            if let Some(i) = layout.free_index(k, c) {
                z[i] = if c < n { b.x0[c] } else { b.yf[c - n] };
            }
        }
    }
    z
}

pub struct Minimum {
    pub z: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub action: f64,
    pub iterations: usize,
}

/// Damped Newton iteration on the free variables.
pub fn minimize_action(sys: &BridgeSystem, b: &BridgeBoundary, steps: usize, opts: &NewtonOptions) -> Result<Minimum> {
    let layout = FreeLayout::new(b.half(), steps)?;
    if layout.dim() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: layout.dim() });
    }
    let mut z = initial_guess(b, &layout);
    let mut s = action_free(sys, b, &layout, z.as_slice())?;
    let mut g = gradient_free(sys, b, &layout, z.as_slice())?;
    let mut damping = 0.0;
    for iter in 0..opts.max_iter {
        if g.norm() < opts.gradient_tol {
            let hessian = action_hessian(sys, b, &layout, z.as_slice())?;
            return Ok(Minimum { z, hessian, action: s, iterations: iter });
        }
        let hess = action_hessian(sys, b, &layout, z.as_slice())?;
        let scale = hess.diagonal().amax().max(1.0);
        let step = loop {
            let shifted = &hess + DMatrix::identity(hess.nrows(), hess.ncols()) * (damping * scale);
            match shifted.cholesky() {
                Some(ch) => break ch.solve(&(-&g)),
                None => damping = if damping == 0.0 { 1e-8 } else { damping * 10.0 },
            }
            if damping > 1e6 {
                return Err(Error::Optimization { iterations: iter, gradient_norm: g.norm(), last: z.as_slice().to_vec() });
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let trial = &z + &step * t;
            let st = action_free(sys, b, &layout, trial.as_slice())?;
            let gt = gradient_free(sys, b, &layout, trial.as_slice())?;
            if st <= s + 1e-12 * s.abs().max(1.0) || gt.norm() < g.norm() {
                z = trial;
                s = st;
                g = gt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Optimization { iterations: iter, gradient_norm: g.norm(), last: z.as_slice().to_vec() });
        }
        damping = if t == 1.0 { damping / 10.0 } else { damping };
        if damping < 1e-12 {
            damping = 0.0;
        }
    }
    if g.norm() < opts.gradient_tol {
        let hessian = action_hessian(sys, b, &layout, z.as_slice())?;
        return Ok(Minimum { z, hessian, action: s, iterations: opts.max_iter });
    }
    Err(Error::Optimization { iterations: opts.max_iter, gradient_norm: g.norm(), last: z.as_slice().to_vec() })
}

pub fn most_probable_path(sys: &BridgeSystem, b: &BridgeBoundary, steps: usize) -> Result<DiscretePath> {
    let min = minimize_action(sys, b, steps, &NewtonOptions::default())?;
    Ok(FreeLayout::new(b.half(), steps)?.to_path(b, min.z.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::gaussian::gaussian_bridge_exact;
    use nalgebra::DMatrix;

    #[test]
    fn zero_drift_minimizer_is_constant_in_each_block() {
        let sys = BridgeSystem::affine(DMatrix::zeros(2, 2), DVector::zeros(2), 0.5).unwrap();
        let b = BridgeBoundary::new(0.0, 1.0, vec![0.4], vec![-0.7]).unwrap();
        let path = most_probable_path(&sys, &b, 32).unwrap();
        for k in 0..=32 {
            assert!((path.at(k)[0] - 0.4).abs() < 1e-10);
            assert!((path.at(k)[1] + 0.7).abs() < 1e-10);
        }
    }

    #[test]
    fn affine_minimizer_is_gaussian_mean() {
        let m = DMatrix::from_row_slice(2, 2, &[-0.4, 0.3, -0.2, 0.6]);
        let sys = BridgeSystem::affine(m, DVector::from_vec(vec![0.1, -0.2]), 0.5).unwrap();
        let b = BridgeBoundary::new(0.0, 1.5, vec![1.0], vec![-0.5]).unwrap();
        let min = minimize_action(&sys, &b, 64, &NewtonOptions::default()).unwrap();
        let exact = gaussian_bridge_exact(&sys, &b, 64).unwrap();
        assert!((&min.z - &exact.mean).amax() < 1e-9);
    }
}
