//! Drift-only (classical) transport of a Q-function by a semi-Lagrangian
//! scheme: grid points are carried back along characteristics and the
//! initial field is interpolated at their feet.

use crate::error::{Error, Result};
use crate::grid::interpolate_cubic;
use crate::husimi::field::QField;
use crate::symbol::{drift_field, ComplexPolynomial, DriftField};

#[derive(Clone, Copy, Debug)]
pub struct LiouvilleOptions {
    /// Largest admissible `max|A| Δt / h`.
    pub max_courant: f64,
    pub tol_norm: f64,
}

impl Default for LiouvilleOptions {
    fn default() -> Self {
        Self { max_courant: 5.0, tol_norm: 1e-3 }
    }
}

fn rk4_back(field: &DriftField, p: &[f64], dt: f64) -> Vec<f64> {
    let f = |q: &[f64]| field.eval(q);
    let add = |a: &[f64], k: &nalgebra::DVector<f64>, s: f64| -> Vec<f64> {
        a.iter().zip(k.iter()).map(|(x, v)| x + s * v).collect()
    };
    let h = -dt;
    let k1 = f(p);
    let k2 = f(&add(p, &k1, h / 2.0));
    let k3 = f(&add(p, &k2, h / 2.0));
    let k4 = f(&add(p, &k3, h));
    p.iter()
        .enumerate()
        .map(|(i, x)| x + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Evolves `q` by the drift of `h` alone for time `t` in `steps` equal steps.
///
/// The drift of a real symbol is divergence-free, so densities are constant
/// along characteristics.
pub fn liouville_evolve(q: &QField, h: &ComplexPolynomial, t: f64, steps: usize, opts: &LiouvilleOptions) -> Result<QField> {
    if h.num_modes() != q.num_modes() {
        return Err(Error::Dimension { expected: q.num_modes(), got: h.num_modes() });
    }
    if steps == 0 {
        return Err(Error::InvalidGrid("at least one time step is required".into()));
    }
    let field = drift_field(h)?;
    let grid = q.grid().clone();
    let dt = t / steps as f64;
    let hmin = grid.axes().iter().map(|a| a.h).fold(f64::INFINITY, f64::min);
    let speeds = grid.map(|p| field.eval(p).amax());
    let vmax = speeds.iter().copied().fold(0.0, f64::max);
    let courant = vmax * dt.abs() / hmin;
    if courant > opts.max_courant {
        return Err(Error::Cfl { courant, limit: opts.max_courant });
    }
    // The density is constant along characteristics, so each grid point is
    // traced back over the whole interval and the initial field interpolated
    // once; repeated interpolation would accumulate smoothing and mass error.
    let values: Vec<f64> = {
        use rayon::prelude::*;
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut p = grid.point(i);
                for _ in 0..steps {
                    p = rk4_back(&field, &p, dt);
                }
                interpolate_cubic(&grid, q.values(), &p)
            })
            .collect()
    };
    let mut values = values;
    // cubic interpolation can undershoot by ~1e-9 in the far tails
    for v in &mut values {
        *v = v.max(0.0);
    }
    QField::with_tolerance(grid, values, q.time() + t, opts.tol_norm)
}
