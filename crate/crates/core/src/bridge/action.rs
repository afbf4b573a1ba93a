//! Discretized Onsager–Machlup action with midpoint evaluation:
//! `S = Σ Δt [ |Δφ/Δt − A(φ_mid)|² / (2d) − V(φ_mid) ]`, `V = −½ ∇·A`.

use nalgebra::DVector;

use crate::bridge::path::{BridgeBoundary, DiscretePath, FreeLayout};
use crate::drift::BridgeSystem;
use crate::error::{Error, Result};

fn check(sys: &BridgeSystem, path: &DiscretePath) -> Result<()> {
    if path.dim != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: path.dim });
    }
    Ok(())
}

fn segment(sys: &BridgeSystem, a: &[f64], b: &[f64], dt: f64) -> f64 {
    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    let drift = sys.drift.eval(&mid);
    let r2: f64 = (0..a.len()).map(|i| ((b[i] - a[i]) / dt - drift[i]).powi(2)).sum();
    let v = -0.5 * sys.drift.divergence(&mid);
    dt * (r2 / (2.0 * sys.d) - v)
}

/// Action of the segments `from..to` (segment `k` joins times `k` and `k+1`).
pub fn om_action_range(path: &DiscretePath, sys: &BridgeSystem, from: usize, to: usize) -> Result<f64> {
    check(sys, path)?;
    if from > to || to > path.steps() {
        return Err(Error::InvalidGrid(format!("segment range {from}..{to} outside 0..{}", path.steps())));
    }
    Ok((from..to).map(|k| segment(sys, path.at(k), path.at(k + 1), path.dt)).sum())
}

pub fn om_action(path: &DiscretePath, sys: &BridgeSystem) -> Result<f64> {
    om_action_range(path, sys, 0, path.steps())
}

/// Gradient of the action with respect to every configuration of the path.
pub fn om_gradient_path(path: &DiscretePath, sys: &BridgeSystem) -> Result<Vec<f64>> {
    check(sys, path)?;
    let dim = path.dim;
    let dt = path.dt;
    let d = sys.d;
    let mut grad = vec![0.0; path.values.len()];
    for k in 0..path.steps() {
        let (a, b) = (path.at(k), path.at(k + 1));
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let drift = sys.drift.eval(&mid);
        let jac = sys.drift.jacobian(&mid);
        let r = DVector::from_fn(dim, |i, _| (b[i] - a[i]) / dt - drift[i]);
        let jr = jac.tr_mul(&r);
        // ∇V = −½ ∇(∇·A)
        let grad_v = sys.drift.divergence_gradient(&mid) * -0.5;
        for i in 0..dim {
            let shared = -dt / (2.0 * d) * jr[i] - 0.5 * dt * grad_v[i];
            grad[k * dim + i] += -r[i] / d + shared;
            grad[(k + 1) * dim + i] += r[i] / d + shared;
        }
    }
    Ok(grad)
}

/// Action as a function of the free variables.
pub fn action_free(sys: &BridgeSystem, b: &BridgeBoundary, layout: &FreeLayout, z: &[f64]) -> Result<f64> {
    om_action(&layout.to_path(b, z), sys)
}

pub fn gradient_free(sys: &BridgeSystem, b: &BridgeBoundary, layout: &FreeLayout, z: &[f64]) -> Result<DVector<f64>> {
    let path = layout.to_path(b, z);
    let full = om_gradient_path(&path, sys)?;
    let mut g = DVector::zeros(layout.len());
    for k in 0..=layout.steps {
        for c in 0..layout.dim() {
            if let Some(i) = layout.free_index(k, c) {
                g[i] = full[k * layout.dim() + c];
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{AffineDrift, CubicDrift};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn zero_system(d: f64) -> BridgeSystem {
        BridgeSystem::new(Arc::new(AffineDrift::zero(2)), d).unwrap()
    }

    #[test]
    fn constant_path_has_zero_action() {
        let path = DiscretePath::new(0.0, 0.1, 2, [0.3, -0.2].repeat(11)).unwrap();
        assert_eq!(om_action(&path, &zero_system(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn straight_path_action() {
        let (v, t, d) = (0.7, 2.0, 0.4);
        let steps = 16;
        let dt = t / steps as f64;
        let values: Vec<f64> = (0..=steps).flat_map(|k| [v * k as f64 * dt, -v * k as f64 * dt]).collect();
        let path = DiscretePath::new(0.0, dt, 2, values).unwrap();
        // both coordinates move with speed v
        let expected = t * 2.0 * v * v / (2.0 * d);
        assert!((om_action(&path, &zero_system(d)).unwrap() - expected).abs() < 1e-12);
    }

    fn cubic_system() -> BridgeSystem {
        let base = AffineDrift::new(
            DMatrix::from_row_slice(4, 4, &[-0.3, 0.1, 0.2, 0.0, 0.0, -0.2, 0.0, 0.3, 0.1, 0.0, 0.4, 0.0, -0.3, 0.2, 0.0, 0.1]),
            DVector::from_vec(vec![0.1, 0.0, -0.1, 0.2]),
        )
        .unwrap();
        let drift = CubicDrift::new(base, 0.05, DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0])).unwrap();
        BridgeSystem::new(Arc::new(drift), 0.3).unwrap()
    }

    proptest! {
        #[test]
        fn action_is_additive(values in prop::collection::vec(-2.0f64..2.0, 4 * 13), split in 1usize..12) {
            let path = DiscretePath::new(0.0, 0.05, 4, values).unwrap();
            let sys = cubic_system();
            let whole = om_action(&path, &sys).unwrap();
            let parts = om_action_range(&path, &sys, 0, split).unwrap() + om_action_range(&path, &sys, split, 12).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1.0));
        }

        #[test]
        fn gradient_matches_finite_differences(values in prop::collection::vec(-1.5f64..1.5, 4 * 9)) {
            let path = DiscretePath::new(0.0, 0.1, 4, values.clone()).unwrap();
            let sys = cubic_system();
            let grad = om_gradient_path(&path, &sys).unwrap();
            let h = 1e-6;
            for i in 0..values.len() {
                let mut up = values.clone();
                up[i] += h;
                let mut dn = values.clone();
                dn[i] -= h;
                let fd = (om_action(&DiscretePath::new(0.0, 0.1, 4, up).unwrap(), &sys).unwrap()
                    - om_action(&DiscretePath::new(0.0, 0.1, 4, dn).unwrap(), &sys).unwrap()) / (2.0 * h);
                prop_assert!((fd - grad[i]).abs() <= 1e-6 * fd.abs().max(1.0), "{} vs {}", fd, grad[i]);
            }
        }
    }
}
