//! Distributions over the boundary data `φ_IN = (x0, yf)` as weighted atom
//! lists.

use nalgebra::DMatrix;

use crate::bridge::BridgeBoundary;
use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryAtom {
    pub x0: Vec<f64>,
    pub yf: Vec<f64>,
    pub weight: f64,
}

impl BoundaryAtom {
    pub fn new(x0: Vec<f64>, yf: Vec<f64>, weight: f64) -> Self {
        Self { x0, yf, weight }
    }

    pub fn boundary(&self, t0: f64, tf: f64) -> Result<BridgeBoundary> {
        BridgeBoundary::new(t0, tf, self.x0.clone(), self.yf.clone())
    }

    /// Seed offset that depends only on the atom's location, so the same
    /// atom draws the same paths inside any mixture.
    pub fn seed_key(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.x0.iter().chain(&self.yf) {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDistribution {
    atoms: Vec<BoundaryAtom>,
}

impl BoundaryDistribution {
    pub fn new(atoms: Vec<BoundaryAtom>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| Error::InvalidDistribution("no atoms".into()))?;
        let n = first.x0.len();
        if n == 0 {
            return Err(Error::InvalidDistribution("atoms need at least one mode".into()));
        }
        for a in &atoms {
            if a.x0.len() != n || a.yf.len() != n {
                return Err(Error::Dimension { expected: n, got: a.x0.len().max(a.yf.len()) });
            }
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::InvalidDistribution(format!("weight {} is not a nonnegative number", a.weight)));
            }
            if a.x0.iter().chain(&a.yf).any(|v| !v.is_finite()) {
                return Err(Error::InvalidDistribution("atom location is not finite".into()));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn single(x0: Vec<f64>, yf: Vec<f64>) -> Result<Self> {
        Self::new(vec![BoundaryAtom::new(x0, yf, 1.0)])
    }

    /// Tensor Gauss–Hermite quadrature of a product normal law over
    /// `(x0, yf)` with `points` nodes per coordinate.
    pub fn gaussian(mean_x0: &[f64], mean_yf: &[f64], std: &[f64], points: usize) -> Result<Self> {
        let n = mean_x0.len();
        if mean_yf.len() != n || std.len() != 2 * n {
            return Err(Error::Dimension { expected: 2 * n, got: std.len() });
        }
        if std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidDistribution("standard deviations must be nonnegative".into()));
        }
        let (nodes, weights) = gauss_hermite(points)?;
        let dims = 2 * n;
        let mean: Vec<f64> = mean_x0.iter().chain(mean_yf).copied().collect();
        let total = points.pow(dims as u32);
        let mut atoms = Vec::with_capacity(total);
        for combo in 0..total {
            let mut c = combo;
            let mut w = 1.0;
            let mut loc = vec![0.0; dims];
            for k in 0..dims {
                let j = c % points;
                c /= points;
                w *= weights[j];
                loc[k] = mean[k] + std[k] * nodes[j];
            }
            atoms.push(BoundaryAtom::new(loc[..n].to_vec(), loc[n..].to_vec(), w));
        }
        let sum: f64 = atoms.iter().map(|a| a.weight).sum();
        atoms.iter_mut().for_each(|a| a.weight /= sum);
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[BoundaryAtom] {
        &self.atoms
    }

    pub fn num_modes(&self) -> usize {
        self.atoms[0].x0.len()
    }

    /// Weights multiplied by `factor` without renormalizing; for negative
    /// controls only.
    pub fn scaled_weights(&self, factor: f64) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight * factor).collect()
    }

    /// Convex combination `λ self + (1 − λ) other`.
    pub fn combine(&self, other: &Self, lambda: f64) -> Result<Self> {
        let mut atoms: Vec<BoundaryAtom> =
            self.atoms.iter().map(|a| BoundaryAtom { weight: a.weight * lambda, ..a.clone() }).collect();
        atoms.extend(other.atoms.iter().map(|a| BoundaryAtom { weight: a.weight * (1.0 - lambda), ..a.clone() }));
        let sum: f64 = atoms.iter().map(|a| a.weight).sum();
        atoms.iter_mut().for_each(|a| a.weight /= sum);
        Self::new(atoms)
    }
}

/// Nodes and weights for `∫ f(u) N(u; 0, 1) du` by the Golub–Welsch
/// eigenvalue method.
pub fn gauss_hermite(points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if points == 0 {
        return Err(Error::InvalidDistribution("quadrature needs at least one node".into()));
    }
    let mut j = DMatrix::<f64>::zeros(points, points);
    for k in 1..points {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> =
        (0..points).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}
