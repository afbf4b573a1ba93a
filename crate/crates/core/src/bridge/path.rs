use nalgebra::DVector;

use crate::error::{Error, Result};

/// Mixed-time boundary data: the x-block is fixed at `t0`, the y-block at `tf`.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgeBoundary {
    pub t0: f64,
    pub tf: f64,
    pub x0: Vec<f64>,
    pub yf: Vec<f64>,
}

impl BridgeBoundary {
    pub fn new(t0: f64, tf: f64, x0: Vec<f64>, yf: Vec<f64>) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite() && t0 < tf) {
            return Err(Error::InvalidDistribution(format!("need t0 < tf, got t0={t0}, tf={tf}")));
        }
        if x0.len() != yf.len() || x0.is_empty() {
            return Err(Error::Dimension { expected: x0.len(), got: yf.len() });
        }
        Ok(Self { t0, tf, x0, yf })
    }

    pub fn half(&self) -> usize {
        self.x0.len()
    }

    pub fn dt(&self, steps: usize) -> f64 {
        (self.tf - self.t0) / steps as f64
    }
}

/// Where a path coordinate lives in the vector of free variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slot {
    Free(usize),
    Pinned(f64),
}

/// Free variables are ordered `(y(t0), φ_1, .., φ_{K-1}, x(tf))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreeLayout {
    pub half: usize,
    pub steps: usize,
}

impl FreeLayout {
    pub fn new(half: usize, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidGrid(format!("a bridge needs at least 2 time steps, got {steps}")));
        }
        Ok(Self { half, steps })
    }

    pub fn dim(&self) -> usize {
        2 * self.half
    }

    pub fn len(&self) -> usize {
        2 * self.half * self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slot(&self, b: &BridgeBoundary, step: usize, comp: usize) -> Slot {
        let n = self.half;
        if step == 0 {
            if comp < n {
                Slot::Pinned(b.x0[comp])
            } else {
                Slot::Free(comp - n)
            }
        } else if step == self.steps {
            if comp < n {
                Slot::Free(n + (step - 1) * 2 * n + comp)
            } else {
                Slot::Pinned(b.yf[comp - n])
            }
        } else {
            Slot::Free(n + (step - 1) * 2 * n + comp)
        }
    }

    pub fn free_index(&self, step: usize, comp: usize) -> Option<usize> {
        let dummy = BridgeBoundary { t0: 0.0, tf: 1.0, x0: vec![0.0; self.half], yf: vec![0.0; self.half] };
        match self.slot(&dummy, step, comp) {
            Slot::Free(i) => Some(i),
            Slot::Pinned(_) => None,
        }
    }

    pub fn to_path(&self, b: &BridgeBoundary, z: &[f64]) -> DiscretePath {
        let dim = self.dim();
        let mut values = vec![0.0; (self.steps + 1) * dim];
        for k in 0..=self.steps {
            for c in 0..dim {
                values[k * dim + c] = match self.slot(b, k, c) {
                    Slot::Free(i) => z[i],
                    Slot::Pinned(v) => v,
                };
            }
        }
        DiscretePath { t0: b.t0, dt: b.dt(self.steps), dim, values }
    }

    pub fn from_path(&self, b: &BridgeBoundary, path: &DiscretePath) -> DVector<f64> {
        let mut z = DVector::zeros(self.len());
        for k in 0..=self.steps {
            for c in 0..self.dim() {
                if let Slot::Free(i) = self.slot(b, k, c) {
                    z[i] = path.at(k)[c];
                }
            }
        }
        z
    }
}

/// Configurations on a uniform time grid, stored row-major by time.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    pub t0: f64,
    pub dt: f64,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl DiscretePath {
    pub fn new(t0: f64, dt: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || dim == 0 || values.len() % dim != 0 || values.len() < 2 * dim {
            return Err(Error::InvalidGrid(format!(
                "path needs dt > 0 and at least two configurations of size {dim}, got dt={dt}, {} values",
                values.len()
            )));
        }
        Ok(Self { t0, dt, dim, values })
    }

    pub fn steps(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| self.time(k)).collect()
    }

    /// Whether the path satisfies the boundary's pinned blocks bit for bit.
    pub fn honours(&self, b: &BridgeBoundary) -> bool {
        let n = b.half();
        self.at(0)[..n] == b.x0[..] && self.at(self.steps())[n..] == b.yf[..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trip() {
        let b = BridgeBoundary::new(0.0, 1.0, vec![0.5], vec![-0.25]).unwrap();
        let layout = FreeLayout::new(1, 4).unwrap();
        let z: Vec<f64> = (0..layout.len()).map(|i| i as f64).collect();
        let path = layout.to_path(&b, &z);
        assert!(path.honours(&b));
        assert_eq!(path.at(0), &[0.5, 0.0]);
        assert_eq!(path.at(4), &[7.0, -0.25]);
        assert_eq!(layout.from_path(&b, &path).as_slice(), &z[..]);
        assert_eq!(layout.free_index(0, 0), None);
        assert_eq!(layout.free_index(2, 1), Some(4));
    }
}
