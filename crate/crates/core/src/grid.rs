//! Uniform rectangular grids over real phase-space coordinates and the
//! finite-difference stencils used on them.
//!
//! Values are stored row-major with the first axis slowest.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

pub const MIN_POINTS_PER_AXIS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub h: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, h: f64, n: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) || !min.is_finite() {
            return Err(Error::InvalidGrid(format!("axis needs finite min and positive spacing, got min={min}, h={h}")));
        }
        if n < MIN_POINTS_PER_AXIS {
            return Err(Error::InvalidGrid(format!("axis needs at least {MIN_POINTS_PER_AXIS} points, got {n}")));
        }
        Ok(Self { min, h, n })
    }

    /// Axis covering `[min, max]` with spacing as close to `h` as the
    /// integer point count allows.
    pub fn span(min: f64, max: f64, h: f64) -> Result<Self> {
        if !(max > min) {
            return Err(Error::InvalidGrid(format!("empty range [{min}, {max}]")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        let cells = ((max - min) / h).round().max(1.0) as usize;
        Self::new(min, (max - min) / cells as f64, cells + 1)
    }

    pub fn max(&self) -> f64 {
        self.min + self.h * (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + self.h * i as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
}

impl PhaseGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].n;
        }
        Ok(Self { axes, strides })
    }

    /// Same range and spacing on every axis.
    pub fn uniform(dims: usize, min: f64, max: f64, h: f64) -> Result<Self> {
        let axis = Axis::span(min, max, h)?;
        Self::new(vec![axis; dims])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    /// Product of spacings.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.h).product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        for k in 0..self.dims() {
            idx[k] = flat / self.strides[k];
            flat %= self.strides[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dims()];
        self.point_into(flat, &mut p);
        p
    }

    pub fn point_into(&self, mut flat: usize, out: &mut [f64]) {
        for k in 0..self.dims() {
            let i = flat / self.strides[k];
            flat %= self.strides[k];
            out[k] = self.axes[k].coord(i);
        }
    }

    pub fn map<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.len())
            .into_par_iter()
            .map_init(|| vec![0.0; self.dims()], |buf, i| {
                self.point_into(i, buf);
                f(buf)
            })
            .collect()
    }

    pub fn map_complex<F: Fn(&[f64]) -> num_complex::Complex64 + Sync>(&self, f: F) -> Vec<num_complex::Complex64> {
        use rayon::prelude::*;
        (0..self.len())
            .into_par_iter()
            .map_init(|| vec![0.0; self.dims()], |buf, i| {
                self.point_into(i, buf);
                f(buf)
            })
            .collect()
    }

    /// True for points at least `margin` cells away from every face.
    pub fn interior_mask(&self, margin: usize) -> Vec<bool> {
        (0..self.len())
            .map(|flat| {
                self.multi_index(flat)
                    .iter()
                    .zip(&self.axes)
                    .all(|(&i, a)| i >= margin && i + margin < a.n)
            })
            .collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.axes).all(|(x, a)| *x >= a.min && *x <= a.max())
    }

    /// Same axes with spacing halved (point count `2n - 1`).
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.axes.iter().map(|a| Axis { min: a.min, h: a.h / 2.0, n: 2 * a.n - 1 }).collect())
    }
}

/// Central first derivative along `axis`: fourth order in the interior,
/// second order in the two outermost cells of each face.
pub fn first_derivative<T>(grid: &PhaseGrid, values: &[T], axis: usize) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> + Send + Sync,
{
    use rayon::prelude::*;
    assert_eq!(values.len(), grid.len(), "field does not match grid");
    let a = grid.axes[axis];
    let n = a.n;
    let s = grid.strides[axis];
    let h = a.h;
    let c4 = 1.0 / (12.0 * h);
    let c2 = 1.0 / (2.0 * h);
    let mut out = vec![T::default(); values.len()];
    out.par_iter_mut().enumerate().for_each(|(flat, o)| {
        let i = (flat / s) % n;
        let f = |k: isize| values[(flat as isize + k * s as isize) as usize];
        *o = if i >= 2 && i + 2 < n {
            (f(-2) - f(2) + (f(1) - f(-1)) * 8.0) * c4
        } else if i >= 1 && i + 1 < n {
            (f(1) - f(-1)) * c2
        } else if i == 0 {
            (f(1) * 4.0 - f(0) * 3.0 - f(2)) * c2
        } else {
            (f(0) * 3.0 - f(-1) * 4.0 + f(-2)) * c2
        };
    });
    out
}

/// Sum of `values` times the cell volume.
pub fn integrate(grid: &PhaseGrid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}

/// Cubic (four-point Lagrange) interpolation, falling back to zero outside
/// the grid. Used by the semi-Lagrangian transport and by slice resampling.
pub fn interpolate_cubic(grid: &PhaseGrid, values: &[f64], p: &[f64]) -> f64 {
    let d = grid.dims();
    let mut base = vec![0usize; d];
    let mut weights = vec![[0.0f64; 4]; d];
    for k in 0..d {
        let a = grid.axes[k];
        let mut u = (p[k] - a.min) / a.h;
        let top = (a.n - 1) as f64;
        if !(u >= -1e-6 && u <= top + 1e-6) {
            return 0.0;
        }
        u = u.clamp(0.0, top);
        let i = (u.floor() as usize).clamp(1, a.n - 3);
        let t = u - i as f64;
        base[k] = i - 1;
        // nodes at -1, 0, 1, 2 relative to i
        weights[k] = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
    }
    let total = 4usize.pow(d as u32);
    let mut acc = 0.0;
    for combo in 0..total {
        let mut c = combo;
        let mut w = 1.0;
        let mut flat = 0;
        for k in (0..d).rev() {
            let j = c % 4;
            c /= 4;
            w *= weights[k][j];
            flat += (base[k] + j) * grid.strides[k];
        }
        acc += w * values[flat];
    }
    acc
}
