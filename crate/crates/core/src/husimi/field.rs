use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::symbol::{alpha_from_phi, ComplexPolynomial};

pub const NEGATIVITY_TOL: f64 = 1e-9;
pub const DEFAULT_NORM_TOL: f64 = 1e-3;

/// Husimi density on a grid over standard coordinates `(x_1..x_N, y_1..y_N)`.
///
/// Values are densities with respect to `d²α = Π dx dy / 2`, so the vacuum
/// has value `1/π^N` at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct QField {
    grid: PhaseGrid,
    values: Vec<f64>,
    time: f64,
}

/// Quadrature weight of one grid cell for α-densities.
pub fn alpha_cell_measure(grid: &PhaseGrid) -> f64 {
    grid.cell_volume() / 2f64.powi((grid.dims() / 2) as i32)
}

impl QField {
    pub fn new(grid: PhaseGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        Self::with_tolerance(grid, values, time, DEFAULT_NORM_TOL)
    }

    pub fn with_tolerance(grid: PhaseGrid, values: Vec<f64>, time: f64, tol_norm: f64) -> Result<Self> {
        if grid.dims() % 2 != 0 {
            return Err(Error::InvalidGrid(format!("phase-space grid needs an even number of axes, got {}", grid.dims())));
        }
        if values.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < -NEGATIVITY_TOL) {
            return Err(Error::InvalidField(format!("value {v} is negative or not finite")));
        }
        let field = Self { grid, values, time };
        let norm = field.norm();
        if (norm - 1.0).abs() > tol_norm {
            return Err(Error::InvalidField(format!("grid integral {norm} is outside 1 ± {tol_norm}")));
        }
        Ok(field)
    }

    /// Samples `f(α)` on the grid.
    pub fn from_fn<F>(grid: PhaseGrid, time: f64, f: F) -> Result<Self>
    where
        F: Fn(&[Complex64]) -> f64 + Sync,
    {
        let values = grid.map(|p| f(&alpha_from_phi(p)));
        Self::new(grid, values, time)
    }

    /// Coherent-state density `exp(-|α-β|²)/π^N`.
    pub fn coherent(grid: PhaseGrid, beta: &[Complex64], time: f64) -> Result<Self> {
        let n = beta.len();
        if grid.dims() != 2 * n {
            return Err(Error::Dimension { expected: grid.dims(), got: 2 * n });
        }
        Self::from_fn(grid, time, |alpha| {
            let r2: f64 = alpha.iter().zip(beta).map(|(a, b)| (a - b).norm_sqr()).sum();
            (-r2).exp() / PI.powi(n as i32)
        })
    }

    pub fn num_modes(&self) -> usize {
        self.grid.dims() / 2
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().sum::<f64>() * alpha_cell_measure(&self.grid)
    }

    /// CSV with columns `x1..xN,y1..yN,Q`.
    pub fn to_csv(&self) -> String {
        let n = self.num_modes();
        let mut s = String::new();
        let header: Vec<String> =
            (1..=n).map(|i| format!("x{i}")).chain((1..=n).map(|i| format!("y{i}"))).chain(["Q".to_string()]).collect();
        let _ = writeln!(s, "{}", header.join(","));
        for (i, v) in self.values.iter().enumerate() {
            for c in self.grid.point(i) {
                let _ = write!(s, "{c},");
            }
            let _ = writeln!(s, "{v}");
        }
        s
    }
}

/// Grid quadrature of `A_aW · Q`.
pub fn expectation(a: &ComplexPolynomial, q: &QField) -> Result<f64> {
    a.require_hermitian()?;
    if a.num_modes() != q.num_modes() {
        return Err(Error::Dimension { expected: q.num_modes(), got: a.num_modes() });
    }
    let grid = q.grid();
    let edge: f64 = edge_mass(q);
    if edge > 1e-6 {
        log::warn!("Q carries mass {edge:.2e} on the grid boundary; expectation may be truncated");
    }
    let symbol = grid.map(|p| a.evaluate_real(p).map(|z| z.re).unwrap_or(f64::NAN));
    Ok(symbol.iter().zip(q.values()).map(|(s, v)| s * v).sum::<f64>() * alpha_cell_measure(grid))
}

fn edge_mass(q: &QField) -> f64 {
    let mask = q.grid().interior_mask(1);
    q.values().iter().zip(&mask).filter(|(_, m)| !**m).map(|(v, _)| v.abs()).sum::<f64>() * alpha_cell_measure(q.grid())
}
