//! Right-hand sides of the Husimi evolution: the full series and its
//! second-order (Fokker–Planck) truncation, by finite differences.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{first_derivative, PhaseGrid};
use crate::husimi::field::QField;
use crate::symbol::{diffusion_matrix, drift_field, ComplexPolynomial};

/// Highest series order the stencils are trusted for.
pub const MAX_SERIES_ORDER: usize = 6;

fn check_modes(q: &QField, h: &ComplexPolynomial) -> Result<()> {
    if q.num_modes() != h.num_modes() {
        return Err(Error::Dimension { expected: q.num_modes(), got: h.num_modes() });
    }
    Ok(())
}

/// All multi-indices over `n` modes with total order in `lo..=hi`.
fn multi_indices(n: usize, lo: usize, hi: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(k: usize, left: usize, lo: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == cur.len() {
            let total: u32 = cur.iter().sum();
            if total as usize >= lo {
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=left {
            cur[k] = v as u32;
            rec(k + 1, left - v, lo, cur, out);
        }
        cur[k] = 0;
    }
    rec(0, hi, lo.max(1), &mut cur, &mut out);
    out
}

/// `∂_{α_mode} f = (∂_x − i ∂_y) f / √2` on a complex field.
fn d_alpha(grid: &PhaseGrid, f: &[Complex64], mode: usize) -> Vec<Complex64> {
    let n = grid.dims() / 2;
    let dx = first_derivative(grid, f, mode);
    let dy = first_derivative(grid, f, n + mode);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    dx.iter().zip(&dy).map(|(a, b)| (a - Complex64::i() * b) * s).collect()
}

/// Contribution of the series terms with `lo ≤ |m| ≤ hi` to `∂_t Q`:
/// `(i/ħ) Σ ħ^|m|/m! [∂^m(∂̄^m H · Q) − ∂̄^m(∂^m H · Q)]`.
pub fn series_terms(q: &QField, h: &ComplexPolynomial, lo: usize, hi: usize) -> Result<Vec<f64>> {
    check_modes(q, h)?;
    if hi > MAX_SERIES_ORDER {
        return Err(Error::UnsupportedOrder { requested: hi, max: MAX_SERIES_ORDER });
    }
    let grid = q.grid();
    let hbar = h.hbar();
    let mut total = vec![0.0; grid.len()];
    for m in multi_indices(h.num_modes(), lo, hi) {
        let g = h.derivative(&m, true)?;
        if g.is_zero() {
            continue;
        }
        let order: u32 = m.iter().sum();
        let factorial: f64 = m.iter().map(|&k| (1..=k).map(f64::from).product::<f64>()).product();
        let coeff = hbar.powi(order as i32) / factorial;
        let mut f: Vec<Complex64> = grid
            .map_complex(|p| g.evaluate_real(p).expect("dimension checked"))
            .into_iter()
            .zip(q.values())
            .map(|(gv, qv)| gv * *qv)
            .collect();
        for (mode, &k) in m.iter().enumerate() {
            for _ in 0..k {
                f = d_alpha(grid, &f, mode);
            }
        }
        // the bracket is 2i·Im of the first term since H and Q are real
        let scale = -2.0 * coeff / hbar;
        for (t, v) in total.iter_mut().zip(&f) {
            *t += scale * v.im;
        }
    }
    Ok(total)
}

/// `∂_t Q` from the series truncated at order `max_order`.
pub fn series_rhs(q: &QField, h: &ComplexPolynomial, max_order: usize) -> Result<Vec<f64>> {
    if max_order == 0 {
        return Err(Error::UnsupportedOrder { requested: 0, max: MAX_SERIES_ORDER });
    }
    series_terms(q, h, 1, max_order)
}

/// Drift and diffusion contributions to a Fokker–Planck right-hand side
/// `−Σ ∂_a(A_a ρ) + ½ Σ ∂_a ∂_b(D_ab ρ)` on an arbitrary grid.
pub struct FpeParts {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
}

impl FpeParts {
    pub fn total(&self) -> Vec<f64> {
        self.drift.iter().zip(&self.diffusion).map(|(a, b)| a + b).collect()
    }
}

/// Second derivatives are compositions of the first-derivative stencil, so
/// this operator agrees with the series form to rounding.
pub fn fokker_planck_parts<A, D>(grid: &PhaseGrid, rho: &[f64], drift: A, diffusion: D) -> Result<FpeParts>
where
    A: Fn(&[f64]) -> DVector<f64> + Sync,
    D: Fn(&[f64]) -> DMatrix<f64> + Sync,
{
    if rho.len() != grid.len() {
        return Err(Error::Dimension { expected: grid.len(), got: rho.len() });
    }
    let dim = grid.dims();
    let samples: Vec<(DVector<f64>, DMatrix<f64>)> = {
        use rayon::prelude::*;
        (0..grid.len()).into_par_iter().map(|i| {
            let p = grid.point(i);
            (drift(&p), diffusion(&p))
        }).collect()
    };
    let mut drift_part = vec![0.0; grid.len()];
    for a in 0..dim {
        let flux: Vec<f64> = samples.iter().zip(rho).map(|((v, _), r)| v[a] * r).collect();
        if flux.iter().all(|f| *f == 0.0) {
            continue;
        }
        for (t, d) in drift_part.iter_mut().zip(first_derivative(grid, &flux, a)) {
            *t -= d;
        }
    }
    let mut diff_part = vec![0.0; grid.len()];
    for a in 0..dim {
        for b in a..dim {
            let g: Vec<f64> = samples.iter().zip(rho).map(|((_, d), r)| d[(a, b)] * r).collect();
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let weight = if a == b { 0.5 } else { 1.0 };
            let inner = first_derivative(grid, &g, b);
            for (t, d) in diff_part.iter_mut().zip(first_derivative(grid, &inner, a)) {
                *t += weight * d;
            }
        }
    }
    Ok(FpeParts { drift: drift_part, diffusion: diff_part })
}

pub fn fpe_parts(q: &QField, h: &ComplexPolynomial) -> Result<FpeParts> {
    check_modes(q, h)?;
    if !h.is_fpe_admissible() {
        return Err(Error::UnsupportedHamiltonian(format!(
            "symbol has degree {} in a single variable; the second-order form needs at most 2",
            h.max_degree_per_variable()
        )));
    }
    let field = drift_field(h)?;
    fokker_planck_parts(q.grid(), q.values(), |p| field.eval(p), |p| diffusion_matrix(h, p).expect("checked"))
}

/// `∂_t Q` from the drift and traceless diffusion of `h`.
pub fn fpe_rhs(q: &QField, h: &ComplexPolynomial) -> Result<Vec<f64>> {
    Ok(fpe_parts(q, h)?.total())
}
