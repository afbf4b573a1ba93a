//! Gaussian kernel density estimation on a grid: linear binning followed by
//! a separable convolution.

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;

#[derive(Clone, Debug, PartialEq)]
pub enum Bandwidth {
    /// Normal-reference rule per coordinate.
    Silverman,
    /// Normal-reference rule times a factor.
    SilvermanScaled(f64),
    /// One bandwidth per coordinate.
    Fixed(Vec<f64>),
}

/// Kernels are cut at this many bandwidths.
const KERNEL_RADIUS: f64 = 5.0;

/// Normal-reference bandwidth `σ_j (4 / ((d + 2) n))^{1/(d+4)}`, which is
/// Silverman's rule in one dimension.
pub fn normal_reference_bandwidth(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = samples.len();
    let d = samples.first().map_or(0, Vec::len);
    if n < 2 || d == 0 {
        return Err(Error::BandwidthRequired(format!("{n} samples are too few for a bandwidth rule")));
    }
    let factor = (4.0 / ((d as f64 + 2.0) * n as f64)).powf(1.0 / (d as f64 + 4.0));
    (0..d)
        .map(|j| {
            let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let sd = crate::stats::variance(&col).sqrt();
            let h = sd * factor;
            // spread at rounding level counts as none
            if h.is_finite() && sd > 1e-12 * (1.0 + crate::stats::mean(&col).abs()) {
                Ok(h)
            } else {
                Err(Error::BandwidthRequired(format!("coordinate {j} has zero spread; pass an explicit bandwidth")))
            }
        })
        .collect()
}

/// Density of `samples` on `grid` (integrates to one up to the mass that
/// falls outside). Returns the values and the bandwidths used.
pub fn kde(grid: &PhaseGrid, samples: &[Vec<f64>], bandwidth: &Bandwidth) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = grid.dims();
    if let Some(s) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::Dimension { expected: d, got: s.len() });
    }
    let h = match bandwidth {
        Bandwidth::Silverman => normal_reference_bandwidth(samples)?,
        Bandwidth::SilvermanScaled(f) => {
            if !(f.is_finite() && *f > 0.0) {
                return Err(Error::BandwidthRequired(format!("bandwidth factor {f} must be positive")));
            }
            normal_reference_bandwidth(samples)?.into_iter().map(|h| h * f).collect()
        }
        Bandwidth::Fixed(h) => {
            if h.len() != d || h.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::BandwidthRequired(format!("need {d} positive bandwidths, got {h:?}")));
            }
            h.clone()
        }
    };
    for (j, (hj, a)) in h.iter().zip(grid.axes()).enumerate() {
        if *hj < a.h {
            log::warn!("bandwidth {hj:.3e} on axis {j} is below the grid spacing {:.3e}", a.h);
        }
    }
    let mut counts = bin_linear(grid, samples);
    for (axis, hj) in h.iter().enumerate() {
        counts = convolve_axis(grid, &counts, axis, *hj);
    }
    let norm = 1.0 / (samples.len() as f64 * grid.cell_volume());
    counts.iter_mut().for_each(|v| *v *= norm);
    Ok((counts, h))
}

/// Spreads each sample over the `2^d` surrounding nodes with multilinear
/// weights; samples outside the grid are dropped.
fn bin_linear(grid: &PhaseGrid, samples: &[Vec<f64>]) -> Vec<f64> {
    let d = grid.dims();
    let mut out = vec![0.0; grid.len()];
    let mut dropped = 0usize;
    'samples: for s in samples {
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let a = grid.axis(k);
            let u = (s[k] - a.min) / a.h;
            if !(u >= 0.0 && u <= (a.n - 1) as f64) {
                dropped += 1;
                continue 'samples;
            }
            let i = (u.floor() as usize).min(a.n - 2);
            base[k] = i;
            frac[k] = u - i as f64;
        }
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..d {
                let up = (corner >> k) & 1;
                w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
                flat += (base[k] + up) * grid.stride(k);
            }
            out[flat] += w;
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} of {} samples fall outside the density grid", samples.len());
    }
    out
}

/// Separable Gaussian smoothing with the same discrete kernel as [`kde`],
/// used to bring a reference density to the resolution of an estimate.
pub fn gaussian_smooth(grid: &PhaseGrid, values: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    for (axis, hj) in h.iter().enumerate() {
        out = convolve_axis(grid, &out, axis, *hj);
    }
    out
}

fn convolve_axis(grid: &PhaseGrid, values: &[f64], axis: usize, h: f64) -> Vec<f64> {
    use rayon::prelude::*;
    let a = grid.axis(axis);
    let stride = grid.stride(axis);
    let radius = ((KERNEL_RADIUS * h / a.h).ceil() as usize).max(1);
    let mut kernel: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let u = (i as f64 - radius as f64) * a.h / h;
            (-0.5 * u * u).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let n = a.n;
    (0..values.len())
        .into_par_iter()
        .map(|flat| {
            let i = (flat / stride) % n;
            let row0 = flat - i * stride;
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            (lo..=hi).map(|j| kernel[j + radius - i] * values[row0 + j * stride]).sum()
        })
        .collect()
}

/// `½ Σ |p − q| ΔV`.
pub fn total_variation(grid: &PhaseGrid, p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.cell_volume()
}
