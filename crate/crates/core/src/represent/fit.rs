//! Least-squares fit of boundary weights on the probability simplex.

use std::fmt;

use crate::error::{Error, Result};
use crate::represent::design::DesignMatrix;
use crate::represent::target::TargetSeries;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub ridge: f64,
    /// Stop once the projected-gradient mapping is below this norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { ridge: 0.0, tol: 1e-8, max_iter: 200_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepVerdict {
    Representable,
    GapDetected,
    Inconclusive,
}

impl fmt::Display for RepVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepVerdict::Representable => "representable-within-tolerance",
            RepVerdict::GapDetected => "gap-detected",
            RepVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// Verdict from a held-out residual and the Monte Carlo floor of the design.
/// A gap also has to survive refinement, which callers check separately.
pub fn classify(residual: f64, floor: f64, converged: bool) -> RepVerdict {
    if !converged || !residual.is_finite() {
        RepVerdict::Inconclusive
    } else if residual <= 2.0 * floor {
        RepVerdict::Representable
    } else if residual > 5.0 * floor {
        RepVerdict::GapDetected
    } else {
        RepVerdict::Inconclusive
    }
}

#[derive(Clone, Debug)]
pub struct SimplexFit {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖D w − T‖² / ‖T‖²` over the fitted rows.
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct RepresentabilityReport {
    pub target: String,
    pub weights: Vec<f64>,
    pub ridge: f64,
    pub fit_times: Vec<f64>,
    pub heldout_times: Vec<f64>,
    pub residual_l2: f64,
    pub residual_linf: f64,
    pub mc_floor: Option<f64>,
    pub verdict: RepVerdict,
    pub iterations: usize,
    pub converged: bool,
    pub noise_model: String,
}

/// Euclidean projection onto `{w ≥ 0, Σ w = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        acc += uj;
        let t = (acc - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn check_alignment(design: &DesignMatrix, target: &TargetSeries) -> Result<()> {
    design.require_complete()?;
    if design.grid != target.grid {
        return Err(Error::InvalidGrid("design and target use different grids".into()));
    }
    if design.times.len() != target.times.len() || design.times.iter().zip(&target.times).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidGrid("design and target use different times".into()));
    }
    Ok(())
}

fn check_indices(design: &DesignMatrix, idx: &[usize]) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::InvalidGrid("empty time selection".into()));
    }
    match idx.iter().find(|&&i| i >= design.times.len()) {
        Some(&i) => Err(Error::Dimension { expected: design.times.len(), got: i }),
        None => Ok(()),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const POLISH_EVERY: usize = 200;

/// Primal active-set solve of `min ½wᵀQw − cᵀw` on the simplex, started
/// from a feasible `w`. Returns `None` if it runs out of iterations.
fn active_set(
    q: &nalgebra::DMatrix<f64>,
    c: &nalgebra::DVector<f64>,
    start: &nalgebra::DVector<f64>,
    max_iter: usize,
) -> Option<nalgebra::DVector<f64>> {
    let n = c.len();
    let mut w = start.map(|v| if v > 1e-14 { v } else { 0.0 });
    w /= w.sum();
    let mut free: Vec<bool> = w.iter().map(|&v| v > 0.0).collect();
    let jitter = 1e-13 * (0..n).map(|i| q[(i, i)]).sum::<f64>() / n as f64;
    for _ in 0..max_iter {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let g = q * &w - c;
        let m = idx.len();
        let mut kkt = nalgebra::DMatrix::zeros(m + 1, m + 1);
        let mut rhs = nalgebra::DVector::zeros(m + 1);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                kkt[(a, b)] = q[(i, j)];
            }
            kkt[(a, a)] += jitter;
            kkt[(a, m)] = 1.0;
            kkt[(m, a)] = 1.0;
            rhs[a] = -g[i];
        }
        let sol = kkt.svd(true, true).solve(&rhs, 1e-15).ok()?;
        let p = sol.rows(0, m);
        if p.amax() <= 1e-15 {
            let nu = idx.iter().map(|&i| g[i]).sum::<f64>() / m as f64;
            let worst = (0..n).filter(|&i| !free[i]).min_by(|&a, &b| g[a].total_cmp(&g[b]));
            match worst {
                Some(i) if g[i] - nu < -1e-15 => free[i] = true,
                _ => return Some(w),
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut block = None;
        for (a, &i) in idx.iter().enumerate() {
            if p[a] < 0.0 && -w[i] / p[a] < alpha {
                alpha = -w[i] / p[a];
                block = Some(i);
            }
        }
        for (a, &i) in idx.iter().enumerate() {
            w[i] = (w[i] + alpha * p[a]).max(0.0);
        }
        if let Some(i) = block {
            w[i] = 0.0;
            free[i] = false;
        }
        w /= w.sum();
    }
    None
}

/// FISTA with adaptive restart on `½‖Dw − T‖²/‖T‖² + ½ ridge ‖w‖²` over
/// the simplex, using the rows at time indices `fit`. Every few hundred
/// iterations an active-set solve from the current iterate is tried and
/// kept if it meets the same stopping rule.
pub fn fit_simplex(design: &DesignMatrix, target: &TargetSeries, fit: &[usize], opts: &FitOptions) -> Result<SimplexFit> {
    check_alignment(design, target)?;
    check_indices(design, fit)?;
    let n = design.n_atoms();
    let tt: f64 = fit.iter().map(|&t| dot(&target.slices[t], &target.slices[t])).sum();
    if tt <= 0.0 {
        return Err(Error::InvalidField("target vanishes on the fitted times".into()));
    }
    let mut q = nalgebra::DMatrix::zeros(n, n);
    let mut c = nalgebra::DVector::zeros(n);
    for i in 0..n {
        for &t in fit {
            c[i] += dot(design.block(i, t), &target.slices[t]) / tt;
        }
        for j in 0..=i {
            let v: f64 = fit.iter().map(|&t| dot(design.block(i, t), design.block(j, t))).sum::<f64>() / tt;
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    for i in 0..n {
        q[(i, i)] += opts.ridge;
    }
    let lip = q.clone().symmetric_eigen().eigenvalues.max().max(1e-300);
    let f = |w: &nalgebra::DVector<f64>| 0.5 * w.dot(&(&q * w)) - c.dot(w);
    let step = |y: &nalgebra::DVector<f64>| {
        let g = &q * y - &c;
        nalgebra::DVector::from_vec(project_simplex((y - g / lip).as_slice()))
    };
    let mapping = |w: &nalgebra::DVector<f64>| lip * (w - step(w)).norm();
    let mut w = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let mut y = w.clone();
    let mut mom = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = step(&y);
        if (&y - &next).dot(&(&next - &w)) > 0.0 {
            // restart
            mom = 1.0;
            y = next.clone();
        } else {
            let mom_next = 0.5 * (1.0 + (1.0 + 4.0 * mom * mom).sqrt());
            y = &next + (&next - &w) * ((mom - 1.0) / mom_next);
            mom = mom_next;
        }
        w = next;
        if mapping(&w) < opts.tol {
            converged = true;
            break;
        }
        if iterations % POLISH_EVERY == 0 {
            if let Some(p) = active_set(&q, &c, &w, 20 * n) {
                if mapping(&p) < opts.tol {
                    w = p;
                    converged = true;
                    break;
                }
            }
        }
    }
    if !converged {
        log::warn!("simplex fit stopped after {iterations} iterations without converging");
    }
    let objective = 2.0 * f(&w) + 1.0 - opts.ridge * w.norm_squared();
    Ok(SimplexFit { weights: project_simplex(w.as_slice()), iterations, converged, objective })
}

/// Relative L2 and L∞ misfit of the mixture `D w` at time indices `idx`.
pub fn heldout_residual(design: &DesignMatrix, target: &TargetSeries, weights: &[f64], idx: &[usize]) -> Result<(f64, f64)> {
    check_alignment(design, target)?;
    check_indices(design, idx)?;
    let (mut num, mut den, mut inf, mut peak) = (0.0, 0.0, 0.0f64, 0.0f64);
    for &t in idx {
        let m = design.mixture(weights, t);
        for (a, b) in m.iter().zip(&target.slices[t]) {
            num += (a - b) * (a - b);
            den += b * b;
            inf = inf.max((a - b).abs());
            peak = peak.max(b.abs());
        }
    }
    Ok(((num / den).sqrt(), inf / peak))
}

/// Fits on `fit` times, scores on `heldout` times. Without a floor the
/// verdict is [`RepVerdict::Inconclusive`].
pub fn fit_boundary_distribution(
    design: &DesignMatrix,
    target: &TargetSeries,
    fit: &[usize],
    heldout: &[usize],
    mc_floor: Option<f64>,
    opts: &FitOptions,
) -> Result<RepresentabilityReport> {
    if fit.iter().any(|i| heldout.contains(i)) {
        return Err(Error::InvalidGrid("fit and held-out times overlap".into()));
    }
    let sol = fit_simplex(design, target, fit, opts)?;
    let (residual_l2, residual_linf) = heldout_residual(design, target, &sol.weights, heldout)?;
    let verdict = match mc_floor {
        Some(floor) => classify(residual_l2, floor, sol.converged),
        None => RepVerdict::Inconclusive,
    };
    Ok(RepresentabilityReport {
        target: target.label.clone(),
        weights: sol.weights,
        ridge: opts.ridge,
        fit_times: fit.iter().map(|&i| design.times[i]).collect(),
        heldout_times: heldout.iter().map(|&i| design.times[i]).collect(),
        residual_l2,
        residual_linf,
        mc_floor,
        verdict,
        iterations: sol.iterations,
        converged: sol.converged,
        noise_model: design.noise_model(),
    })
}

/// Diagnostic fit with only `Σ w = 1` imposed, so weights may go negative.
/// Comparing its residual with the simplex fit separates "needs signed
/// weights" from "needs finer atoms".
pub fn fit_signed(design: &DesignMatrix, target: &TargetSeries, fit: &[usize]) -> Result<Vec<f64>> {
    check_alignment(design, target)?;
    check_indices(design, fit)?;
    let n = design.n_atoms();
    let mut kkt = nalgebra::DMatrix::zeros(n + 1, n + 1);
    let mut rhs = nalgebra::DVector::zeros(n + 1);
    for i in 0..n {
        rhs[i] = fit.iter().map(|&t| dot(design.block(i, t), &target.slices[t])).sum();
        for j in 0..=i {
            let v: f64 = fit.iter().map(|&t| dot(design.block(i, t), design.block(j, t))).sum();
            kkt[(i, j)] = v;
            kkt[(j, i)] = v;
        }
        kkt[(i, n)] = 1.0;
        kkt[(n, i)] = 1.0;
    }
    rhs[n] = 1.0;
    let sol = kkt.svd(true, true).solve(&rhs, 1e-12).map_err(|e| Error::InvalidField(e.to_string()))?;
    Ok(sol.rows(0, n).iter().copied().collect())
}

/// Largest target mass, over design times, at points where the target is
/// at least `level` but every column is below it.
pub fn uncovered_mass(design: &DesignMatrix, target: &TargetSeries, level: f64) -> Result<f64> {
    check_alignment(design, target)?;
    let dv = design.grid.cell_volume();
    Ok((0..design.times.len())
        .map(|t| {
            let slice = &target.slices[t];
            (0..slice.len())
                .filter(|&i| slice[i] >= level && (0..design.n_atoms()).all(|a| design.block(a, t)[i] < level))
                .map(|i| slice[i] * dv)
                .sum::<f64>()
        })
        .fold(0.0, f64::max))
}

/// Total variation between two weight vectors.
pub fn weight_tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
