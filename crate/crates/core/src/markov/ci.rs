//! Conditional-independence tests on multi-time joints.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markov::joint::{JointData, MultiTimeJoint};

/// Normalized conditional cross-correlation below which a Gaussian joint
/// counts as conditionally independent.
pub const EXACT_THRESHOLD: f64 = 1e-10;

/// Variances below this fraction of the largest are treated as constants.
const CONSTANT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Independent,
    Dependent,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Independent => "independent",
            Verdict::Dependent => "dependent",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    GaussianExact,
    /// Histogram mutual information of regression residuals, calibrated by
    /// permutations.
    Permutation,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::GaussianExact => "gaussian-exact",
            Backend::Permutation => "permutation",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CITestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub backend: Backend,
    pub n_samples: usize,
    pub seed: Option<u64>,
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationOptions {
    pub bins: usize,
    pub permutations: usize,
    pub alpha: f64,
    /// Minimum expected count per cell of each pairwise histogram.
    pub min_cell: f64,
    /// Total degree of the polynomial regression on the conditioning set.
    pub degree: usize,
    pub seed: u64,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        Self { bins: 8, permutations: 199, alpha: 0.01, min_cell: 5.0, degree: 3, seed: 0 }
    }
}

/// Tests `A ⫫ B | C` with the backend that matches the joint's data.
pub fn ci_test(joint: &MultiTimeJoint, a: &[usize], b: &[usize], c: &[usize], opts: &PermutationOptions) -> Result<CITestResult> {
    check_sets(joint.coords.len(), a, b, c)?;
    match &joint.data {
        JointData::Gaussian { cov, .. } => gaussian_ci(cov, a, b, c),
        JointData::Samples { rows, seed } => {
            let mut r = sampled_ci(rows, a, b, c, opts)?;
            r.seed = Some(*seed);
            Ok(r)
        }
    }
}

fn check_sets(n: usize, a: &[usize], b: &[usize], c: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Unsupported("independence test needs nonempty variable sets".into()));
    }
    let mut all: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    if let Some(&i) = all.iter().find(|&&i| i >= n) {
        return Err(Error::Dimension { expected: n, got: i + 1 });
    }
    all.sort_unstable();
    let len = all.len();
    all.dedup();
    if all.len() != len {
        return Err(Error::Unsupported("variable sets overlap".into()));
    }
    Ok(())
}

fn sub(cov: &DMatrix<f64>, r: &[usize], c: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), c.len(), |i, j| cov[(r[i], c[j])])
}

fn drop_constants(cov: &DMatrix<f64>, set: &[usize]) -> Vec<usize> {
    let scale = cov.diagonal().amax();
    set.iter().copied().filter(|&i| cov[(i, i)] > CONSTANT_TOL * scale).collect()
}

/// Inverse of a symmetric positive semidefinite block, discarding
/// directions that carry no variance.
fn pinv_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    if let Some(ch) = m.clone().cholesky() {
        return ch.inverse();
    }
    let eig = m.clone().symmetric_eigen();
    let cut = CONSTANT_TOL * eig.eigenvalues.amax();
    let inv = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| if l > cut { 1.0 / l } else { 0.0 }));
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// `Cov([A, B] | C)` as one block matrix, rows and columns ordered `A` then `B`.
pub fn conditional_covariance(cov: &DMatrix<f64>, ab: &[usize], c: &[usize]) -> DMatrix<f64> {
    let cc = pinv_sym(&sub(cov, c, c));
    let abc = sub(cov, ab, c);
    let s = sub(cov, ab, ab) - &abc * cc * abc.transpose();
    (&s + s.transpose()) * 0.5
}

/// Frobenius norm of the conditional cross-correlation of `A` and `B`.
pub fn gaussian_ci(cov: &DMatrix<f64>, a: &[usize], b: &[usize], c: &[usize]) -> Result<CITestResult> {
    check_sets(cov.nrows(), a, b, c)?;
    let a = drop_constants(cov, a);
    let b = drop_constants(cov, b);
    let c = drop_constants(cov, c);
    let scale = cov.diagonal().amax();
    let ab: Vec<usize> = a.iter().chain(&b).copied().collect();
    let s = conditional_covariance(cov, &ab, &c);
    let na = a.len();
    let sd: Vec<f64> = (0..ab.len()).map(|i| s[(i, i)].max(0.0).sqrt()).collect();
    let mut stat = 0.0;
    for i in 0..na {
        for j in na..ab.len() {
            // a coordinate fixed by the conditioning set carries no dependence
            if sd[i] * sd[i] <= CONSTANT_TOL * scale || sd[j] * sd[j] <= CONSTANT_TOL * scale {
                continue;
            }
            stat += (s[(i, j)] / (sd[i] * sd[j])).powi(2);
        }
    }
    let statistic = stat.sqrt();
    if !statistic.is_finite() {
        return Err(Error::Numerical("conditional covariance is not finite".into()));
    }
    Ok(CITestResult {
        statistic,
        threshold: EXACT_THRESHOLD,
        verdict: if statistic <= EXACT_THRESHOLD { Verdict::Independent } else { Verdict::Dependent },
        backend: Backend::GaussianExact,
        n_samples: 0,
        seed: None,
        p_value: None,
    })
}

/// Monomials of total degree `1..=degree` in the columns of `c`, plus a
/// constant, each column standardized first.
fn design(rows: &[Vec<f64>], c: &[usize], degree: usize) -> DMatrix<f64> {
    let n = rows.len();
    let std_cols: Vec<Vec<f64>> = c
        .iter()
        .map(|&j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let m = crate::stats::mean(&col);
            let s = crate::stats::variance(&col).sqrt();
            col.iter().map(|v| (v - m) / s).collect()
        })
        .collect();
    let mut exps: Vec<Vec<usize>> = vec![vec![0; c.len()]];
    let mut frontier = exps.clone();
    for _ in 0..degree {
        let mut next = Vec::new();
        for e in &frontier {
            let start = e.iter().rposition(|&p| p > 0).unwrap_or(0);
            for k in start..c.len() {
                let mut f = e.clone();
                f[k] += 1;
                next.push(f);
            }
        }
        exps.extend(next.iter().cloned());
        frontier = next;
    }
    DMatrix::from_fn(n, exps.len(), |i, k| {
        exps[k].iter().enumerate().map(|(j, &p)| std_cols[j][i].powi(p as i32)).product()
    })
}

fn residuals(rows: &[Vec<f64>], cols: &[usize], x: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    let svd = x.clone().svd(true, true);
    cols.iter()
        .map(|&j| {
            let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r[j]));
            let beta = svd.solve(&y, 1e-12).map_err(|e| Error::Numerical(e.to_string()))?;
            Ok((&y - x * beta).iter().copied().collect())
        })
        .collect()
}

/// Equal-frequency bin index of every entry.
fn rank_bins(v: &[f64], bins: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0; v.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * bins / v.len();
    }
    out
}

fn mutual_information(a: &[usize], b: &[usize], perm: &[usize], bins: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0.0; bins * bins];
    let mut pa = vec![0.0; bins];
    let mut pb = vec![0.0; bins];
    for (i, &ai) in a.iter().enumerate() {
        let bi = b[perm[i]];
        joint[ai * bins + bi] += 1.0;
        pa[ai] += 1.0;
        pb[bi] += 1.0;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let p = joint[i * bins + j];
            if p > 0.0 {
                mi += p / n * (p * n / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi
}

/// Residualizes `A` and `B` on a polynomial in `C` and sums the pairwise
/// histogram mutual information of the residuals. The null distribution
/// comes from permuting the `B` residual rows jointly.
pub fn sampled_ci(rows: &[Vec<f64>], a: &[usize], b: &[usize], c: &[usize], opts: &PermutationOptions) -> Result<CITestResult> {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    check_sets(width, a, b, c)?;
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension { expected: width, got: rows.iter().map(Vec::len).find(|&l| l != width).unwrap_or(0) });
    }
    let varying = |set: &[usize]| -> Vec<usize> {
        set.iter()
            .copied()
            .filter(|&j| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                n > 1 && crate::stats::variance(&col).sqrt() > 1e-12 * (1.0 + crate::stats::mean(&col).abs())
            })
            .collect()
    };
    let (a, b, c) = (varying(a), varying(b), varying(c));
    let inconclusive = |stat: f64| CITestResult {
        statistic: stat,
        threshold: f64::NAN,
        verdict: Verdict::Inconclusive,
        backend: Backend::Permutation,
        n_samples: n,
        seed: None,
        p_value: None,
    };
    let x = design(rows, &c, opts.degree);
    let expected_cell = n as f64 / (opts.bins * opts.bins) as f64;
    if a.is_empty() || b.is_empty() {
        let mut r = inconclusive(0.0);
        if n > 0 {
            // constants are independent of everything
            r.verdict = Verdict::Independent;
            r.threshold = 0.0;
        }
        return Ok(r);
    }
    if expected_cell < opts.min_cell || n < 10 * x.ncols() {
        return Ok(inconclusive(f64::NAN));
    }
    let ra: Vec<Vec<usize>> = residuals(rows, &a, &x)?.iter().map(|v| rank_bins(v, opts.bins)).collect();
    let rb: Vec<Vec<usize>> = residuals(rows, &b, &x)?.iter().map(|v| rank_bins(v, opts.bins)).collect();
    let stat = |perm: &[usize]| -> f64 {
        ra.iter().flat_map(|u| rb.iter().map(move |v| (u, v))).map(|(u, v)| mutual_information(u, v, perm, opts.bins)).sum()
    };
    let identity: Vec<usize> = (0..n).collect();
    let observed = stat(&identity);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut perm = identity.clone();
    let mut null: Vec<f64> = (0..opts.permutations)
        .map(|_| {
            perm.shuffle(&mut rng);
            stat(&perm)
        })
        .collect();
    let exceed = null.iter().filter(|&&v| v >= observed).count();
    let p = (1 + exceed) as f64 / (1 + opts.permutations) as f64;
    null.sort_by(f64::total_cmp);
    let threshold = crate::stats::quantile_sorted(&null, 1.0 - opts.alpha);
    Ok(CITestResult {
        statistic: observed,
        threshold,
        verdict: if p < opts.alpha { Verdict::Dependent } else { Verdict::Independent },
        backend: Backend::Permutation,
        n_samples: n,
        seed: None,
        p_value: Some(p),
    })
}
