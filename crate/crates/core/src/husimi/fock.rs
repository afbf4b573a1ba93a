//! Truncated number-basis quantum states: the reference dynamics against
//! which the phase-space evolution is checked.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::husimi::field::{QField, DEFAULT_NORM_TOL};
use crate::symbol::{alpha_from_phi, ComplexPolynomial};

const STATE_TOL: f64 = 1e-10;
/// Levels at the top of each mode's ladder that count as leaked population.
pub const TAIL_LEVELS: usize = 5;
pub const LEAKAGE_LIMIT: f64 = 1e-6;
pub const AUTO_CUTOFF_TAIL: f64 = 1e-8;

/// Density matrix over `cutoff + 1` levels per mode; mode 0 is the most
/// significant digit of the basis index.
#[derive(Clone, Debug)]
pub struct FockState {
    num_modes: usize,
    cutoff: usize,
    rho: DMatrix<Complex64>,
}

fn dim(num_modes: usize, cutoff: usize) -> usize {
    (cutoff + 1).pow(num_modes as u32)
}

fn digits(mut index: usize, num_modes: usize, cutoff: usize) -> Vec<usize> {
    let mut d = vec![0; num_modes];
    for k in (0..num_modes).rev() {
        d[k] = index % (cutoff + 1);
        index /= cutoff + 1;
    }
    d
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Truncated coherent amplitudes `⟨n|β⟩` for `n = 0..=cutoff`.
fn coherent_amplitudes(beta: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut c = Complex64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..=cutoff {
        out.push(c);
        c = c * beta / ((n + 1) as f64).sqrt();
    }
    out
}

fn kron_vectors(parts: &[Vec<Complex64>]) -> DVector<Complex64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for p in parts {
        acc = acc.iter().flat_map(|a| p.iter().map(move |b| a * b)).collect();
    }
    DVector::from_vec(acc)
}

impl FockState {
    pub fn from_density(num_modes: usize, cutoff: usize, rho: DMatrix<Complex64>) -> Result<Self> {
        let n = dim(num_modes, cutoff);
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::Dimension { expected: n, got: rho.nrows() });
        }
        let herm = (&rho - rho.adjoint()).norm();
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("density matrix is not hermitian (defect {herm:.2e})")));
        }
        let tr = rho.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = rho.clone().symmetric_eigenvalues().min();
        if min_eig < -STATE_TOL {
            return Err(Error::InvalidState(format!("density matrix has eigenvalue {min_eig:.2e}")));
        }
        Ok(Self { num_modes, cutoff, rho })
    }

    /// Pure state from (not necessarily normalized) number-basis amplitudes.
    pub fn from_pure(num_modes: usize, cutoff: usize, psi: DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("state vector has zero or non-finite norm".into()));
        }
        let psi = psi / Complex64::new(norm, 0.0);
        if psi.len() != dim(num_modes, cutoff) {
            return Err(Error::Dimension { expected: dim(num_modes, cutoff), got: psi.len() });
        }
        let rho = &psi * psi.adjoint();
        Ok(Self { num_modes, cutoff, rho })
    }

    pub fn vacuum(num_modes: usize, cutoff: usize) -> Self {
        Self::number(&vec![0; num_modes], cutoff).expect("vacuum fits any cutoff")
    }

    pub fn number(ns: &[usize], cutoff: usize) -> Result<Self> {
        if let Some(n) = ns.iter().find(|&&n| n > cutoff) {
            return Err(Error::InvalidState(format!("number state {n} exceeds cutoff {cutoff}")));
        }
        let parts: Vec<Vec<Complex64>> = ns
            .iter()
            .map(|&n| (0..=cutoff).map(|k| Complex64::new(if k == n { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        Self::from_pure(ns.len(), cutoff, kron_vectors(&parts))
    }

    /// Product of coherent states, truncated and renormalized.
    pub fn coherent(betas: &[Complex64], cutoff: usize) -> Result<Self> {
        let parts: Vec<Vec<Complex64>> = betas.iter().map(|b| coherent_amplitudes(*b, cutoff)).collect();
        Self::from_pure(betas.len(), cutoff, kron_vectors(&parts))
    }

    /// Single-mode cat state `|β⟩ + |−β⟩` (even) or `|β⟩ − |−β⟩` (odd).
    pub fn cat(beta: Complex64, even: bool, cutoff: usize) -> Result<Self> {
        let plus = coherent_amplitudes(beta, cutoff);
        let minus = coherent_amplitudes(-beta, cutoff);
        let sign = if even { 1.0 } else { -1.0 };
        let psi = DVector::from_iterator(cutoff + 1, plus.iter().zip(&minus).map(|(a, b)| a + b * sign));
        Self::from_pure(1, cutoff, psi)
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn density(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Population with some mode above `cutoff - levels`.
    pub fn tail_population(&self, levels: usize) -> f64 {
        let threshold = self.cutoff.saturating_sub(levels);
        (0..self.rho.nrows())
            .filter(|&i| digits(i, self.num_modes, self.cutoff).iter().any(|&d| d > threshold))
            .map(|i| self.rho[(i, i)].re)
            .sum()
    }

    /// `Tr(O ρ)` for an operator matrix in the same basis.
    pub fn expect_operator(&self, op: &DMatrix<Complex64>) -> Complex64 {
        (op * &self.rho).trace()
    }

    /// `Tr(Â ρ)` for the operator whose anti-Wick symbol is `a`.
    pub fn expect_symbol(&self, a: &ComplexPolynomial) -> Result<Complex64> {
        Ok(self.expect_operator(&symbol_to_operator(a, self.cutoff)?))
    }

    /// Fidelity with a pure state `ψ`: `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_pure(&self, psi: &DVector<Complex64>) -> f64 {
        (psi.adjoint() * &self.rho * psi)[(0, 0)].re / psi.norm_squared()
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).map(|j| f64::from(n - j) / f64::from(j + 1)).product()
}

/// Matrix of `a†^r a^s` on one mode with `cutoff + 1` levels.
fn normal_word(r: u32, s: u32, cutoff: usize) -> DMatrix<Complex64> {
    let n = cutoff + 1;
    let mut m = DMatrix::zeros(n, n);
    for col in (s as usize)..n {
        let row = col - s as usize + r as usize;
        if row < n {
            let lf = 0.5 * (ln_factorial(col) - ln_factorial(col - s as usize) + ln_factorial(row) - ln_factorial(col - s as usize));
            m[(row, col)] = Complex64::new(lf.exp(), 0.0);
        }
    }
    m
}

/// Operator whose anti-Wick symbol is `h`, in the truncated number basis.
///
/// Each symbol monomial `α^p α*^q` is the anti-normally ordered `a^p a†^q`,
/// which is rewritten in normal order as
/// `Σ_k k! C(p,k) C(q,k) a†^(q−k) a^(p−k)` so that truncation is exact.
pub fn symbol_to_operator(h: &ComplexPolynomial, cutoff: usize) -> Result<DMatrix<Complex64>> {
    let n_modes = h.num_modes();
    let d = dim(n_modes, cutoff);
    let mut total = DMatrix::zeros(d, d);
    for (m, c) in h.terms() {
        let mut acc = DMatrix::<Complex64>::identity(1, 1);
        for mode in 0..n_modes {
            let (p, q) = (m.alpha[mode], m.alpha_star[mode]);
            let mut local = DMatrix::<Complex64>::zeros(cutoff + 1, cutoff + 1);
            for k in 0..=p.min(q) {
                let w = (1..=k).map(f64::from).product::<f64>() * binomial(p, k) * binomial(q, k);
                local += normal_word(q - k, p - k, cutoff) * Complex64::new(w, 0.0);
            }
            acc = acc.kronecker(&local);
        }
        total += acc * *c;
    }
    Ok(total)
}

/// Unitary evolution under a fixed symbol in a fixed truncated space.
pub struct FockPropagator {
    num_modes: usize,
    cutoff: usize,
    vectors: DMatrix<Complex64>,
    energies: DVector<f64>,
}

impl FockPropagator {
    pub fn new(h: &ComplexPolynomial, cutoff: usize) -> Result<Self> {
        h.require_hermitian()?;
        if (h.hbar() - 1.0).abs() > 0.0 {
            return Err(Error::Unsupported("the number-basis reference works in units with hbar = 1".into()));
        }
        let op = symbol_to_operator(h, cutoff)?;
        let op = (&op + op.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = op.symmetric_eigen();
        Ok(Self { num_modes: h.num_modes(), cutoff, vectors: eig.eigenvectors, energies: eig.eigenvalues })
    }

    pub fn unitary(&self, t: f64) -> DMatrix<Complex64> {
        let phases = DVector::from_iterator(self.energies.len(), self.energies.iter().map(|e| Complex64::from_polar(1.0, -e * t)));
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        scaled * self.vectors.adjoint()
    }

    /// `ρ(t) = U ρ U†`, failing when population reaches the top levels.
    pub fn evolve(&self, rho: &FockState, t: f64) -> Result<FockState> {
        if rho.num_modes != self.num_modes || rho.cutoff != self.cutoff {
            return Err(Error::Dimension { expected: dim(self.num_modes, self.cutoff), got: rho.rho.nrows() });
        }
        if t == 0.0 {
            return Ok(rho.clone());
        }
        let u = self.unitary(t);
        let out = &u * &rho.rho * u.adjoint();
        let out = (&out + out.adjoint()) * Complex64::new(0.5, 0.0);
        let state = FockState { num_modes: self.num_modes, cutoff: self.cutoff, rho: out };
        let tail = state.tail_population(TAIL_LEVELS);
        if tail > LEAKAGE_LIMIT {
            return Err(Error::Cutoff { cutoff: self.cutoff, tail, limit: LEAKAGE_LIMIT, suggested: self.cutoff * 3 / 2 + 10 });
        }
        Ok(state)
    }
}

pub fn fock_evolve(rho: &FockState, h: &ComplexPolynomial, t: f64) -> Result<FockState> {
    FockPropagator::new(h, rho.cutoff)?.evolve(rho, t)
}

/// Smallest cutoff (stepping by 5 from `start`) for which the population
/// beyond `n_max − 5` stays below 1e−8 at every requested time.
pub fn auto_cutoff<F>(h: &ComplexPolynomial, prepare: F, times: &[f64], start: usize, max: usize) -> Result<usize>
where
    F: Fn(usize) -> Result<FockState>,
{
    let mut cutoff = start.max(TAIL_LEVELS + 1);
    let mut last_tail = f64::INFINITY;
    while cutoff <= max {
        let state = prepare(cutoff)?;
        let prop = FockPropagator::new(h, cutoff)?;
        let mut worst: f64 = state.tail_population(TAIL_LEVELS);
        for &t in times {
            match prop.evolve(&state, t) {
                Ok(s) => worst = worst.max(s.tail_population(TAIL_LEVELS)),
                Err(Error::Cutoff { tail, .. }) => worst = worst.max(tail),
                Err(e) => return Err(e),
            }
        }
        if worst < AUTO_CUTOFF_TAIL {
            return Ok(cutoff);
        }
        last_tail = worst;
        cutoff += 5;
    }
    Err(Error::Cutoff { cutoff: max, tail: last_tail, limit: AUTO_CUTOFF_TAIL, suggested: max + 20 })
}

/// `Q(α) = ⟨α|ρ|α⟩ / π^N` on the grid.
pub fn husimi_from_fock(rho: &FockState, grid: &PhaseGrid) -> Result<QField> {
    husimi_from_fock_with_tolerance(rho, grid, DEFAULT_NORM_TOL)
}

pub fn husimi_from_fock_with_tolerance(rho: &FockState, grid: &PhaseGrid, tol_norm: f64) -> Result<QField> {
    if grid.dims() != 2 * rho.num_modes {
        return Err(Error::Dimension { expected: 2 * rho.num_modes, got: grid.dims() });
    }
    let q = HusimiEvaluator::new(rho);
    let values = grid.map(|p| q.eval(&alpha_from_phi(p)));
    QField::with_tolerance(grid.clone(), values, 0.0, tol_norm)
}

/// Pointwise `Q(α)` from the eigen-decomposition of a density matrix.
pub struct HusimiEvaluator {
    num_modes: usize,
    cutoff: usize,
    components: Vec<(f64, DVector<Complex64>)>,
}

impl HusimiEvaluator {
    pub fn new(rho: &FockState) -> Self {
        let tail = rho.tail_population(TAIL_LEVELS);
        if tail > 1e-8 {
            log::warn!("state has population {tail:.2e} in the top {TAIL_LEVELS} levels; the cutoff may truncate Q");
        }
        let eig = rho.rho.clone().symmetric_eigen();
        let components = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 1e-14)
            .map(|(k, &l)| (l, eig.eigenvectors.column(k).into_owned()))
            .collect();
        Self { num_modes: rho.num_modes, cutoff: rho.cutoff, components }
    }

    pub fn eval(&self, alpha: &[Complex64]) -> f64 {
        debug_assert_eq!(alpha.len(), self.num_modes);
        let parts: Vec<Vec<Complex64>> = alpha.iter().map(|a| coherent_amplitudes(*a, self.cutoff)).collect();
        let v = kron_vectors(&parts);
        self.components
            .iter()
            .map(|(l, psi)| l * v.iter().zip(psi.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr())
            .sum::<f64>()
            / PI.powi(self.num_modes as i32)
    }
}
