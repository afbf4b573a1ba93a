//! Anti-Wick symbols as complex polynomials in `α` and `α*`, with the
//! Wirtinger calculus and the real-coordinate drift and diffusion derived
//! from them.
//!
//! Conventions used throughout the crate:
//!
//! * per mode, `α = (x + i y) / √2`, and the standard real coordinates are
//!   ordered `φ = (x_1 .. x_N, y_1 .. y_N)`;
//! * `ħ` is an explicit dimensionless parameter (default 1) carried by the
//!   polynomial;
//! * the drift is the first-order bracket of the Husimi evolution written as
//!   a continuity equation, `A = (∂H/∂y, -∂H/∂x)`;
//! * the diffusion matrix `D` is the coefficient array of the second-order
//!   bracket written as `½ Σ ∂_a ∂_b (D_ab Q)`. With `C_ij = ∂²H/∂α*_i∂α*_j`
//!   this gives `D_xx = -ħ Im C`, `D_yy = ħ Im C`, `D_xy = ħ Re C`, so the
//!   overall constant relating it to the commutator form is 1 in these units.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// Powers of `α` and `α*` for every mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub alpha: Vec<u32>,
    pub alpha_star: Vec<u32>,
}

impl MultiIndex {
    pub fn new(alpha: Vec<u32>, alpha_star: Vec<u32>) -> Result<Self> {
        if alpha.len() != alpha_star.len() {
            return Err(Error::Dimension { expected: alpha.len(), got: alpha_star.len() });
        }
        if alpha.is_empty() {
            return Err(Error::InvalidPolynomial("multi-index with zero modes".into()));
        }
        Ok(Self { alpha, alpha_star })
    }

    pub fn zero(num_modes: usize) -> Self {
        Self { alpha: vec![0; num_modes], alpha_star: vec![0; num_modes] }
    }

    pub fn num_modes(&self) -> usize {
        self.alpha.len()
    }

    /// The index with the roles of `α` and `α*` exchanged.
    pub fn swapped(&self) -> Self {
        Self { alpha: self.alpha_star.clone(), alpha_star: self.alpha.clone() }
    }

    pub fn total_degree(&self) -> u32 {
        self.alpha.iter().chain(&self.alpha_star).sum()
    }

    fn max_per_variable(&self) -> u32 {
        self.alpha.iter().chain(&self.alpha_star).copied().max().unwrap_or(0)
    }
}

/// Finitely supported polynomial `Σ c_m α^{m_a} α*^{m_b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPolynomial {
    num_modes: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
    hbar: f64,
}

impl ComplexPolynomial {
    pub fn zero(num_modes: usize) -> Self {
        assert!(num_modes > 0, "polynomial needs at least one mode");
        Self { num_modes, terms: BTreeMap::new(), hbar: 1.0 }
    }

    pub fn constant(num_modes: usize, value: Complex64) -> Self {
        let mut p = Self::zero(num_modes);
        p.add_term(MultiIndex::zero(num_modes), value).expect("mode count matches");
        p
    }

    /// Single-mode monomial `c α^p α*^q`.
    pub fn monomial(p: u32, q: u32, c: Complex64) -> Self {
        let mut poly = Self::zero(1);
        poly.add_term(MultiIndex { alpha: vec![p], alpha_star: vec![q] }, c)
            .expect("mode count matches");
        poly
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidPolynomial(format!("hbar must be positive, got {hbar}")));
        }
        self.hbar = hbar;
        Ok(self)
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &MultiIndex) -> Complex64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    /// Adds `c` to the coefficient of `m`; coefficients that cancel are removed.
    pub fn add_term(&mut self, m: MultiIndex, c: Complex64) -> Result<()> {
        if m.num_modes() != self.num_modes {
            return Err(Error::Dimension { expected: self.num_modes, got: m.num_modes() });
        }
        let entry = self.terms.entry(m).or_default();
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.retain(|_, v| *v != Complex64::new(0.0, 0.0));
        }
        Ok(())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self { num_modes: self.num_modes, terms: BTreeMap::new(), hbar: self.hbar };
        if s != Complex64::new(0.0, 0.0) {
            for (m, c) in &self.terms {
                out.terms.insert(m.clone(), c * s);
            }
        }
        out
    }

    /// A polynomial is a hermitian symbol when it is real-valued, i.e.
    /// `coeff(a, b) = conj(coeff(b, a))`.
    pub fn is_hermitian(&self) -> bool {
        let scale = self.terms.values().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        self.terms.iter().all(|(m, c)| {
            let partner = self.coeff(&m.swapped());
            (c - partner.conj()).norm() <= HERMITIAN_TOL * scale
        })
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(Error::UnsupportedHamiltonian("symbol is not hermitian (not real-valued)".into()))
        }
    }

    /// Largest power of any single `α_i` or `α*_i`.
    pub fn max_degree_per_variable(&self) -> u32 {
        self.terms.keys().map(MultiIndex::max_per_variable).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::total_degree).max().unwrap_or(0)
    }

    /// True when the symbol is at most quadratic in every complex variable,
    /// which is when the Husimi evolution series stops at second order.
    pub fn is_fpe_admissible(&self) -> bool {
        self.max_degree_per_variable() <= 2
    }

    pub fn evaluate(&self, alpha: &[Complex64]) -> Result<Complex64> {
        if alpha.len() != self.num_modes {
            return Err(Error::Dimension { expected: self.num_modes, got: alpha.len() });
        }
        Ok(self.eval_unchecked(alpha))
    }

    fn eval_unchecked(&self, alpha: &[Complex64]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut v = *c;
            for (i, a) in alpha.iter().enumerate() {
                if m.alpha[i] > 0 {
                    v *= a.powu(m.alpha[i]);
                }
                if m.alpha_star[i] > 0 {
                    v *= a.conj().powu(m.alpha_star[i]);
                }
            }
            total += v;
        }
        total
    }

    /// Evaluates at standard real coordinates `φ = (x, y)`.
    pub fn evaluate_real(&self, phi: &[f64]) -> Result<Complex64> {
        if phi.len() != 2 * self.num_modes {
            return Err(Error::Dimension { expected: 2 * self.num_modes, got: phi.len() });
        }
        Ok(self.eval_unchecked(&alpha_from_phi(phi)))
    }

    /// `∂^orders p`, or `∂̄^orders p` when `conjugate` is set.
    pub fn derivative(&self, orders: &[u32], conjugate: bool) -> Result<Self> {
        if orders.len() != self.num_modes {
            return Err(Error::Dimension { expected: self.num_modes, got: orders.len() });
        }
        let mut out = Self { num_modes: self.num_modes, terms: BTreeMap::new(), hbar: self.hbar };
        'terms: for (m, c) in &self.terms {
            let mut powers = if conjugate { m.alpha_star.clone() } else { m.alpha.clone() };
            let mut factor = 1.0;
            for (i, &k) in orders.iter().enumerate() {
                if k > powers[i] {
                    continue 'terms;
                }
                factor *= falling_factorial(powers[i], k);
                powers[i] -= k;
            }
            let key = if conjugate {
                MultiIndex { alpha: m.alpha.clone(), alpha_star: powers }
            } else {
                MultiIndex { alpha: powers, alpha_star: m.alpha_star.clone() }
            };
            out.add_term(key, c * factor)?;
        }
        Ok(out)
    }

    /// `∂^{m.alpha} ∂̄^{m.alpha_star} p`.
    pub fn partial(&self, m: &MultiIndex) -> Result<Self> {
        self.derivative(&m.alpha, false)?.derivative(&m.alpha_star, true)
    }

    /// Partial derivative with respect to a standard real coordinate
    /// (`0..N` are the `x_i`, `N..2N` the `y_i`).
    pub fn real_partial(&self, coord: usize) -> Result<Self> {
        let n = self.num_modes;
        if coord >= 2 * n {
            return Err(Error::Dimension { expected: 2 * n, got: coord + 1 });
        }
        let mode = coord % n;
        let mut orders = vec![0; n];
        orders[mode] = 1;
        let d = self.derivative(&orders, false)?;
        let db = self.derivative(&orders, true)?;
        let s = 1.0 / SQRT_2;
        // ∂_x = (∂ + ∂̄)/√2,  ∂_y = i(∂ - ∂̄)/√2
        Ok(if coord < n {
            d.scale(Complex64::new(s, 0.0)) + db.scale(Complex64::new(s, 0.0))
        } else {
            d.scale(Complex64::new(0.0, s)) - db.scale(Complex64::new(0.0, s))
        })
    }

    /// Serializes to the one-term-per-line text format
    /// `powers_alpha powers_alpha_star re im` (powers comma-separated per mode).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "modes {}", self.num_modes);
        let _ = writeln!(s, "hbar {}", self.hbar);
        for (m, c) in &self.terms {
            let _ = writeln!(s, "{} {} {} {}", join(&m.alpha), join(&m.alpha_star), c.re, c.im);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut modes: Option<usize> = None;
        let mut hbar = 1.0;
        let mut terms: Vec<(MultiIndex, Complex64)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "modes" if fields.len() == 2 => {
                    modes = Some(fields[1].parse().map_err(|e| err(format!("bad mode count: {e}")))?);
                }
                "hbar" if fields.len() == 2 => {
                    hbar = fields[1].parse().map_err(|e| err(format!("bad hbar: {e}")))?;
                }
                _ if fields.len() == 4 => {
                    let pa = parse_powers(fields[0]).map_err(err)?;
                    let pb = parse_powers(fields[1]).map_err(err)?;
                    let re: f64 = fields[2].parse().map_err(|e| err(format!("bad real part: {e}")))?;
                    let im: f64 = fields[3].parse().map_err(|e| err(format!("bad imaginary part: {e}")))?;
                    let m = MultiIndex::new(pa, pb).map_err(|e| err(e.to_string()))?;
                    terms.push((m, Complex64::new(re, im)));
                }
                _ => return Err(err(format!("expected 4 fields, got {}", fields.len()))),
            }
        }
        let n = match (modes, terms.first()) {
            (Some(n), _) => n,
            (None, Some((m, _))) => m.num_modes(),
            (None, None) => return Err(Error::InvalidPolynomial("empty symbol file without a modes line".into())),
        };
        if n == 0 {
            return Err(Error::InvalidPolynomial("mode count must be positive".into()));
        }
        let mut p = Self::zero(n).with_hbar(hbar)?;
        for (m, c) in terms {
            p.add_term(m, c)?;
        }
        Ok(p)
    }

    fn combine(mut self, rhs: &Self, sign: f64) -> Self {
        assert_eq!(self.num_modes, rhs.num_modes, "mode count mismatch");
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c * sign).expect("mode count checked");
        }
        self
    }
}

impl Add for ComplexPolynomial {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.combine(&rhs, 1.0)
    }
}

impl Sub for ComplexPolynomial {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.combine(&rhs, -1.0)
    }
}

impl Neg for ComplexPolynomial {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn mul(self, rhs: &ComplexPolynomial) -> ComplexPolynomial {
        assert_eq!(self.num_modes, rhs.num_modes, "mode count mismatch");
        let mut out = ComplexPolynomial::zero(self.num_modes);
        out.hbar = self.hbar;
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let key = MultiIndex {
                    alpha: ma.alpha.iter().zip(&mb.alpha).map(|(a, b)| a + b).collect(),
                    alpha_star: ma.alpha_star.iter().zip(&mb.alpha_star).map(|(a, b)| a + b).collect(),
                };
                out.add_term(key, ca * cb).expect("mode count checked");
            }
        }
        out
    }
}

fn falling_factorial(n: u32, k: u32) -> f64 {
    (0..k).map(|j| f64::from(n - j)).product()
}

fn join(v: &[u32]) -> String {
    v.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

fn parse_powers(s: &str) -> std::result::Result<Vec<u32>, String> {
    s.split(',').map(|p| p.parse::<u32>().map_err(|e| format!("bad power {p:?}: {e}"))).collect()
}

/// `α_i = (x_i + i y_i)/√2` for `φ = (x, y)`.
pub fn alpha_from_phi(phi: &[f64]) -> Vec<Complex64> {
    let n = phi.len() / 2;
    (0..n).map(|i| Complex64::new(phi[i], phi[n + i]) / SQRT_2).collect()
}

pub fn phi_from_alpha(alpha: &[Complex64]) -> Vec<f64> {
    let n = alpha.len();
    let mut phi = vec![0.0; 2 * n];
    for (i, a) in alpha.iter().enumerate() {
        phi[i] = a.re * SQRT_2;
        phi[n + i] = a.im * SQRT_2;
    }
    phi
}

/// Drift of the first-order bracket in standard real coordinates:
/// `A_x = ∂H/∂y`, `A_y = -∂H/∂x`.
///
/// Holds the derivative polynomials so repeated evaluation is cheap.
#[derive(Clone, Debug)]
pub struct DriftField {
    num_modes: usize,
    components: Vec<ComplexPolynomial>,
    jacobian: Vec<Vec<ComplexPolynomial>>,
}

impl DriftField {
    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn eval(&self, phi: &[f64]) -> DVector<f64> {
        let alpha = alpha_from_phi(phi);
        DVector::from_iterator(self.components.len(), self.components.iter().map(|c| c.eval_unchecked(&alpha).re))
    }

    pub fn jacobian(&self, phi: &[f64]) -> DMatrix<f64> {
        let alpha = alpha_from_phi(phi);
        let dim = self.components.len();
        DMatrix::from_fn(dim, dim, |i, j| self.jacobian[i][j].eval_unchecked(&alpha).re)
    }

    pub fn divergence(&self, phi: &[f64]) -> f64 {
        let alpha = alpha_from_phi(phi);
        (0..self.components.len()).map(|i| self.jacobian[i][i].eval_unchecked(&alpha).re).sum()
    }

    /// Drift rendered as `dα_i/dt`.
    pub fn eval_complex(&self, alpha: &[Complex64]) -> Vec<Complex64> {
        let v = self.eval(&phi_from_alpha(alpha));
        let n = self.num_modes;
        (0..n).map(|i| Complex64::new(v[i], v[n + i]) / SQRT_2).collect()
    }
}

pub fn drift_field(h: &ComplexPolynomial) -> Result<DriftField> {
    h.require_hermitian()?;
    let n = h.num_modes();
    let grads: Vec<ComplexPolynomial> = (0..2 * n).map(|c| h.real_partial(c)).collect::<Result<_>>()?;
    let mut components = Vec::with_capacity(2 * n);
    for i in 0..n {
        components.push(grads[n + i].clone());
    }
    for i in 0..n {
        components.push(-grads[i].clone());
    }
    let jacobian = components
        .iter()
        .map(|c| (0..2 * n).map(|j| c.real_partial(j)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(DriftField { num_modes: n, components, jacobian })
}

/// `C_ij = ∂²H/∂α*_i ∂α*_j` as polynomials.
fn conjugate_hessian(h: &ComplexPolynomial) -> Result<Vec<Vec<ComplexPolynomial>>> {
    let n = h.num_modes();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut orders = vec![0; n];
                    orders[i] += 1;
                    orders[j] += 1;
                    h.derivative(&orders, true)
                })
                .collect()
        })
        .collect()
}

pub fn diffusion_matrix(h: &ComplexPolynomial, phi: &[f64]) -> Result<DMatrix<f64>> {
    h.require_hermitian()?;
    let n = h.num_modes();
    if phi.len() != 2 * n {
        return Err(Error::Dimension { expected: 2 * n, got: phi.len() });
    }
    let alpha = alpha_from_phi(phi);
    let c = conjugate_hessian(h)?;
    let hb = h.hbar();
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let cij = c[i][j].eval_unchecked(&alpha);
            d[(i, j)] = -hb * cij.im;
            d[(n + i, n + j)] = hb * cij.im;
            d[(i, n + j)] = hb * cij.re;
            d[(n + j, i)] = hb * cij.re;
        }
    }
    Ok(d)
}

/// True when every second conjugate derivative of `h` is a constant.
pub fn has_constant_diffusion(h: &ComplexPolynomial) -> Result<bool> {
    Ok(conjugate_hessian(h)?
        .iter()
        .flatten()
        .all(|p| p.terms().all(|(m, _)| m.total_degree() == 0)))
}

/// Orthogonal change of real coordinates in which the diffusion is
/// `diag(d I, -d I)`. Frame coordinates are `φ_frame = Rᵀ φ_std`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureFrame {
    num_modes: usize,
    rotation: DMatrix<f64>,
    d: f64,
    degenerate: bool,
}

impl QuadratureFrame {
    pub fn identity(num_modes: usize, d: f64) -> Self {
        Self { num_modes, rotation: DMatrix::identity(2 * num_modes, 2 * num_modes), d, degenerate: d == 0.0 }
    }

    pub fn from_rotation(rotation: DMatrix<f64>, d: f64) -> Result<Self> {
        let dim = rotation.nrows();
        if dim == 0 || dim % 2 != 0 || rotation.ncols() != dim {
            return Err(Error::Dimension { expected: dim, got: rotation.ncols() });
        }
        let defect = (rotation.transpose() * &rotation - DMatrix::identity(dim, dim)).amax();
        if defect > 1e-10 {
            return Err(Error::Numerical(format!("frame rotation is not orthogonal (defect {defect:.2e})")));
        }
        Ok(Self { num_modes: dim / 2, rotation, d, degenerate: d == 0.0 })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Set when the diffusion vanishes identically and no (x, y) split exists.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn std_to_frame(&self, phi_std: &[f64]) -> DVector<f64> {
        self.rotation.tr_mul(&DVector::from_column_slice(phi_std))
    }

    pub fn frame_to_std(&self, phi: &[f64]) -> DVector<f64> {
        &self.rotation * DVector::from_column_slice(phi)
    }

    pub fn forward(&self, alpha: &[Complex64]) -> DVector<f64> {
        self.std_to_frame(&phi_from_alpha(alpha))
    }

    pub fn inverse(&self, phi: &[f64]) -> Vec<Complex64> {
        alpha_from_phi(self.frame_to_std(phi).as_slice())
    }

    /// Expresses a standard-coordinate matrix (e.g. `D` or a drift Jacobian)
    /// in frame coordinates.
    pub fn conjugate(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.rotation.transpose() * m * &self.rotation
    }
}

pub fn diagonalize_diffusion(h: &ComplexPolynomial) -> Result<QuadratureFrame> {
    h.require_hermitian()?;
    if !has_constant_diffusion(h)? {
        return Err(Error::UnsupportedHamiltonian(
            "diffusion depends on the phase-space point; only constant diffusion can be diagonalized".into(),
        ));
    }
    let n = h.num_modes();
    let d_std = diffusion_matrix(h, &vec![0.0; 2 * n])?;
    let scale = d_std.amax();
    if scale < 1e-14 {
        log::warn!("diffusion vanishes identically; returning a degenerate frame with d = 0");
        return Ok(QuadratureFrame::identity(n, 0.0));
    }
    let eig = d_std.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let d = values[0];
    let balanced = values[..n].iter().all(|v| (v - d).abs() <= 1e-9 * scale)
        && values[n..].iter().all(|v| (v + d).abs() <= 1e-9 * scale)
        && d > 0.0;
    if !balanced {
        return Err(Error::NotTraceless(values));
    }
    let mut rotation = DMatrix::zeros(2 * n, 2 * n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        // sign convention: largest component positive
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        rotation.set_column(col, &v);
    }
    QuadratureFrame::from_rotation(rotation, d)
}
