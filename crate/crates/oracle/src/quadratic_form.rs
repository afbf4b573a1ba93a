//! The discretized mixed-boundary action of an affine drift, written out
//! directly, and the linear boundary-value solve that its mode must match.
//!
//! Coordinates are `φ = (x, y)` with `n` components each. The free variables
//! are ordered `z = (y(t0), φ_1, .., φ_{K-1}, x(tf))`.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct AffineSystem {
    /// Drift `A(φ) = m φ + c`.
    pub m: DMatrix<f64>,
    pub c: DVector<f64>,
    /// Diffusion magnitude.
    pub d: f64,
}

#[derive(Clone, Debug)]
pub struct MixedBoundary {
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
    pub x0: DVector<f64>,
    pub yf: DVector<f64>,
}

impl AffineSystem {
    fn half(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn free_len(&self, steps: usize) -> usize {
        2 * self.half() * steps
    }

    /// Fills the full path `φ_0 .. φ_K` from the free vector.
    pub fn path(&self, b: &MixedBoundary, z: &DVector<f64>) -> Vec<DVector<f64>> {
        let n = self.half();
        let k = b.steps;
        let mut out = Vec::with_capacity(k + 1);
        let mut first = DVector::zeros(2 * n);
        first.rows_mut(0, n).copy_from(&b.x0);
        first.rows_mut(n, n).copy_from(&z.rows(0, n));
        out.push(first);
        for j in 1..k {
            out.push(z.rows(n + (j - 1) * 2 * n, 2 * n).into_owned());
        }
        let mut last = DVector::zeros(2 * n);
        last.rows_mut(0, n).copy_from(&z.rows(n + (k - 1) * 2 * n, n));
        last.rows_mut(n, n).copy_from(&b.yf);
        out.push(last);
        out
    }

    /// `S = Σ Δt [ |Δφ/Δt − A(mid)|² / (2d) − V ]` with `V = −tr(m)/2`.
    pub fn action(&self, b: &MixedBoundary, z: &DVector<f64>) -> f64 {
        let path = self.path(b, z);
        let dt = (b.tf - b.t0) / b.steps as f64;
        let v = -0.5 * self.m.trace();
        let mut s = 0.0;
        for w in path.windows(2) {
            let mid = (&w[0] + &w[1]) * 0.5;
            let vel = (&w[1] - &w[0]) / dt;
            let r = vel - (&self.m * mid + &self.c);
            s += dt * (r.norm_squared() / (2.0 * self.d) - v);
        }
        s
    }
}

/// `(P, b, s0)` with `S(z) = ½ zᵀ P z − bᵀ z + s0`, recovered from action
/// values by polarization.
pub fn oracle_gaussian_quadratic_form(sys: &AffineSystem, bnd: &MixedBoundary) -> (DMatrix<f64>, DVector<f64>, f64) {
    let len = sys.free_len(bnd.steps);
    let zero = DVector::zeros(len);
    let s0 = sys.action(bnd, &zero);
    let unit = |i: usize, s: f64| {
        let mut e = DVector::zeros(len);
        e[i] = s;
        e
    };
    let plus: Vec<f64> = (0..len).map(|i| sys.action(bnd, &unit(i, 1.0))).collect();
    let minus: Vec<f64> = (0..len).map(|i| sys.action(bnd, &unit(i, -1.0))).collect();
    let b = DVector::from_fn(len, |i, _| (minus[i] - plus[i]) / 2.0);
    let mut p = DMatrix::zeros(len, len);
    for i in 0..len {
        p[(i, i)] = plus[i] + minus[i] - 2.0 * s0;
        for j in 0..i {
            let mut e = unit(i, 1.0);
            e[j] = 1.0;
            let v = sys.action(bnd, &e) - plus[i] - plus[j] + s0;
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    (p, b, s0)
}

/// Path with zero midpoint residual, `(φ_{k+1} − φ_k)/Δt = m (φ_k + φ_{k+1})/2 + c`,
/// found by shooting on the unknown `y(t0)`. Returned in free-vector layout.
pub fn oracle_shooting_mean(sys: &AffineSystem, bnd: &MixedBoundary) -> Option<DVector<f64>> {
    let n = sys.half();
    let dt = (bnd.tf - bnd.t0) / bnd.steps as f64;
    let eye = DMatrix::<f64>::identity(2 * n, 2 * n);
    let lhs = &eye / dt - &sys.m * 0.5;
    let rhs = &eye / dt + &sys.m * 0.5;
    let lu = lhs.lu();
    let step_mat = lu.solve(&rhs)?;
    let step_off = lu.solve(&sys.c)?;
    // φ_K = F φ_0 + g
    let mut f = DMatrix::<f64>::identity(2 * n, 2 * n);
    let mut g = DVector::<f64>::zeros(2 * n);
    for _ in 0..bnd.steps {
        f = &step_mat * f;
        g = &step_mat * g + &step_off;
    }
    // y-block of φ_K = F_yx x0 + F_yy y0 + g_y
    let f_yy = f.view((n, n), (n, n)).into_owned();
    let f_yx = f.view((n, 0), (n, n)).into_owned();
    let target = &bnd.yf - f_yx * &bnd.x0 - g.rows(n, n);
    let y0 = f_yy.lu().solve(&target)?;
    let mut phi = DVector::zeros(2 * n);
    phi.rows_mut(0, n).copy_from(&bnd.x0);
    phi.rows_mut(n, n).copy_from(&y0);
    let mut z = DVector::zeros(sys.free_len(bnd.steps));
    z.rows_mut(0, n).copy_from(&y0);
    for j in 1..=bnd.steps {
        phi = &step_mat * phi + &step_off;
        if j < bnd.steps {
            z.rows_mut(n + (j - 1) * 2 * n, 2 * n).copy_from(&phi);
        } else {
            z.rows_mut(n + (j - 1) * 2 * n, n).copy_from(&phi.rows(0, n));
        }
    }
    Some(z)
}
