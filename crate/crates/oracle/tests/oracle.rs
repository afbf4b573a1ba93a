use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use tsqlab_oracle::normal_ordering::{oracle_normal_ordering, Ladder, OperatorPolynomial};
use tsqlab_oracle::quadratic_form::{oracle_gaussian_quadratic_form, oracle_shooting_mean, AffineSystem, MixedBoundary};
use tsqlab_oracle::schur::oracle_schur_ci;
use tsqlab_oracle::OracleCache;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn word(letters: &[Ladder]) -> OperatorPolynomial {
    let mut p = OperatorPolynomial::default();
    p.push(ONE, letters.to_vec());
    p
}

#[test]
fn oracle_crate_is_independent_of_the_core_crate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let manifest = fs::read_to_string(root.join("Cargo.toml")).unwrap();
    assert!(!manifest.contains("tsqlab-core"));
    for entry in fs::read_dir(root.join("src")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.contains("tsqlab_core"), "{} refers to the core crate", path.display());
    }
}

#[test]
fn distinct_modes_commute() {
    let a0 = Ladder::Lower(0);
    let ad1 = Ladder::Raise(1);
    let left = oracle_normal_ordering(&word(&[a0, ad1]), 2, 4);
    let right = oracle_normal_ordering(&word(&[ad1, a0]), 2, 4);
    assert!((left - right).norm() < 1e-12);
}

#[test]
fn number_operator_is_diagonal_with_level_counts() {
    let n = oracle_normal_ordering(&word(&[Ladder::Raise(0), Ladder::Lower(0)]), 1, 10);
    for i in 0..=10 {
        for j in 0..=10 {
            let want = if i == j { i as f64 } else { 0.0 };
            assert!((n[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn anti_normal_symbol_of_alpha_alpha_star_is_number_plus_one() {
    let op = OperatorPolynomial::anti_normal_from_symbol(&[(vec![1], vec![1], ONE)]);
    let m = oracle_normal_ordering(&op, 1, 8);
    let expected = DMatrix::from_fn(9, 9, |i, j| if i == j { Complex64::new(i as f64 + 1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    assert!((m - expected).norm() < 1e-12);
}

fn zero_drift(d: f64) -> AffineSystem {
    AffineSystem { m: DMatrix::zeros(2, 2), c: DVector::zeros(2), d }
}

fn boundary(steps: usize, x0: f64, yf: f64) -> MixedBoundary {
    MixedBoundary { t0: 0.0, tf: 1.0, steps, x0: DVector::from_element(1, x0), yf: DVector::from_element(1, yf) }
}

/// Free layout `(y0, x1, y1, .., x_{K-1}, y_{K-1}, xK)`: x and y are separate
/// random-walk chains with precision 1/(d Δt) per link.
#[test]
fn zero_drift_precision_is_two_random_walk_chains() {
    let (d, steps) = (0.5, 5);
    let (p, b, _) = oracle_gaussian_quadratic_form(&zero_drift(d), &boundary(steps, 0.3, -0.4));
    let k = 1.0 / (d * (1.0 / steps as f64));
    let len = 2 * steps;
    let xi = |j: usize| if j == steps { len - 1 } else { 1 + 2 * (j - 1) };
    let yi = |j: usize| if j == 0 { 0 } else { 2 + 2 * (j - 1) };
    let mut want = DMatrix::zeros(len, len);
    for j in 0..steps {
        // link x_j -> x_{j+1}, x_0 fixed
        if j > 0 {
            want[(xi(j), xi(j))] += k;
            want[(xi(j), xi(j + 1))] -= k;
            want[(xi(j + 1), xi(j))] -= k;
        }
        want[(xi(j + 1), xi(j + 1))] += k;
        // link y_j -> y_{j+1}, y_K fixed
        want[(yi(j), yi(j))] += k;
        if j + 1 < steps {
            want[(yi(j + 1), yi(j + 1))] += k;
            want[(yi(j), yi(j + 1))] -= k;
            want[(yi(j + 1), yi(j))] -= k;
        }
    }
    assert!((&p - &want).amax() < 1e-8 * k, "{}", (&p - &want).amax());
    // linear term only at the coordinates linked to a fixed endpoint
    assert!((b[xi(1)] - k * 0.3).abs() < 1e-8 * k);
    assert!((b[yi(steps - 1)] + k * 0.4).abs() < 1e-8 * k);
}

#[test]
fn zero_drift_shooting_mean_is_constant() {
    let bnd = boundary(8, 0.3, -0.4);
    let z = oracle_shooting_mean(&zero_drift(0.5), &bnd).unwrap();
    for phi in zero_drift(0.5).path(&bnd, &z) {
        assert!((phi[0] - 0.3).abs() < 1e-12 && (phi[1] + 0.4).abs() < 1e-12);
    }
}

#[test]
fn block_diagonal_covariance_has_no_conditional_dependence() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
    let b = DMatrix::from_row_slice(2, 2, &[1.5, -0.3, -0.3, 0.7]);
    let mut cov = DMatrix::zeros(4, 4);
    cov.view_mut((0, 0), (2, 2)).copy_from(&a);
    cov.view_mut((2, 2), (2, 2)).copy_from(&b);
    assert!(oracle_schur_ci(&cov, &[0], &[2], &[1, 3]).unwrap() < 1e-15);
    assert!(oracle_schur_ci(&cov, &[0], &[1], &[2]).unwrap() > 0.1);
}

#[test]
fn cache_hits_return_identical_results() {
    let mut cache = OracleCache::new();
    let mut calls = 0;
    let mut compute = |x: f64| {
        cache.get_or_compute("square", &[x], "direct", 0.0, || {
            calls += 1;
            vec![x * x]
        })
    };
    let first = compute(1.5);
    let again = compute(1.5);
    let other = compute(-1.5);
    assert_eq!(first, again);
    assert_ne!(first.digest, other.digest);
    assert_eq!(calls, 2);
    assert_eq!(cache.hits(), 1);
    assert_eq!(cache.len(), 2);
    let csv = cache.to_csv();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains(",2.25,direct,0\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratic_form_reproduces_the_action(
        m in prop::collection::vec(-0.8f64..0.8, 4),
        c in prop::collection::vec(-0.5f64..0.5, 2),
        d in 0.2f64..1.0,
        z in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let sys = AffineSystem { m: DMatrix::from_row_slice(2, 2, &m), c: DVector::from_vec(c), d };
        let bnd = boundary(4, 0.2, -0.1);
        let (p, b, s0) = oracle_gaussian_quadratic_form(&sys, &bnd);
        let z = DVector::from_vec(z);
        let quad = 0.5 * z.dot(&(&p * &z)) - b.dot(&z) + s0;
        let direct = sys.action(&bnd, &z);
        prop_assert!((quad - direct).abs() < 1e-8 * (1.0 + direct.abs()));
    }

    #[test]
    fn schur_statistic_is_symmetric_in_the_two_sets(
        l in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let l = DMatrix::from_row_slice(4, 4, &l);
        let cov = &l * l.transpose() + DMatrix::identity(4, 4) * 0.5;
        let ab = oracle_schur_ci(&cov, &[0], &[1, 2], &[3]).unwrap();
        let ba = oracle_schur_ci(&cov, &[1, 2], &[0], &[3]).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12 * (1.0 + ab));
    }
}
