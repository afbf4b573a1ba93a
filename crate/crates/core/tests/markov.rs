use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsqlab_core::bridge::{gaussian_bridge_exact, sample_bridges, BridgeBoundary, SamplerConfig};
use tsqlab_core::drift::{AffineDrift, BridgeSystem, CubicDrift};
use tsqlab_core::grid::{Axis, PhaseGrid};
use tsqlab_core::markov::ci::conditional_covariance;
use tsqlab_core::markov::sweep::fgz_grid;
use tsqlab_core::markov::*;
use tsqlab_core::Error;
use tsqlab_oracle::quadratic_form::{oracle_gaussian_quadratic_form, AffineSystem, MixedBoundary};
use tsqlab_oracle::schur::oracle_schur_ci;

fn coupled_m() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.3, 0.5])
}

fn sys_of(m: DMatrix<f64>, d: f64) -> BridgeSystem {
    BridgeSystem::affine(m, DVector::zeros(2), d).unwrap()
}

fn prep(mean: [f64; 2], cov: [f64; 3]) -> GaussianPreparation {
    GaussianPreparation::new(DVector::from_vec(mean.to_vec()), DMatrix::from_row_slice(2, 2, &[cov[0], cov[1], cov[1], cov[2]])).unwrap()
}

fn moments(j: &MultiTimeJoint) -> (DVector<f64>, DMatrix<f64>) {
    match &j.data {
        JointData::Gaussian { mean, cov } => (mean.clone(), cov.clone()),
        JointData::Samples { .. } => panic!("expected a Gaussian joint"),
    }
}

/// Joint moments of `(φ_IN, z)` assembled from the oracle's quadratic form,
/// then restricted to path coordinates `(step, comp)`.
fn oracle_joint(
    m: &DMatrix<f64>,
    d: f64,
    p_in: &GaussianPreparation,
    steps: usize,
    coords: &[(usize, usize)],
) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows() / 2;
    let sys = AffineSystem { m: m.clone(), c: DVector::zeros(2 * n), d };
    let bnd = |phi: &DVector<f64>| MixedBoundary {
        t0: 0.0,
        tf: 1.0,
        steps,
        x0: phi.rows(0, n).into_owned(),
        yf: phi.rows(n, n).into_owned(),
    };
    let (p, b0, _) = oracle_gaussian_quadratic_form(&sys, &bnd(&DVector::zeros(2 * n)));
    let len = p.nrows();
    let mut gain_b = DMatrix::zeros(len, 2 * n);
    for i in 0..2 * n {
        let (_, bi, _) = oracle_gaussian_quadratic_form(&sys, &bnd(&DVector::from_fn(2 * n, |r, _| if r == i { 1.0 } else { 0.0 })));
        gain_b.set_column(i, &(bi - &b0));
    }
    let p_inv = p.try_inverse().unwrap();
    let k = &p_inv * gain_b;
    let z0 = &p_inv * b0;
    let ext = 2 * n + len;
    let mut mean = DVector::zeros(ext);
    mean.rows_mut(0, 2 * n).copy_from(&p_in.mean);
    mean.rows_mut(2 * n, len).copy_from(&(&z0 + &k * &p_in.mean));
    let mut cov = DMatrix::zeros(ext, ext);
    cov.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&p_in.cov);
    let kc = &k * &p_in.cov;
    cov.view_mut((2 * n, 0), (len, 2 * n)).copy_from(&kc);
    cov.view_mut((0, 2 * n), (2 * n, len)).copy_from(&kc.transpose());
    cov.view_mut((2 * n, 2 * n), (len, len)).copy_from(&(&kc * k.transpose() + &p_inv));
    let index = |(step, comp): (usize, usize)| -> usize {
        if step == 0 {
            if comp < n { comp } else { 2 * n + comp - n }
        } else if step == steps {
            if comp >= n { comp } else { 2 * n + n + (steps - 1) * 2 * n + comp }
        } else {
            2 * n + n + (step - 1) * 2 * n + comp
        }
    };
    let idx: Vec<usize> = coords.iter().map(|&c| index(c)).collect();
    (
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| mean[i])),
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| cov[(idx[a], idx[b])]),
    )
}

mod joint_moments {
    use super::*;

    #[test]
    fn zero_drift_blocks_are_uncorrelated() {
        let p = prep([0.1, -0.2], [0.4, 0.0, 0.7]);
        let j = gaussian_joint(&sys_of(DMatrix::zeros(2, 2), 0.5), &p, 0.0, 1.0, 16, &[0, 4, 8, 12, 16]).unwrap();
        let (_, cov) = moments(&j);
        for (a, ca) in j.coords.iter().enumerate() {
            for (b, cb) in j.coords.iter().enumerate() {
                if ca.comp != cb.comp {
                    assert_eq!(cov[(a, b)], 0.0);
                }
            }
        }
    }

    #[test]
    fn coupled_drift_matches_oracle_assembly() {
        let m = coupled_m();
        let p = prep([0.3, -0.4], [0.5, 0.2, 0.6]);
        let steps = 12;
        let j = gaussian_joint(&sys_of(m.clone(), 0.4), &p, 0.0, 1.0, steps, &[0, 3, 6, 12]).unwrap();
        let coords: Vec<(usize, usize)> = j.coords.iter().map(|c| (c.step, c.comp)).collect();
        let (mu, cov) = moments(&j);
        let (omu, ocov) = oracle_joint(&m, 0.4, &p, steps, &coords);
        assert!((&mu - omu).amax() < 1e-9);
        assert!((&cov - &ocov).amax() < 1e-9);
        let x1 = j.index(0, 0).unwrap();
        let y3 = j.index(12, 1).unwrap();
        let x2 = j.index(6, 0).unwrap();
        let y2 = j.index(6, 1).unwrap();
        assert!(cov[(x2, y2)].abs() > 1e-3, "coupling should correlate x and y at one time");
        assert!(cov[(x1, y3)].abs() > 1e-3);
    }

    /// Far from both ends of a long interval, a time-independent stable
    /// drift gives covariances that depend on the time difference only.
    #[test]
    fn long_interval_covariances_are_stationary() {
        let sys = sys_of(coupled_m(), 0.5);
        let p = GaussianPreparation::fixed(&[0.0], &[0.0]).unwrap();
        let steps = 400;
        let j = gaussian_joint(&sys, &p, 0.0, 80.0, steps, &[175, 185, 200, 210]).unwrap();
        let (_, cov) = moments(&j);
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let early = cov[(j.index(175, a).unwrap(), j.index(185, b).unwrap())];
            let late = cov[(j.index(200, a).unwrap(), j.index(210, b).unwrap())];
            assert!((early - late).abs() < 1e-8, "({a},{b}): {early} vs {late}");
        }
    }

    #[test]
    fn non_affine_drift_is_unsupported() {
        let base = AffineDrift::linear(coupled_m()).unwrap();
        let drift = CubicDrift::new(base, 0.02, DVector::from_vec(vec![-1.0, 1.0])).unwrap();
        let sys = BridgeSystem::new(Arc::new(drift), 0.5).unwrap();
        let p = GaussianPreparation::fixed(&[0.0], &[0.0]).unwrap();
        assert!(matches!(gaussian_joint(&sys, &p, 0.0, 1.0, 8, &[0, 4, 8]), Err(Error::Unsupported(_))));
    }
}

mod screening {
    use super::*;

    fn screening_joint(m: DMatrix<f64>, p: &GaussianPreparation) -> MultiTimeJoint {
        gaussian_joint(&sys_of(m, 0.5), p, 0.0, 1.0, 32, &[0, 16, 32]).unwrap()
    }

    fn oracle_stat(j: &MultiTimeJoint) -> f64 {
        let (_, cov) = moments(j);
        oracle_schur_ci(&cov, &j.x(0).unwrap(), &j.y(32).unwrap(), &j.phi(16).unwrap()).unwrap()
    }

    #[test]
    fn verdicts_for_the_three_reference_cases() {
        let opts = PermutationOptions::default();
        let decoupled = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5]);
        let product = prep([0.2, -0.1], [0.5, 0.0, 0.6]);
        let generic = prep([0.2, -0.1], [0.5, 0.3, 0.6]);
        let cases = [(decoupled, &product, Verdict::Independent), (coupled_m(), &generic, Verdict::Dependent), (coupled_m(), &product, Verdict::Independent)];
        for (m, p, expected) in cases {
            let j = screening_joint(m, p);
            let r = markov_screening_test(&j, &opts).unwrap();
            assert_eq!(r.verdict, expected, "{r:?}");
            assert_eq!(r.backend, Backend::GaussianExact);
            assert!(r.p_value.is_none() && r.n_samples == 0);
            let oracle = oracle_stat(&j);
            if expected == Verdict::Independent {
                assert!(oracle < 1e-10, "oracle {oracle}");
            } else {
                assert!(oracle > 1e-3);
            }
        }
    }

    #[test]
    fn conditional_covariance_matches_precision_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.6..0.6));
            let p = prep([0.0, 0.0], [rng.random_range(0.3..1.0), rng.random_range(-0.2..0.2), rng.random_range(0.3..1.0)]);
            let j = screening_joint(m, &p);
            let (_, cov) = moments(&j);
            let (a, b, c) = (j.x(0).unwrap(), j.y(32).unwrap(), j.phi(16).unwrap());
            let ab: Vec<usize> = a.iter().chain(&b).copied().collect();
            let s = conditional_covariance(&cov, &ab, &c);
            let ours = s[(0, 1)].abs();
            let oracle = oracle_stat(&j);
            assert!((ours - oracle).abs() < 1e-10 * (1.0 + oracle), "{ours} vs {oracle}");
        }
    }

    /// The if-and-only-if between screening-off and factorization of
    /// `P_IN / Z`, over a randomized family of affine instances.
    #[test]
    fn randomized_family_agrees_with_factorization() {
        let inst = screening_sweep(10, 2024).unwrap();
        assert_eq!(inst.len(), 30);
        assert!(inst.iter().all(ScreeningInstance::agrees), "disagreement in sweep");
        let coupled: Vec<_> = inst.iter().filter(|i| i.kind == InstanceKind::CoupledGeneric).collect();
        let dependent = coupled.iter().filter(|i| i.result.verdict == Verdict::Dependent).count();
        assert!(dependent as f64 >= 0.95 * coupled.len() as f64);
        for i in inst.iter().filter(|i| i.kind != InstanceKind::CoupledGeneric) {
            assert_eq!(i.result.verdict, Verdict::Independent, "{}", i.id);
        }
    }

    #[test]
    fn screening_needs_three_steps() {
        let j = gaussian_joint(&sys_of(coupled_m(), 0.5), &prep([0.0, 0.0], [1.0, 0.0, 1.0]), 0.0, 1.0, 8, &[0, 8]).unwrap();
        assert!(matches!(markov_screening_test(&j, &PermutationOptions::default()), Err(Error::Arity { .. })));
    }

    #[test]
    fn verdict_table_has_one_row_per_result() {
        let j = screening_joint(coupled_m(), &prep([0.0, 0.0], [0.5, 0.2, 0.5]));
        let r = markov_screening_test(&j, &PermutationOptions::default()).unwrap();
        let csv = verdict_csv(&[VerdictRow { instance_id: "c0".into(), test: "screening".into(), result: r }]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "instance_id,test,statistic,threshold,verdict,backend,n_samples,seed");
        assert!(lines[1].starts_with("c0,screening,"));
        assert!(lines[1].contains(",dependent,gaussian-exact,0,"));
    }
}

mod fgz {
    use super::*;

    #[test]
    fn reconstruction_matches_the_direct_joint() {
        let m = coupled_m();
        let sys = sys_of(m, 0.5);
        let p = prep([0.2, -0.3], [0.5, 0.25, 0.7]);
        let (steps, k2) = (32, 12);
        let grid = fgz_grid(&sys, &p, 0.0, 1.0, steps, k2).unwrap();
        let fgz = fgz_decomposition(&sys, 0.0, 1.0, steps, k2, grid).unwrap();
        let j = gaussian_joint(&sys, &p, 0.0, 1.0, steps, &[0, k2, steps]).unwrap();
        let idx = [j.index(0, 0).unwrap(), j.index(steps, 1).unwrap(), j.index(k2, 0).unwrap(), j.index(k2, 1).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-0.8..0.8)).collect();
            let direct = j.density(&idx, &v).unwrap();
            let rebuilt = fgz.joint(&p, &v[0..1], &v[1..2], &v[2..3], &v[3..4]).unwrap();
            assert!((rebuilt - direct).abs() <= 1e-6 * direct, "{rebuilt} vs {direct}");
        }
    }

    #[test]
    fn f_and_g_are_normalized_kernels() {
        let sys = sys_of(coupled_m(), 0.5);
        let p = prep([0.0, 0.0], [0.5, 0.0, 0.5]);
        let grid = fgz_grid(&sys, &p, 0.0, 1.0, 32, 16).unwrap();
        let fgz = fgz_decomposition(&sys, 0.0, 1.0, 32, 16, grid.clone()).unwrap();
        let axis = grid.axis(0);
        let f_mass: f64 = axis.coords().iter().map(|&x2| fgz.f(&[x2], &[0.1], &[0.2])).sum::<f64>() * axis.h;
        let yaxis = grid.axis(1);
        let g_mass: f64 = yaxis.coords().iter().map(|&y2| fgz.g(&[0.1], &[y2], &[-0.2])).sum::<f64>() * yaxis.h;
        assert!((f_mass - 1.0).abs() < 1e-8 && (g_mass - 1.0).abs() < 1e-8, "{f_mass} {g_mass}");
    }

    /// For affine drift `Z` does not depend on the boundary data, coupled
    /// or not: the product of two affine-Gaussian kernels integrates to a
    /// Jacobian.
    #[test]
    fn affine_normalizer_is_constant() {
        for m in [coupled_m(), DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5])] {
            let sys = sys_of(m, 0.5);
            let p = prep([0.0, 0.0], [0.5, 0.0, 0.5]);
            let grid = fgz_grid(&sys, &p, 0.0, 1.0, 32, 16).unwrap();
            let fgz = fgz_decomposition(&sys, 0.0, 1.0, 32, 16, grid).unwrap();
            let z0 = fgz.z_checked(&[0.0], &[0.0]).unwrap();
            for (a, b) in [(0.3, -0.2), (-0.4, 0.1), (0.2, 0.25)] {
                let z = fgz.z_checked(&[a], &[b]).unwrap();
                assert!((z / z0 - 1.0).abs() < 1e-9, "{z} vs {z0}");
            }
            assert!(fgz.log_z_mixed(&[0.0], &[0.0], 0, 0, 0.05).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn coarse_quadrature_is_rejected() {
        let sys = sys_of(coupled_m(), 0.5);
        let grid = PhaseGrid::new(vec![Axis::span(-3.0, 3.0, 0.35).unwrap(), Axis::span(-3.0, 3.0, 0.35).unwrap()]).unwrap();
        let fgz = fgz_decomposition(&sys, 0.0, 1.0, 32, 16, grid).unwrap();
        assert!(matches!(fgz.z_checked(&[0.0], &[0.0]), Err(Error::InvalidGrid(_))));
    }
}

mod bernstein {
    use super::*;

    const STEPS: usize = 32;

    fn five() -> FiveSteps {
        FiveSteps::new(0, 8, 16, 24, STEPS).unwrap()
    }

    fn all_steps() -> [usize; 5] {
        [0, 8, 16, 24, STEPS]
    }

    #[test]
    fn exact_bernstein_holds_for_random_affine_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let opts = PermutationOptions::default();
        for _ in 0..6 {
            let m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.6..0.6));
            let sys = sys_of(m, rng.random_range(0.2..0.8));
            for p in [GaussianPreparation::fixed(&[0.4], &[-0.3]).unwrap(), prep([0.1, 0.2], [0.6, 0.3, 0.5])] {
                let j = gaussian_joint(&sys, &p, 0.0, 1.0, STEPS, &all_steps()).unwrap();
                for ends in [EndpointData::Mixed, EndpointData::Full] {
                    let r = bernstein_test(&j, five(), ends, &opts).unwrap();
                    assert_eq!(r.verdict, Verdict::Independent, "{ends:?}: {r:?}");
                    assert!(r.statistic < 1e-10);
                }
                let (_, cov) = moments(&j);
                let mut c = j.phi(16).unwrap();
                c.extend(j.x(0).unwrap());
                c.extend(j.y(STEPS).unwrap());
                let c: Vec<usize> = c.into_iter().filter(|&i| cov[(i, i)] > 0.0).collect();
                let oracle = oracle_schur_ci(&cov, &j.phi(8).unwrap(), &j.phi(24).unwrap(), &c).unwrap();
                assert!(oracle < 1e-10, "oracle {oracle}");
            }
        }
    }

    #[test]
    fn conditioning_on_x_alone_leaves_dependence() {
        let sys = sys_of(coupled_m(), 0.5);
        let p = GaussianPreparation::fixed(&[0.4], &[-0.3]).unwrap();
        let j = gaussian_joint(&sys, &p, 0.0, 1.0, STEPS, &all_steps()).unwrap();
        let r = ci_blocks(&j, &[Block::Phi(8)], &[Block::Phi(24)], &[Block::X(16)], &PermutationOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Dependent);
        let (_, cov) = moments(&j);
        assert!(oracle_schur_ci(&cov, &j.phi(8).unwrap(), &j.phi(24).unwrap(), &j.x(16).unwrap()).unwrap() > 1e-3);
    }

    #[test]
    fn interior_shielding_is_exact() {
        let opts = PermutationOptions::default();
        for m in [coupled_m(), DMatrix::zeros(2, 2)] {
            let sys = sys_of(m, 0.5);
            let j = gaussian_joint(&sys, &prep([0.1, 0.2], [0.6, 0.3, 0.5]), 0.0, 1.0, STEPS, &all_steps()).unwrap();
            let r = interior_shielding_test(&j, five(), &opts).unwrap();
            assert_eq!(r.verdict, Verdict::Independent, "{r:?}");
            let (_, cov) = moments(&j);
            let b: Vec<usize> = j.phi(0).unwrap().into_iter().chain(j.phi(STEPS).unwrap()).collect();
            let c: Vec<usize> = j.phi(8).unwrap().into_iter().chain(j.phi(24).unwrap()).collect();
            assert!(oracle_schur_ci(&cov, &j.phi(16).unwrap(), &b, &c).unwrap() < 1e-10);
        }
    }

    #[test]
    fn partial_bracketing_leaves_dependence() {
        let sys = sys_of(coupled_m(), 0.5);
        let j = gaussian_joint(&sys, &prep([0.1, 0.2], [0.6, 0.3, 0.5]), 0.0, 1.0, STEPS, &all_steps()).unwrap();
        let r = ci_blocks(
            &j,
            &[Block::Phi(16)],
            &[Block::Phi(0), Block::Phi(STEPS)],
            &[Block::X(8), Block::X(24)],
            &PermutationOptions::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Dependent);
    }

    #[test]
    fn sampled_weak_cubic_drift_keeps_the_bernstein_property() {
        let base = AffineDrift::linear(coupled_m()).unwrap();
        let drift = CubicDrift::new(base, 0.02, DVector::from_vec(vec![-1.0, 1.0])).unwrap();
        let sys = BridgeSystem::new(Arc::new(drift), 0.5).unwrap();
        let b = BridgeBoundary::new(0.0, 1.0, vec![0.4], vec![-0.3]).unwrap();
        let ens = sample_bridges(&sys, &b, STEPS, 10_000, 1, &SamplerConfig::default()).unwrap();
        let j = MultiTimeJoint::from_ensemble(&ens, &all_steps()).unwrap();
        let opts = PermutationOptions { seed: 11, ..Default::default() };
        let r = bernstein_test(&j, five(), EndpointData::Mixed, &opts).unwrap();
        assert_eq!(r.backend, Backend::Permutation);
        assert_eq!(r.n_samples, 10_000);
        assert_eq!(r.seed, Some(1));
        assert_eq!(r.verdict, Verdict::Independent, "{r:?}");
        let control = ci_blocks(&j, &[Block::Phi(8)], &[Block::Phi(24)], &[Block::X(16)], &opts).unwrap();
        assert_eq!(control.verdict, Verdict::Dependent, "{control:?}");
    }
}

mod lambda {
    use super::*;

    fn grid() -> PhaseGrid {
        let a = Axis::span(-5.0, 5.0, 0.05).unwrap();
        PhaseGrid::new(vec![a, a]).unwrap()
    }

    fn preps() -> (GaussianPreparation, GaussianPreparation) {
        (prep([0.2, -0.1], [0.5, 0.2, 0.6]), prep([-0.3, 0.4], [0.3, -0.1, 0.9]))
    }

    fn probes() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![0.3, -0.2], vec![-0.2, 0.3]]
    }

    #[test]
    fn identical_preparations_give_zero_distance() {
        let sys = sys_of(coupled_m(), 0.5);
        let (r1, _) = preps();
        let rep = lambda_mediation_test(&sys, 0.0, 1.0, 32, &r1, &r1, &probes(), &probes(), &grid()).unwrap();
        assert!(rep.sup_conditional() <= rep.noise);
        assert!(rep.kernel_agrees());
    }

    #[test]
    fn conditionals_differ_while_the_kernel_does_not() {
        let sys = sys_of(coupled_m(), 0.5);
        let (r1, r2) = preps();
        let rep = lambda_mediation_test(&sys, 0.0, 1.0, 32, &r1, &r2, &probes(), &probes(), &grid()).unwrap();
        assert!(rep.conditionals_differ(), "{rep:?}");
        assert!(rep.kernel_agrees(), "{rep:?}");
        assert!(rep.sup_conditional() > 0.05);
    }

    /// `P_R(φ2 | φ1) = K(x2, y1 | y2, x1) P_IN(x1, y2) / P_R(φ1)` with the
    /// kernel taken straight from the bridge law.
    #[test]
    fn time_oriented_conditional_follows_bayes() {
        let sys = sys_of(coupled_m(), 0.5);
        let (r1, _) = preps();
        let steps = 32;
        let j = gaussian_joint(&sys, &r1, 0.0, 1.0, steps, &[0, steps]).unwrap();
        let phi1 = j.phi(0).unwrap();
        let phi2 = j.phi(steps).unwrap();
        let all: Vec<usize> = phi1.iter().chain(&phi2).copied().collect();
        let (x1, y1, x2, y2) = (0.3, -0.1, 0.2, 0.4);
        let lhs = j.density(&all, &[x1, y1, x2, y2]).unwrap() / j.density(&phi1, &[x1, y1]).unwrap();
        let bridge = gaussian_bridge_exact(&sys, &BridgeBoundary::new(0.0, 1.0, vec![x1], vec![y2]).unwrap(), steps).unwrap();
        let (mu, cov) = bridge.joint(&[(steps, 0), (0, 1)]);
        let r = DVector::from_vec(vec![x2 - mu[0], y1 - mu[1]]);
        let det = cov.determinant();
        let kernel = (-0.5 * r.dot(&(cov.clone().try_inverse().unwrap() * &r))).exp() / (2.0 * std::f64::consts::PI * det.sqrt());
        let p_in = r1.density(&DVector::from_vec(vec![x1, y2])).unwrap();
        let rhs = kernel * p_in / j.density(&phi1, &[x1, y1]).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn far_probe_is_a_disjoint_support_error() {
        let sys = sys_of(coupled_m(), 0.5);
        let (r1, r2) = preps();
        let far = vec![vec![40.0, 40.0]];
        assert!(matches!(
            lambda_mediation_test(&sys, 0.0, 1.0, 32, &r1, &r2, &far, &[], &grid()),
            Err(Error::DisjointSupport(_))
        ));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The normalized statistic ignores rescaling of individual coordinates
    /// and is symmetric in the two sets.
    #[test]
    fn gaussian_statistic_is_scale_free_and_symmetric(
        seed in 0u64..1000,
        scale in prop::collection::vec(0.1f64..10.0, 4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let cov = &a * a.transpose() + DMatrix::identity(4, 4) * 0.1;
        let s = DMatrix::from_diagonal(&DVector::from_vec(scale));
        let scaled = &s * &cov * &s;
        let r = gaussian_ci(&cov, &[0], &[1, 2], &[3]).unwrap();
        let rs = gaussian_ci(&scaled, &[0], &[1, 2], &[3]).unwrap();
        let swapped = gaussian_ci(&cov, &[1, 2], &[0], &[3]).unwrap();
        prop_assert!((r.statistic - rs.statistic).abs() < 1e-9 * (1.0 + r.statistic));
        prop_assert!((r.statistic - swapped.statistic).abs() < 1e-12);
    }
}
