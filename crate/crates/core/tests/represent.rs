use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use tsqlab_core::drift::BridgeSystem;
use tsqlab_core::grid::{Axis, PhaseGrid};
use tsqlab_core::husimi::FockState;
use tsqlab_core::propagator::{total_variation, BoundaryAtom};
use tsqlab_core::represent::*;
use tsqlab_core::symbol::{ComplexPolynomial, MultiIndex};
use tsqlab_oracle::quadratic_form::{oracle_gaussian_quadratic_form, AffineSystem, MixedBoundary};

const TIMES: [f64; 5] = [0.25, 0.375, 0.5, 0.625, 0.75];
const FIT: [usize; 3] = [0, 2, 4];
const HELD: [usize; 2] = [1, 3];

fn term(h: &mut ComplexPolynomial, p: u32, q: u32, c: Complex64) {
    h.add_term(MultiIndex::new(vec![p], vec![q]).unwrap(), c).unwrap();
}

/// `ω(αα* − 1) + (iκ/2)(α*² − α²)` with `ω = 0.3`, `κ = 0.5`.
fn squeezed_rotor() -> ComplexPolynomial {
    let mut h = ComplexPolynomial::zero(1);
    term(&mut h, 1, 1, Complex64::new(0.3, 0.0));
    term(&mut h, 0, 0, Complex64::new(-0.3, 0.0));
    term(&mut h, 0, 2, Complex64::new(0.0, 0.25));
    term(&mut h, 2, 0, Complex64::new(0.0, -0.25));
    h
}

fn harmonic() -> ComplexPolynomial {
    let mut h = ComplexPolynomial::zero(1);
    term(&mut h, 1, 1, Complex64::new(1.0, 0.0));
    term(&mut h, 0, 0, Complex64::new(-1.0, 0.0));
    h
}

fn grid(lim: f64, h: f64) -> PhaseGrid {
    PhaseGrid::new(vec![Axis::span(-lim, lim, h).unwrap(), Axis::span(-lim, lim, h).unwrap()]).unwrap()
}

fn sampled(budget: usize) -> DesignConfig {
    DesignConfig { source: ColumnSource::Sampled { budget }, ..Default::default() }
}

fn exact() -> DesignConfig {
    DesignConfig { source: ColumnSource::Exact, ..Default::default() }
}

/// Normal density of `φ(t)` from the oracle's quadratic form of the action.
fn oracle_column(sys: &BridgeSystem, atom: &BoundaryAtom, steps: usize, t: f64, g: &PhaseGrid) -> Vec<f64> {
    let (m, c) = sys.drift.affine().unwrap();
    let osys = AffineSystem { m, c, d: sys.d };
    let bnd = MixedBoundary {
        t0: 0.0,
        tf: 1.0,
        steps,
        x0: DVector::from_vec(atom.x0.clone()),
        yf: DVector::from_vec(atom.yf.clone()),
    };
    let (p, b, _) = oracle_gaussian_quadratic_form(&osys, &bnd);
    let cov = p.clone().try_inverse().unwrap();
    let mean = &cov * b;
    let k = (t * steps as f64).round() as usize;
    let at = 1 + (k - 1) * 2;
    let mu = DVector::from_vec(vec![mean[at], mean[at + 1]]);
    let s = DMatrix::from_fn(2, 2, |i, j| cov[(at + i, at + j)]);
    let inv = s.clone().try_inverse().unwrap();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s.determinant().sqrt());
    g.map(|q| {
        let r = DVector::from_vec(q.to_vec()) - &mu;
        norm * (-0.5 * r.dot(&(&inv * &r))).exp()
    })
}

mod design {
    use super::*;

    #[test]
    fn zero_drift_columns_are_brownian_products() {
        let sys = BridgeSystem::affine(DMatrix::zeros(2, 2), DVector::zeros(2), 0.5).unwrap();
        let atoms = vec![BoundaryAtom::new(vec![0.4], vec![-0.7], 0.5), BoundaryAtom::new(vec![-1.0], vec![0.2], 0.5)];
        let g = grid(5.0, 0.1);
        let d = build_design_matrix(&sys, &atoms, &TIMES, &g, &exact(), 0).unwrap();
        let gauss = |v: f64, m: f64, var: f64| (-(v - m).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        for (a, atom) in atoms.iter().enumerate() {
            for (ti, &t) in TIMES.iter().enumerate() {
                let want = g.map(|p| gauss(p[0], atom.x0[0], 0.5 * t) * gauss(p[1], atom.yf[0], 0.5 * (1.0 - t)));
                let err = d.block(a, ti).iter().zip(&want).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                assert!(err < 1e-9, "atom {a} t {t}: {err}");
            }
        }
    }

    #[test]
    fn quadratic_columns_match_oracle_marginals() {
        let sys = BridgeSystem::from_hamiltonian(&squeezed_rotor()).unwrap();
        let atoms = vec![BoundaryAtom::new(vec![0.5], vec![-0.5], 0.5), BoundaryAtom::new(vec![-1.0], vec![1.0], 0.5)];
        let g = grid(5.0, 0.1);
        let ex = build_design_matrix(&sys, &atoms, &TIMES, &g, &exact(), 0).unwrap();
        let mc = build_design_matrix(&sys, &atoms, &TIMES, &g, &sampled(10_000), 3).unwrap();
        for (a, atom) in atoms.iter().enumerate() {
            for (ti, &t) in TIMES.iter().enumerate() {
                let want = oracle_column(&sys, atom, 64, t, &g);
                let err = ex.block(a, ti).iter().zip(&want).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                assert!(err < 1e-8, "exact column {a} at {t}: {err}");
                let tv = total_variation(&g, mc.block(a, ti), &want);
                assert!(tv <= 0.05, "sampled column {a} at {t}: tv {tv}");
            }
        }
        for masses in mc.column_masses() {
            assert!(masses.iter().all(|m| (m - 1.0).abs() < 1e-3), "{masses:?}");
        }
        assert!(mc.columns.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn duplicate_atoms_give_identical_columns() {
        let sys = BridgeSystem::from_hamiltonian(&squeezed_rotor()).unwrap();
        let a = BoundaryAtom::new(vec![0.3], vec![0.1], 0.5);
        let d = build_design_matrix(&sys, &[a.clone(), a], &TIMES, &grid(4.0, 0.2), &sampled(2000), 11).unwrap();
        assert_eq!(d.columns[0], d.columns[1]);
    }

    #[test]
    fn designs_are_reproducible_from_the_seed() {
        let sys = BridgeSystem::from_hamiltonian(&squeezed_rotor()).unwrap();
        let atoms = AtomLattice { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], n: 2 }.atoms().unwrap();
        let g = grid(4.0, 0.2);
        let a = build_design_matrix(&sys, &atoms, &TIMES, &g, &sampled(2000), 5).unwrap();
        let b = build_design_matrix(&sys, &atoms, &TIMES, &g, &sampled(2000), 5).unwrap();
        let c = build_design_matrix(&sys, &atoms, &TIMES, &g, &sampled(2000), 6).unwrap();
        assert_eq!(a.columns, b.columns);
        assert_ne!(a.columns, c.columns);
    }

    #[test]
    fn failed_atoms_are_flagged() {
        let sys = BridgeSystem::from_hamiltonian(&squeezed_rotor()).unwrap();
        let atoms = vec![BoundaryAtom::new(vec![0.0], vec![0.0], 0.5), BoundaryAtom::new(vec![f64::NAN], vec![0.0], 0.5)];
        let d = build_design_matrix(&sys, &atoms, &TIMES, &grid(4.0, 0.2), &sampled(1000), 1).unwrap();
        assert_eq!(d.failed.len(), 1);
        assert_eq!(d.failed[0].0, 1);
        assert!(TargetSeries::from_mixture("x", &d, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn times_must_be_interior() {
        let sys = BridgeSystem::from_hamiltonian(&squeezed_rotor()).unwrap();
        let atoms = vec![BoundaryAtom::new(vec![0.0], vec![0.0], 1.0)];
        assert!(build_design_matrix(&sys, &atoms, &[0.0, 0.5], &grid(4.0, 0.2), &exact(), 0).is_err());
    }
}

mod fit {
    use super::*;

    fn exact_design() -> (BridgeSystem, DesignMatrix) {
        let sys = BridgeSystem::from_hamiltonian(&squeezed_rotor()).unwrap();
        let atoms = AtomLattice { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], n: 3 }.atoms().unwrap();
        let d = build_design_matrix(&sys, &atoms, &TIMES, &grid(5.0, 0.1), &exact(), 0).unwrap();
        (sys, d)
    }

    /// Stationarity on the simplex: the gradient equals a common value on the
    /// support and is no smaller off it.
    #[test]
    fn simplex_fit_satisfies_kkt() {
        let (_, d) = exact_design();
        let mut w = vec![0.0; d.n_atoms()];
        w[0] = 0.7;
        w[4] = 0.3;
        let base = TargetSeries::from_mixture("t", &d, &w).unwrap();
        // push the target off the span so the optimum sits on a face
        let target = TargetSeries {
            slices: base.slices.iter().map(|s| s.iter().enumerate().map(|(i, v)| v * (1.0 + 0.3 * ((i % 7) as f64 / 7.0))).collect()).collect(),
            ..base
        };
        let sol = fit_simplex(&d, &target, &FIT, &FitOptions::default()).unwrap();
        assert!(sol.converged);
        let grad: Vec<f64> = (0..d.n_atoms())
            .map(|a| FIT.iter().map(|&t| d.block(a, t).iter().zip(&d.mixture(&sol.weights, t)).zip(&target.slices[t]).map(|((c, m), y)| c * (m - y)).sum::<f64>()).sum())
            .collect();
        let support: Vec<usize> = (0..d.n_atoms()).filter(|&a| sol.weights[a] > 1e-9).collect();
        let nu = support.iter().map(|&a| grad[a]).sum::<f64>() / support.len() as f64;
        let scale = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
        for a in 0..d.n_atoms() {
            if support.contains(&a) {
                assert!((grad[a] - nu).abs() < 1e-6 * scale, "atom {a}");
            } else {
                assert!(grad[a] - nu > -1e-6 * scale, "atom {a}");
            }
        }
    }

    #[test]
    fn exact_mixture_is_recovered_exactly() {
        let (_, d) = exact_design();
        let w = random_weights(d.n_atoms(), 4);
        let target = TargetSeries::from_mixture("t", &d, &w).unwrap();
        let r = fit_boundary_distribution(&d, &target, &FIT, &HELD, None, &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!(weight_tv(&w, &r.weights) < 1e-4, "{:?}", r.weights);
        assert!(r.residual_l2 < 1e-6);
        assert_eq!(r.verdict, RepVerdict::Inconclusive);
    }

    #[test]
    fn signed_fit_separates_negative_weights() {
        let (_, d) = exact_design();
        let mut w = vec![0.0; d.n_atoms()];
        w[0] = 1.5;
        w[8] = -0.5;
        let target = TargetSeries::from_mixture("t", &d, &w).unwrap();
        let signed = fit_signed(&d, &target, &FIT).unwrap();
        assert!(heldout_residual(&d, &target, &signed, &HELD).unwrap().0 < 1e-6);
        let r = fit_boundary_distribution(&d, &target, &FIT, &HELD, None, &FitOptions::default()).unwrap();
        assert!(r.residual_l2 > 0.1);
    }

    #[test]
    fn overlapping_time_sets_are_rejected() {
        let (_, d) = exact_design();
        let target = TargetSeries::from_mixture("t", &d, &random_weights(d.n_atoms(), 1)).unwrap();
        assert!(fit_boundary_distribution(&d, &target, &[0, 1], &[1, 3], None, &FitOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_gives_inconclusive() {
        let (_, d) = exact_design();
        let target = TargetSeries::from_mixture("t", &d, &random_weights(d.n_atoms(), 2)).unwrap();
        let opts = FitOptions { max_iter: 3, ..Default::default() };
        let r = fit_boundary_distribution(&d, &target, &FIT, &HELD, Some(1.0), &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.verdict, RepVerdict::Inconclusive);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn projection_is_the_nearest_simplex_point(v in prop::collection::vec(-3.0f64..3.0, 1..12), q in prop::collection::vec(0.0f64..1.0, 12)) {
            let p = project_simplex(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let s: f64 = q[..v.len()].iter().sum::<f64>().max(1e-12);
            let other: Vec<f64> = q[..v.len()].iter().map(|x| x / s).collect();
            let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            prop_assert!(dist(&p) <= dist(&other) + 1e-12);
        }
    }
}

mod recovery {
    use super::*;

    #[test]
    fn manufactured_mixture_within_twice_the_floor() {
        let sys = BridgeSystem::from_hamiltonian(&squeezed_rotor()).unwrap();
        let atoms = AtomLattice { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], n: 3 }.atoms().unwrap();
        let cfg = sampled(10_000);
        let d = build_design_matrix(&sys, &atoms, &TIMES, &grid(5.0, 0.1), &cfg, 7).unwrap();
        let opts = FitOptions::default();
        let floor = mc_floor(&sys, &d, &cfg, &FIT, &HELD, &opts, 4, 7).unwrap();
        let (target, truth) = manufactured_target(&sys, &d, &cfg, 8).unwrap();
        let r = fit_boundary_distribution(&d, &target, &FIT, &HELD, Some(floor), &opts).unwrap();
        assert!(r.converged);
        assert!(r.residual_l2 <= 2.0 * floor, "residual {} floor {floor}", r.residual_l2);
        let tv = weight_tv(&truth, &r.weights);
        assert!(tv <= 0.05, "weight tv {tv}");
        assert_eq!(r.verdict, RepVerdict::Representable);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(r.weights.iter().all(|&w| w >= 0.0));
        let (l2, linf) = heldout_residual(&d, &target, &r.weights, &HELD).unwrap();
        assert!((l2 - r.residual_l2).abs() <= 1e-12 && (linf - r.residual_linf).abs() <= 1e-12);
    }
}

mod sweep {
    use super::*;

    fn config(seed: u64) -> GapSweepConfig {
        GapSweepConfig {
            design: sampled(1500),
            grid: grid(6.0, 0.2),
            times: TIMES.to_vec(),
            fit: FIT.to_vec(),
            heldout: HELD.to_vec(),
            lattice: AtomLattice { lo: vec![-2.0, -2.0], hi: vec![2.0, 2.0], n: 3 },
            fit_options: FitOptions::default(),
            floor_replicates: 2,
            confirm_gaps: false,
            seed,
        }
    }

    fn run(seed: u64) -> GapSweep {
        let hs = [
            HamiltonianSpec { label: "squeezed-rotor".into(), h: squeezed_rotor() },
            HamiltonianSpec { label: "harmonic".into(), h: harmonic() },
        ];
        let states = [
            TargetSpec::Manufactured,
            TargetSpec::Husimi { label: "even-cat".into(), state: FockState::cat(Complex64::new(1.2, 0.0), true, 60).unwrap() },
        ];
        gap_sweep(&hs, &states, &config(seed))
    }

    #[test]
    fn cat_state_csv_is_reproducible_and_errors_are_recorded() {
        let a = run(3);
        let b = run(3);
        assert_eq!(a.summary_csv(), b.summary_csv());
        let csv = a.summary_csv();
        assert!(csv.starts_with("hamiltonian,state,atoms,budget,residual_l2,residual_linf,mc_floor,verdict,seed\n"));
        assert_eq!(csv.lines().count(), 5);
        for c in &a.cells {
            assert_eq!(c.outcome.is_err(), c.hamiltonian == "harmonic", "{}/{}: {:?}", c.hamiltonian, c.state, c.outcome.as_ref().err());
        }
        let manufactured = a.cells.iter().find(|c| c.hamiltonian == "squeezed-rotor" && c.state == "manufactured").unwrap();
        let o = manufactured.outcome.as_ref().unwrap();
        assert!(o.report.residual_l2 <= 2.0 * o.report.mc_floor.unwrap());
        assert_ne!(run(4).summary_csv(), csv);
    }

    #[test]
    fn lattice_refinement_halves_the_spacing() {
        let l = AtomLattice { lo: vec![-1.0, -2.0], hi: vec![1.0, 2.0], n: 3 };
        let atoms = l.refined().atoms().unwrap();
        assert_eq!(atoms.len(), 25);
        assert!(atoms.iter().any(|a| a.x0 == vec![-0.5] && a.yf == vec![1.0]));
        assert!((atoms.iter().map(|a| a.weight).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
