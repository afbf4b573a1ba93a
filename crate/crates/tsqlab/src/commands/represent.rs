//! `tsqlab represent`: boundary-distribution fits over a grid of
//! Hamiltonians and target states.

use std::fmt::Write;

use tsqlab_core::propagator::Bandwidth;
use tsqlab_core::represent::{
    gap_sweep, AtomLattice, ColumnSource, DesignConfig, FitOptions, GapSweep, GapSweepConfig, HamiltonianSpec,
    TargetSpec,
};

use super::{cfg_err, Artifact, Outcome, Status};
use crate::config::Config;
use crate::error::Result;
use crate::presets;

/// Acceptance band of manufactured cells: residual against the floor, and
/// weight error.
const FLOOR_FACTOR: f64 = 2.0;
const WEIGHT_TV: f64 = 0.05;

pub struct Prepared {
    hamiltonians: Vec<HamiltonianSpec>,
    targets: Vec<TargetSpec>,
    sweep: GapSweepConfig,
}

pub fn prepare(cfg: &Config) -> Result<Prepared> {
    let r = cfg.represent.as_ref().expect("resolved");
    let s = cfg.sampler.as_ref().expect("resolved");
    let mut hamiltonians = Vec::new();
    for name in &r.hamiltonians {
        let (w, k, q) = presets::preset_defaults(name)?;
        hamiltonians.push(HamiltonianSpec { label: name.clone(), h: presets::preset(name, w, k, q)? });
    }
    let modes = hamiltonians[0].h.num_modes();
    if hamiltonians.iter().any(|h| h.h.num_modes() != modes) {
        return Err(cfg_err("represent.hamiltonians must all have the same number of modes"));
    }
    let mut targets = Vec::new();
    for st in &r.states {
        targets.push(TargetSpec::Husimi { label: st.label(), state: presets::state(st, modes, r.cutoff)? });
    }
    if r.manufactured {
        targets.push(TargetSpec::Manufactured);
    }
    let design = DesignConfig {
        t0: r.t0,
        tf: r.tf,
        steps: r.steps,
        source: if r.budget == 0 { ColumnSource::Exact } else { ColumnSource::Sampled { budget: r.budget } },
        sampler: super::sampler(s)?,
        bandwidth: Bandwidth::Silverman,
        min_ess: s.min_ess,
    };
    let dims = 2 * modes;
    let sweep = GapSweepConfig {
        design,
        grid: super::grid(cfg, dims)?,
        times: r.times.clone(),
        fit: r.fit.clone(),
        heldout: r.heldout.clone(),
        lattice: AtomLattice { lo: vec![r.lattice_lo; dims], hi: vec![r.lattice_hi; dims], n: r.lattice_n },
        fit_options: FitOptions { ridge: 0.0, tol: r.tol, max_iter: r.max_iter },
        floor_replicates: r.floor_replicates,
        confirm_gaps: r.confirm_gaps,
        seed: cfg.seed.expect("resolved"),
    };
    sweep.lattice.atoms()?;
    Ok(Prepared { hamiltonians, targets, sweep })
}

fn details_csv(sweep: &GapSweep) -> String {
    let mut out = String::from(
        "hamiltonian,state,weight_tv,signed_residual_l2,uncovered_mass,iterations,converged,noise_model,error\n",
    );
    for c in &sweep.cells {
        match &c.outcome {
            Ok(o) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6e},{:.6e},{},{},\"{}\",",
                    c.hamiltonian,
                    c.state,
                    o.weight_tv.map(|t| format!("{t:.6e}")).unwrap_or_default(),
                    o.signed_residual_l2,
                    o.uncovered_mass,
                    o.report.iterations,
                    o.report.converged,
                    o.report.noise_model.replace('"', "'")
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{},{},,,,,,,\"{}\"", c.hamiltonian, c.state, e.replace('"', "'"));
            }
        }
    }
    out
}

fn weights_csv(sweep: &GapSweep, lattice: &AtomLattice) -> Result<String> {
    let atoms = lattice.atoms()?;
    let half = lattice.lo.len() / 2;
    let mut out = String::from("hamiltonian,state,atom");
    for i in 1..=half {
        let _ = write!(out, ",x0_{i}");
    }
    for i in 1..=half {
        let _ = write!(out, ",yf_{i}");
    }
    out.push_str(",weight\n");
    for c in &sweep.cells {
        let Ok(o) = &c.outcome else { continue };
        for (k, (a, w)) in atoms.iter().zip(&o.report.weights).enumerate() {
            let _ = write!(out, "{},{},{k}", c.hamiltonian, c.state);
            for v in a.x0.iter().chain(&a.yf) {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{w:.9e}");
        }
    }
    Ok(out)
}

pub fn run(p: Prepared) -> Result<Outcome> {
    let sweep = gap_sweep(&p.hamiltonians, &p.targets, &p.sweep);
    let mut manufactured = 0;
    let mut recovered = 0;
    for c in sweep.cells.iter().filter(|c| c.state == "manufactured") {
        manufactured += 1;
        if let Ok(o) = &c.outcome {
            let floor = o.report.mc_floor.unwrap_or(0.0);
            if o.report.residual_l2 <= FLOOR_FACTOR * floor && o.weight_tv.is_some_and(|t| t <= WEIGHT_TV) {
                recovered += 1;
            }
        }
    }
    let errors = sweep.cells.iter().filter(|c| c.outcome.is_err()).count();
    let status = if manufactured == 0 {
        Status::Neutral
    } else {
        Status::from_checks(recovered == manufactured)
    };
    let summary = format!(
        "{} cells ({errors} errors); manufactured mixtures recovered {recovered}/{manufactured}",
        sweep.cells.len()
    );
    let artifacts = vec![
        Artifact::new("summary.csv", sweep.summary_csv()),
        Artifact::new("details.csv", details_csv(&sweep)),
        Artifact::new("weights.csv", weights_csv(&sweep, &p.sweep.lattice)?),
    ];
    Ok(Outcome { status, summary, ensemble: "E3", artifacts })
}
