//! Command-line experiments over the tsqlab modules: configuration,
//! manifests and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod presets;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use commands::{as_config, bridge, markov, represent, residual, Outcome, Status};
use config::{Command, Config};
use error::Result;
use manifest::{sha256_hex, ArtifactRecord, Manifest};

enum Job {
    Residual(residual::Prepared),
    Bridge(bridge::Prepared),
    Markov(markov::MarkovPrepared),
    Bernstein(markov::BernsteinPrepared),
    Lambda(markov::LambdaPrepared),
    Represent(represent::Prepared),
    Report(Vec<manifest::Manifest>),
}

fn prepare(cmd: Command, cfg: &mut Config) -> Result<Job> {
    as_config(match cmd {
        Command::Residual => residual::prepare(cfg).map(Job::Residual),
        Command::Bridge => bridge::prepare(cfg).map(Job::Bridge),
        Command::Markov => markov::prepare_markov(cfg).map(Job::Markov),
        Command::Bernstein => markov::prepare_bernstein(cfg).map(Job::Bernstein),
        Command::Lambda => markov::prepare_lambda(cfg).map(Job::Lambda),
        Command::Represent => represent::prepare(cfg).map(Job::Represent),
        Command::Report => report::load_manifests(&cfg.report.as_ref().expect("resolved").manifests).map(Job::Report),
    })
}

fn execute(job: Job) -> Result<Outcome> {
    match job {
        Job::Residual(p) => residual::run(p),
        Job::Bridge(p) => bridge::run(p),
        Job::Markov(p) => markov::run_markov(p),
        Job::Bernstein(p) => markov::run_bernstein(p),
        Job::Lambda(p) => markov::run_lambda(p),
        Job::Represent(p) => represent::run(p),
        Job::Report(m) => report::run(&m),
    }
}

/// Result of one command: its status and where the outputs went.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub status: Status,
    pub out_dir: PathBuf,
    pub summary: String,
}

/// Loads, resolves and validates the configuration, runs the command and
/// writes `resolved.toml`, the artifacts and `manifest.json`. Nothing is
/// written when the configuration is rejected.
pub fn run(cmd: Command, config_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<RunResult> {
    let base = config_path.parent().unwrap_or(Path::new("."));
    let mut cfg = config::load(config_path)?.resolve(cmd, base, seed, out)?;
    let job = prepare(cmd, &mut cfg)?;
    let resolved = cfg.to_toml();
    let out_dir = PathBuf::from(cfg.out.clone().expect("resolved"));

    let start = Instant::now();
    let outcome = execute(job)?;
    let elapsed = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("resolved.toml"), &resolved)?;
    let mut records = Vec::new();
    for a in &outcome.artifacts {
        std::fs::write(out_dir.join(&a.name), &a.contents)?;
        records.push(ArtifactRecord { path: a.name.clone(), sha256: sha256_hex(a.contents.as_bytes()), bytes: a.contents.len() });
    }
    let manifest = Manifest {
        tool: "tsqlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        ensemble: outcome.ensemble.into(),
        status: outcome.status.as_str().into(),
        summary: outcome.summary.clone(),
        seed: cfg.seed,
        config_sha256: sha256_hex(resolved.as_bytes()),
        resolved_config: resolved,
        artifacts: records,
        wall_clock_seconds: elapsed,
        threads: rayon::current_num_threads(),
        rng: "ChaCha8; every stochastic task seeds from the run seed and its own label".into(),
    };
    std::fs::write(out_dir.join("manifest.json"), manifest.to_json())?;
    log::info!("{} {}: {}", cmd.name(), outcome.status.as_str(), outcome.summary);
    Ok(RunResult { status: outcome.status, out_dir, summary: outcome.summary })
}
