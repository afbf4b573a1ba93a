use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tsqlab::config::Command;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Residual,
    Bridge,
    Markov,
    Bernstein,
    Lambda,
    Represent,
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Residual => Command::Residual,
            Cmd::Bridge => Command::Bridge,
            Cmd::Markov => Command::Markov,
            Cmd::Bernstein => Command::Bernstein,
            Cmd::Lambda => Command::Lambda,
            Cmd::Represent => Command::Represent,
            Cmd::Report => Command::Report,
        }
    }
}

/// Time-symmetric phase-space experiments.
///
/// Exit codes: 0 pass or neutral, 1 usage or configuration error,
/// 2 a scientific check failed.
#[derive(Debug, Parser)]
#[command(name = "tsqlab", version)]
struct Args {
    command: Cmd,
    /// TOML configuration, or a manifest.json to rerun.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("TSQLAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("TSQLAB_THREADS={v:?} is not a thread count"))?;
    if n == 0 {
        return Err("TSQLAB_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match tsqlab::run(args.command.into(), &args.config, args.seed, args.out.as_deref()) {
        Ok(r) => {
            println!("{}: {} ({})", r.status.as_str(), r.summary, r.out_dir.display());
            ExitCode::from(r.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
