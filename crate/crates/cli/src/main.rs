mod bundle;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use bundle::{CliError, Loaded};

#[derive(Parser)]
#[command(name = "phaselab", version, about = "Phase-space diagnostics and Duhamel solvers for dispersive multipliers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config, or the manifest.json of an earlier run.
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the seed recorded in a manifest; defaults to 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Short-time Fourier portrait of e^{2πi t μ} with its norm report.
    FresnelPortrait(Common),
    /// Modulation and amalgam norms of a sampled field.
    Norms(Common),
    /// Windowed amalgam norms of the fundamental solution over a list of times.
    DecayScan(Common),
    /// Sampled cone separation ratio of a symbol.
    ConeCheck(Common),
    /// Fourier transform of a potential and its membership report.
    PotentialFt(Common),
    /// Duhamel-Picard solve with a potential.
    Solve(Common),
    /// Free evolution under the multiplier.
    Propagate(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Self::FresnelPortrait(c) => ("fresnel-portrait", c),
            Self::Norms(c) => ("norms", c),
            Self::DecayScan(c) => ("decay-scan", c),
            Self::ConeCheck(c) => ("cone-check", c),
            Self::PotentialFt(c) => ("potential-ft", c),
            Self::Solve(c) => ("solve", c),
            Self::Propagate(c) => ("propagate", c),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let (name, common) = cli.command.parts();
    let threads = common.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start the worker pool: {e}")))?;

    let loaded = Loaded::read(&common.config, name, common.seed)?;
    let mut out = commands::dispatch(name, &loaded)?;
    out.finish(name, &loaded, threads, start.elapsed().as_secs_f64(), &common.out_dir)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("{name}: wrote {} files to {}", out.files.len() + 1, common.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
