use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixrate_core::harness::{run_config, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "mixrate", version, about = "Mixture approximation and estimation rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lᵖ approximation rate of Maurey-sampled mixtures.
    ApproxRate(RunArgs),
    /// L² rate of the adaptive least-squares estimator.
    EstimateRate(RunArgs),
    /// Convolution smoothing error against its bound.
    Smoothing(RunArgs),
    /// Empirical-process supremum and convex-combination checks.
    Diagnostics(RunArgs),
    /// Numerical invariants of kernels, bounds and the solver.
    Invariants(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `experiment.output_dir`.
    #[arg(long, env = "MIXRATE_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::ApproxRate(a) => (ExperimentKind::ApproxRate, a),
        Command::EstimateRate(a) => (ExperimentKind::EstimateRate, a),
        Command::Smoothing(a) => (ExperimentKind::Smoothing, a),
        Command::Diagnostics(a) => (ExperimentKind::Diagnostics, a),
        Command::Invariants(a) => (ExperimentKind::Invariants, a),
    };
    match execute(kind, args) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<u8, String> {
    let mut cfg = ExperimentConfig::from_path(&args.config).map_err(|e| e.to_string())?;
    if cfg.experiment.kind != kind {
        return Err(format!(
            "experiment.kind is \"{}\" but the subcommand runs \"{}\"",
            cfg.experiment.kind.as_str(),
            kind.as_str()
        ));
    }
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    let out = args
        .out
        .or_else(|| cfg.experiment.output_dir.clone().map(|p| match &cfg.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        }))
        .unwrap_or_else(|| PathBuf::from("mixrate-out").join(kind.as_str()));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err("--threads must be at least 1".into());
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| e.to_string())?;
    let outcome = pool
        .install(|| run_config(&cfg, &out))
        .map_err(|e| e.to_string())?;
    print!("{}", outcome.summary);
    for f in &outcome.files {
        log::info!("wrote {}", f.display());
    }
    Ok(outcome.exit_code() as u8)
}
