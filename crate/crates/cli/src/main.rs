mod config;
mod error;
mod experiments;
mod model;
mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use doeblin_core::parallel::{with_threads, Execution};

use crate::error::CliError;
use crate::model::Context;

#[derive(Parser)]
#[command(name = "doeblin", version, about = "Doeblin minorization and limit-theorem diagnostics for Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certificate, stationary law and minimal Doeblin lag of one kernel.
    AnalyzeKernel(RunArgs),
    /// Contraction ledger toward the limit measure at a target time.
    Ledger(RunArgs),
    /// Coboundary decomposition and exact variance profile.
    Decompose(RunArgs),
    /// Monte Carlo normal-approximation distances and rate fits.
    CltRate(RunArgs),
    /// Quenched contraction reports over an ensemble of environments.
    RandomEnv(RunArgs),
    /// Quenched mixing times and their ensemble tail.
    MixingTimes(RunArgs),
    /// Skew-product correlation decay.
    SkewCorr(RunArgs),
    /// Checks a config without running it.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also writes the report to `<out>/verify.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn load(path: &Path, seed: Option<u64>) -> Result<(Vec<u8>, config::ExperimentConfig), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::config(path, ".", e.to_string()))?;
    let mut cfg = config::parse(text, path)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok((bytes, cfg))
}

fn run(kind: &str, args: &RunArgs) -> Result<(), CliError> {
    let (bytes, cfg) = load(&args.config, args.seed)?;
    if cfg.kind() != kind {
        return Err(CliError::config(&args.config, "kind", format!("config is `{}` but the subcommand is `{kind}`", cfg.kind())));
    }
    let ctx = Context::new(&args.config);
    let artifacts = with_threads(args.threads, || experiments::run(&cfg, &ctx, Execution::Parallel))?;
    output::write_all(&args.out, kind, &bytes, cfg.seed(), &artifacts)
}

fn verify(args: &VerifyArgs) -> Result<bool, CliError> {
    let (_, cfg) = load(&args.config, args.seed)?;
    let report = verify::verify(&cfg, &Context::new(&args.config));
    let value = serde_json::to_value(&report).expect("serializable report");
    let artifact = output::json_artifact("verify.json", &value);
    print!("{}", String::from_utf8_lossy(&artifact.bytes));
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(&artifact.name);
        std::fs::write(&path, &artifact.bytes).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(!report.has_errors())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::AnalyzeKernel(a) => run("analyze-kernel", a),
        Command::Ledger(a) => run("ledger", a),
        Command::Decompose(a) => run("decompose", a),
        Command::CltRate(a) => run("clt-rate", a),
        Command::RandomEnv(a) => run("random-env", a),
        Command::MixingTimes(a) => run("mixing-times", a),
        Command::SkewCorr(a) => run("skew-corr", a),
        Command::Verify(a) => match verify(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
