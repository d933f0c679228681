mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Cardinality estimation laboratory: dataset and workload generation,
/// estimator evaluation, dynamic-environment simulation, and rule checking.
#[derive(Parser)]
#[command(name = "celab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel labeling/evaluation.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV + schema sidecar + provenance).
    GenData(CommonArgs),
    /// Generate an unlabeled query workload (JSON lines).
    GenWorkload(CommonArgs),
    /// Label a workload file with exact cardinalities.
    Label(CommonArgs),
    /// Build every configured estimator and report q-error summaries.
    Evaluate(CommonArgs),
    /// Run the append-update timeline simulation over a sweep of T values.
    Dynamic(CommonArgs),
    /// Probe the five logical rules against every configured estimator.
    Rules(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::GenData(a)
            | Command::GenWorkload(a)
            | Command::Label(a)
            | Command::Evaluate(a)
            | Command::Dynamic(a)
            | Command::Rules(a) => a,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let args = cli.command.args();
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let cfg = RunConfig::load(&args.config, args.seed)?;
    match &cli.command {
        Command::GenData(a) => commands::gen_data(&cfg, &a.out),
        Command::GenWorkload(a) => commands::gen_workload_cmd(&cfg, &a.out),
        Command::Label(a) => commands::label_cmd(&cfg, &a.out),
        Command::Evaluate(a) => commands::evaluate(&cfg, &a.out),
        Command::Dynamic(a) => commands::dynamic(&cfg, &a.out),
        Command::Rules(a) => commands::rules(&cfg, &a.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
