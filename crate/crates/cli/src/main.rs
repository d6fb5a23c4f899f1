mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{plan, Command, Output};
use config::Config;
use manifest::Manifest;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "vmscma", version, about = "Design, simulate and adapt VM-SCMA systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the codebook design loop for `design.rate`.
    Design(RunArgs),
    /// Monte Carlo SER, throughput or cell-average campaign.
    Simulate(RunArgs),
    /// Transmission-mode selection table.
    Adapt(RunArgs),
    /// Analytic curves: capacity, ASER bounds, SER model, gain.
    Analyze(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Design(a) => (Command::Design, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Adapt(a) => (Command::Adapt, a),
        Cmd::Analyze(a) => (Command::Analyze, a),
    };
    match run(command, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command, args: &RunArgs) -> Result<(), (u8, anyhow::Error)> {
    let mut config = Config::load(&args.config).map_err(|e| (EXIT_CONFIG, e))?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let job = plan(command, config.clone(), args.workers).map_err(|e| (EXIT_CONFIG, e))?;
    let outputs = job.run().map_err(|e| {
        let code = match e.downcast_ref::<vmscma::Error>() {
            Some(vmscma::Error::InfeasibleRate { .. }) => EXIT_INFEASIBLE,
            _ => EXIT_RUNTIME,
        };
        (code, e)
    })?;
    write_outputs(command, args, config, &outputs).map_err(|e| (EXIT_RUNTIME, e))
}

fn write_outputs(command: Command, args: &RunArgs, config: Config, outputs: &[Output]) -> Result<()> {
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for o in outputs {
        write(&args.out.join(&o.name), &o.bytes)?;
    }
    let m = Manifest {
        command: command.name().into(),
        config_path: args.config.display().to_string(),
        config_hash: vmscma::montecarlo::config_hash(&config),
        seed: config.seed,
        config,
        workers: args.workers,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        outputs: outputs.iter().map(|o| o.name.clone()).collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&m)?;
    bytes.push(b'\n');
    write(&args.out.join(manifest::FILE_NAME), &bytes)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
