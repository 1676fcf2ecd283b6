//! Command-line runner for the discovery and allocation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radiodisco::config::Config;
use radiodisco::experiments::{self, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "radiodisco",
    version,
    about = "Radio device discovery and channel allocation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Directory for the artifacts and the manifest.
    #[arg(short, long)]
    out: PathBuf,
    /// Flat `key = value` configuration file, applied before overrides.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Configuration overrides as `key=value`; see `radiodisco keys`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a topology file.
    GenTopology(RunArgs),
    /// Candidate degree histogram of a topology.
    GroundTruth(RunArgs),
    /// Warm-start discovery time until every node knows its candidates.
    DiscoveryWarm(RunArgs),
    /// Re-stabilisation time after links join a stable network.
    DiscoveryJoin(RunArgs),
    /// Cold-start iterations with the cycle engine.
    DiscoveryColdCycles(RunArgs),
    /// Satisfied links over time with the knowledge discovery provides.
    AllocOverTime(RunArgs),
    /// Frequency changes after links are inserted into a converged area.
    Domino(RunArgs),
    /// List configuration keys and their defaults.
    Keys,
}

fn resolve(kind: ExperimentKind, args: &RunArgs) -> radiodisco::Result<Config> {
    let mut cfg = kind.config();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = args.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(r) = args.repetitions {
        cfg.set("repetitions", &r.to_string())?;
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::GenTopology(a) => (ExperimentKind::GenTopology, a),
        Command::GroundTruth(a) => (ExperimentKind::GroundTruth, a),
        Command::DiscoveryWarm(a) => (ExperimentKind::DiscoveryWarm, a),
        Command::DiscoveryJoin(a) => (ExperimentKind::DiscoveryJoin, a),
        Command::DiscoveryColdCycles(a) => (ExperimentKind::DiscoveryColdCycles, a),
        Command::AllocOverTime(a) => (ExperimentKind::AllocOverTime, a),
        Command::Domino(a) => (ExperimentKind::Domino, a),
        Command::Keys => {
            print!("{}", Config::describe());
            return ExitCode::SUCCESS;
        }
    };
    let result = resolve(kind, &args).and_then(|cfg| experiments::run(kind, &cfg, &args.out));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("radiodisco {kind}: {e}");
            ExitCode::FAILURE
        }
    }
}
