use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qrl_core::harness::{run, ExperimentConfig, ExperimentKind, SeedSpec};
use qrl_core::Result;

/// Quantum-enhanced reinforcement learning simulation laboratory.
#[derive(Parser)]
#[command(name = "qrl", version)]
struct Cli {
    /// Output directory for CSV tables and the config echo.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed that run seeds are derived from.
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the oracle from the maze and check it against the reward
    /// predicate on every basis branch.
    VerifyOracle { maze: String },
    /// Quantum search against uniform classical sampling.
    Explore {
        maze: String,
        /// Quantum budget in interaction steps (default 2M * ceil(8 sqrt N)).
        #[arg(long)]
        budget: Option<u64>,
        /// Number of seeds.
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
    /// Budget-matched hybrid vs classical comparison from a config file.
    Learn { config: PathBuf },
    /// Metaparameter optimization from a config file.
    Metalearn { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let (mut config, default_out) = match cli.command {
        Command::VerifyOracle { maze } => (ExperimentConfig::new(ExperimentKind::VerifyOracle, maze), None),
        Command::Explore { maze, budget, seeds } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Explore, maze);
            cfg.explore.budget = budget;
            cfg.seeds = SeedSpec::Count(seeds);
            (cfg, None)
        }
        Command::Learn { config } | Command::Metalearn { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = cfg.output.as_ref().map(|o| cfg.base_dir().join(o));
            (cfg, Some(out.unwrap_or_else(|| PathBuf::from("qrl-out"))))
        }
    };
    if let Some(w) = cli.workers {
        config.workers = Some(w);
    }
    if let Some(s) = cli.master_seed {
        config.master_seed = s;
    }
    let report = run(&config)?;
    for line in &report.lines {
        println!("{line}");
    }
    if let Some(dir) = cli.out.or(default_out) {
        report.write_to(Path::new(&dir))?;
        println!("wrote {}", dir.display());
    }
    Ok(if report.verified { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
