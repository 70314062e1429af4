//! `fddpg`: train a federation, evaluate checkpoints, inspect or export them,
//! and trace single episodes.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::SimPolicy;
use config::{load_scenario, Overrides, RunConfig};
use error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "fddpg",
    version,
    about = "Federated DDPG for collision-avoiding vehicle control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overrides `seed` in the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run agents and evaluation episodes one at a time.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    /// Episodes per agent per round.
    #[arg(long)]
    episodes: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            out_dir: self.out.clone(),
            serial: self.serial,
            rounds: self.rounds,
            agents: self.agents,
            episodes: self.episodes,
        });
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Federated training; writes round checkpoints, reports and a manifest.
    Train(RunArgs),
    /// Greedy evaluation over the destination distances; writes eval.csv and eval.json.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint to evaluate, repeatable; defaults to `paths.checkpoints`.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
    },
    /// Print architecture, parameter counts and metadata of a checkpoint.
    Inspect { checkpoint: PathBuf },
    /// Roll out one episode and write trace.csv.
    SimRun {
        /// Take the scenario, seed and output directory from a run configuration.
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Drive with this checkpoint's actor instead of a constant acceleration.
        #[arg(long, conflicts_with = "accel")]
        checkpoint: Option<PathBuf>,
        /// Constant ego acceleration, m/s^2.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        accel: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a checkpoint's networks and metadata as JSON.
    Export {
        checkpoint: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => commands::train(&args.load()?),
        Command::Eval { run, checkpoints } => commands::eval(&run.load()?, &checkpoints).map(drop),
        Command::Inspect { checkpoint } => {
            print!("{}", commands::inspect(&checkpoint)?);
            Ok(())
        }
        Command::SimRun {
            config,
            scenario,
            checkpoint,
            accel,
            seed,
            out,
        } => {
            let (scenario, file_seed, file_out) = match (config, scenario) {
                (Some(path), _) => {
                    let cfg = RunConfig::load(&path)?;
                    (cfg.scenario()?, cfg.seed, cfg.out_dir)
                }
                (None, Some(path)) => (load_scenario(&path)?, 0, PathBuf::from(".")),
                (None, None) => unreachable!("clap requires one of --config or --scenario"),
            };
            let policy = match checkpoint {
                Some(path) => SimPolicy::Actor(Box::new(commands::load_policy(&path)?)),
                None => SimPolicy::Constant(accel),
            };
            let out = out.unwrap_or(file_out);
            let steps = commands::sim_run(scenario, policy, seed.unwrap_or(file_seed), &out)?;
            println!("{steps} steps written to {}", out.join("trace.csv").display());
            Ok(())
        }
        Command::Export { checkpoint, out } => {
            let path = commands::export(&checkpoint, &out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FDDPG_LOG", "info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Messages already embed their underlying cause.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
