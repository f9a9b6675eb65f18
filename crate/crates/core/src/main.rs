use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use macroq::action::write_slot_records;
use macroq::experiment::{
    discover, exit_code, implied_action_count, parse_trace, run_compare, run_experiment,
    ExperimentConfig, TrialStatus, DEFAULT_THRESHOLD_FRACTION, EXIT_RUNTIME, OUTPUT_DIR_ENV,
};
use macroq::macros::DEFAULT_OMEGA;
use macroq::{Error, Result};

#[derive(Parser)]
#[command(name = "macroq", version, about = "Semi-MDP Q-learning with open-loop macro-actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of one experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Base seed; trial i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several variants on the same environment and step budget.
    Compare {
        #[arg(long = "config", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_FRACTION)]
        threshold_frac: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to runs/compare.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Rank action windows of a recorded trace and show which become macros.
    Discover {
        /// One episode per line of integer action ids.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        length: usize,
        /// Defaults to the number of actions.
        #[arg(long)]
        capacity: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_OMEGA)]
        omega: f64,
        /// Alphabet size; ids outside it are rejected.
        #[arg(long)]
        actions: Option<usize>,
        /// Write the macro JSON-lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<(ExperimentConfig, String)> {
    let (mut config, raw) = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.agent.seed = s;
    }
    Ok((config, raw))
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Train { config, seed } => {
            let (config, raw) = load(&config, seed)?;
            let dir = config.output_dir();
            let summary = run_experiment(&config, &raw, &dir)?;
            for t in &summary.manifest.trials {
                match t.status {
                    TrialStatus::Ok => println!(
                        "trial {} (seed {}): final mean return {:.4}",
                        t.trial,
                        t.seed,
                        t.final_mean_return.unwrap_or(f64::NAN)
                    ),
                    TrialStatus::Failed => println!(
                        "trial {} (seed {}): failed: {}",
                        t.trial,
                        t.seed,
                        t.error.as_deref().unwrap_or("unknown error")
                    ),
                }
            }
            println!("artifacts in {}", dir.display());
            Ok(if summary.manifest.failed() > 0 { EXIT_RUNTIME } else { 0 })
        }
        Command::Compare {
            configs,
            threshold_frac,
            seed,
            output_dir,
        } => {
            let variants = configs
                .iter()
                .map(|p| load(p, seed))
                .collect::<Result<Vec<_>>>()?;
            let dir = output_dir.unwrap_or_else(|| PathBuf::from("runs/compare"));
            let comparison = run_compare(&variants, &dir, threshold_frac)?;
            print!("{}", comparison.table());
            println!("artifacts in {}", dir.display());
            let failed: usize = comparison.runs.iter().map(|r| r.manifest.failed()).sum();
            Ok(if failed > 0 { EXIT_RUNTIME } else { 0 })
        }
        Command::Discover {
            trace,
            length,
            capacity,
            omega,
            actions,
            out,
        } => {
            let text = std::fs::read_to_string(&trace).map_err(|e| {
                Error::Config(format!("cannot read trace {}: {e}", trace.display()))
            })?;
            let parsed = parse_trace(&text, actions)?;
            let atomic_count = actions.unwrap_or_else(|| implied_action_count(&parsed));
            let capacity = capacity.unwrap_or(atomic_count.max(1));
            let found = discover(&parsed, length, capacity, omega)?;
            print!("{}", found.table());
            let records = if found.has_windows() {
                found.slot_records(atomic_count)?
            } else {
                Vec::new()
            };
            match out {
                Some(path) => write_slot_records(std::fs::File::create(path)?, &records)?,
                None => write_slot_records(std::io::stdout().lock(), &records)?,
            }
            Ok(0)
        }
    }
}
