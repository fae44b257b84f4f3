use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use locomode::cli;
use locomode::config::parse_config;
use locomode::synthgen::{write_dataset, SynthConfig};

#[derive(Parser)]
#[command(name = "locomode", version, about = "Locomotion mode classification experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort (manifest.csv and trials/).
    Generate {
        #[arg(long, default_value_t = 5)]
        subjects_healthy: usize,
        #[arg(long, default_value_t = 5)]
        subjects_pd: usize,
        #[arg(long, default_value_t = 10)]
        trials_per_subject: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate every configured combination.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides master_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output_dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render tables from the CSVs of a previous run.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a dataset and print its composition.
    Inspect {
        /// Dataset directory or manifest file.
        dataset: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Args::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Generate {
            subjects_healthy,
            subjects_pd,
            trials_per_subject,
            seed,
            out,
        } => {
            let config = SynthConfig {
                healthy_subjects: subjects_healthy,
                pd_subjects: subjects_pd,
                trials_per_subject,
                master_seed: seed,
            };
            let manifest = write_dataset(&config, &out)?;
            println!("wrote {}", manifest.display());
        }
        Command::Run {
            config,
            jobs,
            seed,
            out,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(seed) = seed {
                cfg.run.master_seed = seed;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let outcome = cli::run_experiment(&cfg, jobs, &|line| eprintln!("{line}"))?;
            print!("{}", outcome.summary);
            if !outcome.failures.is_empty() {
                for (name, e) in &outcome.failures {
                    eprintln!("failed: {name}: {e}");
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { out } => print!("{}", cli::rerender(&out)?),
        Command::Inspect { dataset } => {
            let manifest = if dataset.is_dir() {
                dataset.join("manifest.csv")
            } else {
                dataset
            };
            print!("{}", cli::inspect(&manifest)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
