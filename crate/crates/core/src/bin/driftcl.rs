use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use driftcl::cli::{self, diagnose, verify};
use driftcl::trainer::StrategyKind;
use driftcl::{Error, Result};

/// Continual learning under concept drift: run, compare and diagnose
/// replay strategies.
#[derive(Parser)]
#[command(name = "driftcl", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one strategy on one seed and write its artifacts.
    Run {
        config: PathBuf,
        /// Overrides `[run] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every seed x strategy pair and write a comparison table.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "vanilla,amr,fr")]
        strategies: Vec<StrategyKind>,
        /// Overrides `[run] workers`.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Replacement tables, gradient interference and alignment sweeps.
    Diagnose { config: PathBuf },
    /// Check core routines against slow reference implementations.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Args::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run { config, seed } => {
            let mut cfg = cli::load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let s = cli::run_experiment(&cfg)?;
            println!("{}", cli::run_dir(&cfg).display());
            println!(
                "{} seed {}: FAA {:.4}  F {:.4}  labels {}  {:.1}s",
                s.strategy, s.seed, s.faa, s.forgetting, s.ledger.adaptation_labels, s.ledger.wall_time_secs
            );
        }
        Command::Sweep {
            config,
            seeds,
            strategies,
            workers,
        } => {
            let mut cfg = cli::load_config(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let report = cli::run_sweep(&cfg, &seeds, &strategies)?;
            println!("{}", cli::sweep_dir(&cfg).display());
            for a in &report.strategies {
                println!(
                    "{:<8} FAA {:.4} +- {:.4}  F {:.4} +- {:.4}  labels {:.0}",
                    a.strategy.to_string(),
                    a.faa.mean,
                    a.faa.std,
                    a.forgetting.mean,
                    a.forgetting.std,
                    a.adaptation_labels
                );
            }
        }
        Command::Diagnose { config } => {
            let cfg = cli::load_config(&config)?;
            let (path, report) = diagnose::diagnose(&cfg)?;
            println!("{}", path.display());
            for c in &report.interference {
                let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.4}"));
                println!(
                    "task {} class {}: cos(drifted) {}  cos(control) {}",
                    c.task,
                    c.class,
                    fmt(c.drifted.cosine_sim),
                    fmt(c.control.cosine_sim)
                );
            }
        }
        Command::Verify { seed } => {
            let checks = verify::run_checks(seed)?;
            for c in &checks {
                println!("{} {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            if !failed.is_empty() {
                return Err(Error::Verification(failed.join(", ")));
            }
        }
    }
    Ok(())
}
