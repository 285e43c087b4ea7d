use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use qgate_cli::experiment::OUT_DIR_ENV;
use qgate_cli::{campaign_norm_sweep, run_experiment, ExperimentConfig, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "qgate", version, about = "Unitary gate synthesis experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory, overriding the config.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Added to every configured seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the configured problem once per seed.
    Run { config: PathBuf },
    /// Solve from random pulses of each norm in the list, for every seed.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        norms: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<ExitCode> {
    let options = RunOptions {
        out_dir: cli.out.clone(),
        workers: cli.workers,
        seed_offset: cli.seed_offset,
    };
    match &cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(config)
                .with_context(|| format!("loading {}", config.display()))?;
            let summary = run_experiment(&cfg, &options)?;
            for run in &summary.runs {
                println!(
                    "seed {:>6}  {:<13} iterations {:>4}  gate error {:.3e}  norm {:.4}",
                    run.seed, run.status, run.iterations, run.final_gate_error, run.final_norm
                );
            }
            println!(
                "summary: {}",
                summary.out_dir.join("summary.json").display()
            );
            Ok(if summary.exit_code() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Sweep { config, norms } => {
            let cfg = ExperimentConfig::load(config)
                .with_context(|| format!("loading {}", config.display()))?;
            let rows = campaign_norm_sweep(&cfg, norms, &options)?;
            let out = cli.out.clone().unwrap_or(cfg.output.dir.clone());
            println!(
                "{} cells written to {}",
                rows.len(),
                out.join("sweep.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
