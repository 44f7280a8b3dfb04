use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cna_cli::config::{ExperimentConfig, SuiteConfig};
use cna_cli::{experiment, landscape, report, suite, Result};
use cna_core::analysis::{GroupBy, DEFAULT_RESOLUTION};

#[derive(Parser)]
#[command(name = "cna", version, about = "Train networks and study how complexity tracks generalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or resume) one experiment.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Record the probe-set trajectory after every step.
        #[arg(long)]
        record_trajectory: bool,
    },
    /// Run a grid of experiments and report over them.
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Project a recorded trajectory onto its principal plane and evaluate CNA there.
    Landscape {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
    },
    /// Correlate each metric with the generalization gap.
    Report {
        /// Glob over run record files.
        #[arg(long)]
        runs: String,
        #[arg(long, value_enum, default_value_t = Group::Arch)]
        group_by: Group,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Keep only the last record of each run.
        #[arg(long)]
        latest: bool,
    },
    /// Gap metrics of a checkpoint on a dataset.
    Metrics {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset spec as a JSON file or inline JSON.
        #[arg(long)]
        data: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Group {
    Arch,
    Dataset,
}

/// Exit status on success; a failed suite cell lends its own code.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Train { config, record_trajectory } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.record_trajectory |= record_trajectory;
            let summary = experiment::run_training(&cfg, &mut |l| eprintln!("{l}"))?;
            if summary.trained == 0 {
                eprintln!("{} already complete", cfg.output_dir.display());
            }
            println!("{}", cfg.output_dir.display());
        }
        Command::Suite { config, jobs } => {
            let cfg = SuiteConfig::load(&config)?;
            let summary = suite::run_suite(&cfg, jobs, &|l| eprintln!("{l}"))?;
            if let Some(r) = &summary.report {
                print!("{}", report::summarize(&r.report));
            } else if let Some(e) = &summary.report_error {
                eprintln!("report skipped: {e}");
            }
            let failed = summary.failures();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", summary.cells.len());
                let code = summary.cells.iter().find_map(|c| match c.status {
                    suite::CellStatus::Failed { exit_code, .. } => Some(exit_code as u8),
                    _ => None,
                });
                return Ok(code.unwrap_or(1));
            }
        }
        Command::Landscape { run, resolution } => {
            let s = landscape::run_landscape(&run, resolution)?;
            println!(
                "rank {} plane explains {:.1}% + {:.1}% of variance; {} undefined cells; wrote {}",
                s.rank,
                100.0 * s.explained_ratio[0],
                100.0 * s.explained_ratio[1],
                s.undefined_cells,
                s.output_dir.display()
            );
        }
        Command::Report { runs, group_by, out, latest } => {
            let group_by = match group_by {
                Group::Arch => GroupBy::Arch,
                Group::Dataset => GroupBy::Dataset,
            };
            let r = report::run_report(&runs, group_by, latest, &out)?;
            print!("{}", report::summarize(&r.report));
            eprintln!("{} records; wrote {}", r.records, r.dir.display());
        }
        Command::Metrics { checkpoint, data } => {
            let v = experiment::checkpoint_metrics(&checkpoint, &data)?;
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
