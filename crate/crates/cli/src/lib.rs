//! `nutriplan` command line: batch planning, safety audit, evaluation,
//! synthetic cohorts and a single-endpoint HTTP server.
//!
//! Exit codes: 0 success, 1 runtime failure (including any failed patient),
//! 2 configuration or usage error.

pub mod commands;
mod error;
pub mod manifest;

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nutriplan_core::config::BackendMode;
use nutriplan_core::evaluation::Aggregation;

pub use error::CliError;

use commands::{AuditArgs, EvaluateArgs, RunArgs, ServeArgs, SynthArgs};

#[derive(Debug, Parser)]
#[command(name = "nutriplan", version, about = "Multi-agent nutrition care planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan every patient of a cohort into an output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `backend.mode` from the config.
        #[arg(long)]
        backend: Option<BackendMode>,
    },
    /// Re-check stored plans for drug-food violations.
    Audit {
        #[arg(long)]
        plans: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        drug_classes: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute cohort metrics over stored plans.
    Evaluate {
        #[arg(long)]
        plans: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        nutrient_db: Option<PathBuf>,
        #[arg(long)]
        quality_table: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        aggregation: Option<Aggregation>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve `POST /v1/plan`.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long)]
        backend: Option<BackendMode>,
    },
    /// Write a seeded synthetic cohort.
    Synth {
        #[arg(long, default_value_t = 330)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs one command, printing its human-readable result to stdout.
pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, cohort, out, backend } => {
            let manifest = commands::cmd_run(&RunArgs { config, cohort, out: out.clone(), backend })?;
            println!(
                "manifest {}: {} patient(s) planned into {}",
                manifest.manifest_id,
                manifest.patients.len(),
                out.display()
            );
        }
        Command::Audit { plans, cohort, config, rules, drug_classes, labels, epsilon, out } => {
            let args = AuditArgs { plans, cohort, config, rules, drug_classes, labels, epsilon, out };
            let result = commands::cmd_audit(&args)?;
            print!("{}", result.table.render_text());
            println!("written to {}", result.written_to.display());
        }
        Command::Evaluate { plans, cohort, config, nutrient_db, quality_table, lexicon, aggregation, out } => {
            let args = EvaluateArgs { plans, cohort, config, nutrient_db, quality_table, lexicon, aggregation, out };
            let (report, path) = commands::cmd_evaluate(&args)?;
            print!("{}", report.render_text());
            println!("written to {}", path.display());
        }
        Command::Serve { config, bind, backend } => commands::cmd_serve(&ServeArgs { config, bind, backend })?,
        Command::Synth { n, seed, out } => {
            let written = commands::cmd_synth(&SynthArgs { n, seed, out: out.clone() })?;
            println!("wrote {written} synthetic profile(s) to {}", out.display());
        }
    }
    Ok(())
}
