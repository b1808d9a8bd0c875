//! `enwarsim` command-line driver.
//!
//! Exit codes: 0 success, 1 run failure, 2 usage error, 3 missing asset.
//! Failures print one JSON error record on stderr.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use enwarsim::Error;

#[derive(Debug, Parser)]
#[command(name = "enwarsim", version, about = "Degradation-aware mmWave orchestration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Base seed for every random stream of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML config file, or a run manifest to replay.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Config override `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct AssetArgs {
    /// Trained classifier; defaults to `classifier.json` in the asset directory.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// `oracle`, `rule-based`, `random`, or a trained policy file; defaults to
    /// `policy.txt` in the asset directory.
    #[arg(long)]
    pub policy: Option<String>,
    /// Performance table CSV; defaults to the asset directory's copy, then the built-in table.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario file.
    GenScenario {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ticks: Option<usize>,
    },
    /// Train the degradation classifier on a synthetic corpus.
    TrainClassifier {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Train the routing policy with PPO.
    TrainPolicy {
        #[command(flatten)]
        common: Common,
        /// Rollout-and-update iterations.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run the orchestration loop over a scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        assets: AssetArgs,
        /// Scenario file; generated from the config when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Smoothing threshold on the degraded-frame fraction.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Compare the trained policy against the baselines.
    EvalPolicies {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        assets: AssetArgs,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Reward as a function of the smoothing threshold.
    SweepThreshold {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        assets: AssetArgs,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Compare handover strategies over a sequence ensemble.
    EvalHandover {
        #[command(flatten)]
        common: Common,
        /// Ensemble JSONL; generated from the config when omitted.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long)]
        sequences: Option<usize>,
        /// Also write the generated ensemble.
        #[arg(long)]
        save_ensemble: bool,
    },
    /// Generate a corpus, train and score the classifier, and time it.
    BenchClassifier {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Render decision reports from a packet stream.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        packets: PathBuf,
        /// Render only this tick.
        #[arg(long)]
        tick: Option<u64>,
    },
}

fn error_record(kind: &str, message: &str, code: u8) -> ExitCode {
    let rec = serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{rec}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return error_record("usage", e.to_string().trim(), 2);
        }
    };
    match commands::run(cli.command, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e {
                Error::MissingAsset(_) => 3,
                _ => 1,
            };
            error_record(e.kind(), &e.to_string(), code)
        }
    }
}
