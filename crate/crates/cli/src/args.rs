use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "mpa",
    version,
    about = "Majority predictor accuracy and frozen-feature transfer tooling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// MPA of a label-pair CSV, or of target labels against dummy source labels.
    Score {
        /// `source_label,target_label` rows, or a target-label column with --dummy.
        labels: PathBuf,
        /// Derive source labels from a source model evaluated on --inputs.
        #[arg(long, requires_all = ["model", "inputs"])]
        dummy: bool,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long)]
        num_source: Option<usize>,
        #[arg(long)]
        num_target: Option<usize>,
        #[arg(long, default_value = "mpa-out")]
        out_dir: PathBuf,
    },
    /// Train source and target networks and run the feasibility check.
    Transfer {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Comma-separated increasing margins.
        #[arg(long, value_delimiter = ',')]
        gamma_grid: Option<Vec<f64>>,
        #[arg(long, default_value = "mpa-out")]
        out_dir: PathBuf,
    },
    /// Capacity and confidence terms for a finished transfer run.
    Bounds {
        /// Output directory of `mpa transfer`.
        run_dir: PathBuf,
        /// Margin; defaults to the largest feasible one.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Measure weights against zero instead of their initialization.
        #[arg(long)]
        ref_zero: bool,
        #[arg(long, default_value = "mpa-out")]
        out_dir: PathBuf,
    },
    /// Correlate MPA with transferred held-out accuracy over a synthetic suite.
    Correlate {
        suite: PathBuf,
        /// Run a single suite seed instead of the listed ones.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Also write the label pairs of every task.
        #[arg(long)]
        emit_tasks: bool,
        #[arg(long, default_value = "mpa-out")]
        out_dir: PathBuf,
    },
    /// Re-run a recorded command and compare its outputs with the manifest hashes.
    Replay {
        manifest: PathBuf,
        /// Where to write the re-run; defaults to `replay/` next to the manifest.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn absolute(p: &Path) -> std::io::Result<PathBuf> {
    std::path::absolute(p)
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Score { .. } => "score",
            Command::Transfer { .. } => "transfer",
            Command::Bounds { .. } => "bounds",
            Command::Correlate { .. } => "correlate",
            Command::Replay { .. } => "replay",
        }
    }

    /// Same command with every path made absolute, so a manifest can be replayed from anywhere.
    pub fn absolutized(&self) -> std::io::Result<Command> {
        let opt = |p: &Option<PathBuf>| p.as_deref().map(absolute).transpose();
        let mut c = self.clone();
        match &mut c {
            Command::Score {
                labels,
                model,
                inputs,
                out_dir,
                ..
            } => {
                *model = opt(model)?;
                *inputs = opt(inputs)?;
                *labels = absolute(labels)?;
                *out_dir = absolute(out_dir)?;
            }
            Command::Transfer { config, out_dir, .. } => {
                *config = absolute(config)?;
                *out_dir = absolute(out_dir)?;
            }
            Command::Bounds { run_dir, out_dir, .. } => {
                *run_dir = absolute(run_dir)?;
                *out_dir = absolute(out_dir)?;
            }
            Command::Correlate { suite, out_dir, .. } => {
                *suite = absolute(suite)?;
                *out_dir = absolute(out_dir)?;
            }
            Command::Replay { manifest, out_dir } => {
                *manifest = absolute(manifest)?;
                *out_dir = opt(out_dir)?;
            }
        }
        Ok(c)
    }

    pub fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::Score { out_dir, .. }
            | Command::Transfer { out_dir, .. }
            | Command::Bounds { out_dir, .. }
            | Command::Correlate { out_dir, .. } => Some(out_dir),
            Command::Replay { .. } => None,
        }
    }

    pub fn with_out_dir(&self, dir: PathBuf) -> Command {
        let mut c = self.clone();
        match &mut c {
            Command::Score { out_dir, .. }
            | Command::Transfer { out_dir, .. }
            | Command::Bounds { out_dir, .. }
            | Command::Correlate { out_dir, .. } => *out_dir = dir,
            Command::Replay { .. } => {}
        }
        c
    }
}
