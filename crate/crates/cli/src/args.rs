use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "lunar", version, about = "Local outlier detection with classical detectors and LUNAR")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a LUNAR model and write it with its training history.
    Fit(FitArgs),
    /// Score a CSV file with a saved model.
    Score(ScoreArgs),
    /// Run the multi-seed benchmark over detectors and k values.
    Bench(BenchArgs),
    /// Write the four-cluster toy dataset.
    Toy(ToyArgs),
    /// Score a regular 2-D lattice for contour plots.
    Grid(GridArgs),
}

/// Flags shared by every command that trains LUNAR.
#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long, value_name = "N")]
    pub epochs: Option<String>,
    #[arg(long, value_name = "RATE")]
    pub lr: Option<String>,
    #[arg(long, value_name = "L2")]
    pub weight_decay: Option<String>,
    #[arg(long, value_name = "N")]
    pub hidden_width: Option<String>,
    #[arg(long, value_name = "N")]
    pub hidden_depth: Option<String>,
    /// Mini-batch size, or "full".
    #[arg(long, value_name = "N|full")]
    pub batch_size: Option<String>,
    /// "sum" or "mean" of per-node squared errors.
    #[arg(long, value_name = "MODE")]
    pub loss_reduction: Option<String>,
    /// uniform, subspace or mixed.
    #[arg(long, value_name = "MIX")]
    pub neg_mix: Option<String>,
    #[arg(long, value_name = "EPS")]
    pub neg_eps: Option<String>,
    #[arg(long, value_name = "P")]
    pub neg_p: Option<String>,
    #[arg(long, value_name = "RATIO")]
    pub neg_ratio: Option<String>,
}

impl TrainFlags {
    pub fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("epochs", self.epochs.clone()),
            ("lr", self.lr.clone()),
            ("weight-decay", self.weight_decay.clone()),
            ("hidden-width", self.hidden_width.clone()),
            ("hidden-depth", self.hidden_depth.clone()),
            ("batch-size", self.batch_size.clone()),
            ("loss-reduction", self.loss_reduction.clone()),
            ("neg-mix", self.neg_mix.clone()),
            ("neg-eps", self.neg_eps.clone()),
            ("neg-p", self.neg_p.clone()),
            ("neg-ratio", self.neg_ratio.clone()),
        ]
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// key = value settings file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<String>,
    /// Name of the 0/1 label column, if the file has one.
    #[arg(long)]
    pub label_col: Option<String>,
    /// auto, protocol (labelled data) or holdout (85:15 of all rows).
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub label_col: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub label_col: Option<String>,
    /// Dataset name recorded in the report.
    #[arg(long)]
    pub name: Option<String>,
    /// Comma-separated detector names.
    #[arg(long)]
    pub detector: Option<String>,
    /// Comma-separated neighbour counts.
    #[arg(long)]
    pub k: Option<String>,
    /// Comma-separated trial seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub min_pts: Option<String>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: Option<String>,
    /// Reuse cells already present in the output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub per_cluster: Option<String>,
    #[arg(long)]
    pub n_uniform: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Saved LUNAR model; alternatively give --detector and --data.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub detector: Option<String>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub label_col: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub min_pts: Option<String>,
    /// Lattice points per axis.
    #[arg(long)]
    pub resolution: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_max: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}
