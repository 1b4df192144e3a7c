//! Command-line grammar. The parsed form doubles as the saved run config.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use softlabel_core::bounds::BoundVariant;
use softlabel_core::dynamics::Family;
use softlabel_core::noise::NoiseKind;

#[derive(Debug, Parser)]
#[command(name = "softlabel", version, about = "Soft-label effectiveness indicators, bounds and simulators")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    /// Write the run config as JSON before running, for later `repro`.
    #[arg(long, global = true, value_name = "PATH")]
    pub save_config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct GlobalArgs {
    /// Root seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output format on stdout (default depends on the subcommand).
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,

    /// Log level; the SOFTLABEL_LOG environment variable takes precedence.
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Off => log::LevelFilter::Off,
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    #[serde(flatten)]
    pub global: GlobalArgs,
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize, PartialEq)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Indicators of a soft-label dataset.
    Analyze(AnalyzeArgs),
    /// Sample complexity and failure-probability bound.
    Bound(BoundArgs),
    /// Indicators of one-hot labels under additive noise.
    Noise(NoiseArgs),
    /// Unreliable candidate-set data: generate, or check its rates.
    Pll(PllArgs),
    /// Accuracy dynamics under incomplete supervision.
    Dynamics(DynamicsArgs),
    /// Biased teacher on Gaussian blobs, or direct label corruption.
    Teacher(TeacherArgs),
    /// ERM failure rates on a finite hypothesis class.
    Simulate(SimulateArgs),
    /// Replay a saved run config.
    Repro(ReproArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct AnalyzeArgs {
    /// Dataset path (.csv is read as CSV, anything else as JSONL).
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,

    /// Top-k cardinality.
    #[arg(long, default_value_t = 1, conflicts_with = "support")]
    pub k: usize,

    /// Use nonzero-mass sets instead of the top-k.
    #[arg(long)]
    pub support: bool,

    /// Rescale rows by their sum (for unnormalized scores).
    #[arg(long)]
    pub normalize: bool,

    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct BoundArgs {
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub eps: f64,
    /// Failure probability δ.
    #[arg(long)]
    pub conf: f64,
    /// Natarajan dimension.
    #[arg(long)]
    pub dh: u32,
    /// Label-cardinality constant L.
    #[arg(long)]
    pub labels: u32,
    #[arg(long, default_value = "derivation")]
    pub variant: BoundVariant,
    /// Evaluate the failure bound at this n (default: the required n).
    #[arg(long)]
    pub n: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMethod {
    Mc,
    Quad,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct NoiseArgs {
    #[arg(long)]
    pub kind: NoiseKind,
    #[arg(long)]
    pub scale: f64,
    #[arg(long = "classes")]
    pub c: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = NoiseMethod::Quad)]
    pub method: NoiseMethod,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Also write a noisy dataset of `--n` examples here.
    #[arg(long, value_name = "PATH", requires = "n")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PllMode {
    Generate,
    Verify,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct PllArgs {
    #[arg(value_enum, default_value_t = PllMode::Generate)]
    pub mode: PllMode,
    /// Partial rate η.
    #[arg(long)]
    pub eta: f64,
    /// Unreliable rate μ.
    #[arg(long)]
    pub mu: f64,
    #[arg(long = "classes")]
    pub c: usize,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Candidate-set JSONL output (generate mode).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct DynamicsArgs {
    #[arg(long)]
    pub family: Family,
    /// Comma-separated family parameters; a table takes n² grid values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub params: Vec<f64>,
    #[arg(long = "classes")]
    pub c: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho0: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Write the trajectory CSV here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherMode {
    Train,
    Corrupt,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct TeacherArgs {
    #[arg(value_enum, default_value_t = TeacherMode::Train)]
    pub mode: TeacherMode,
    /// Loss weights α1,α2,α3.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.2, 1.1, 2.0])]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Random target labels per example.
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long = "classes", default_value_t = 10)]
    pub c: usize,
    #[arg(long, default_value_t = 128)]
    pub features: usize,
    #[arg(long, default_value_t = 6.0)]
    pub blob_sep: f64,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Also train ground-truth and re-weighting students and compare them.
    #[arg(long)]
    pub compare: bool,
    #[arg(long, default_value_t = 500)]
    pub student_epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub student_lr: f64,
    /// Corrupt mode: target Δ.
    #[arg(long)]
    pub target_delta: Option<f64>,
    /// Corrupt mode: target γ (symmetric filling when absent).
    #[arg(long)]
    pub target_gamma: Option<f64>,
    /// Corrupt mode: number of examples.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Soft-label JSONL output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassArg {
    Table,
    Intervals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismArg {
    Corruptor,
    Pll,
    Noise,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ClassArg::Intervals)]
    pub class: ClassArg,
    /// JSON array of label rows, one per hypothesis (`--class table`).
    #[arg(long, value_name = "PATH", required_if_eq("class", "table"))]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub pool_size: usize,
    #[arg(long = "classes", default_value_t = 10)]
    pub c: usize,
    /// Label changes allowed along the pool (`--class intervals`).
    #[arg(long, default_value_t = 1)]
    pub thresholds: usize,
    /// Target labels on the pool, comma-separated (default: first half
    /// label 0, second half label c − 1; the first hypothesis for tables).
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = MechanismArg::Corruptor)]
    pub label_mech: MechanismArg,
    /// corruptor: k,delta[,gamma]; pll: eta,mu; noise: scale,k.
    #[arg(long, value_delimiter = ',', required = true)]
    pub mech_params: Vec<f64>,
    #[arg(long, default_value = "gaussian")]
    pub noise_kind: NoiseKind,
    #[arg(long, value_delimiter = ',', default_values_t = [10, 30, 100, 300, 1000])]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.05)]
    pub conf: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Natarajan dimension (default: exhaustive search).
    #[arg(long)]
    pub dh: Option<usize>,
    /// Label-cardinality constant (default: the class count).
    #[arg(long)]
    pub labels: Option<u32>,
    /// Write the output here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct ReproArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
}
