use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const OUT_ENV: &str = "CAPNET_OUT";

#[derive(Parser, Debug, Serialize)]
#[command(name = "capnet", version, about = "Country-product export networks and the binomial capabilities model")]
pub struct Cli {
    /// Output directory; created if absent.
    #[arg(long, global = true, env = OUT_ENV, default_value = "capnet-out")]
    pub out: PathBuf,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,

    /// TOML file whose keys supply default flag values for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Aggregate a trade CSV into an export table, or generate planted synthetic trade.
    Ingest(IngestArgs),
    /// Compute the revealed comparative advantage matrix.
    Rca(RcaArgs),
    /// Threshold RCA into the binary country-product matrix.
    Matrix(MatrixArgs),
    /// Degrees, proximity and density of a binary matrix.
    Metrics(MetricsArgs),
    /// Null-model ensemble of the k0-k1 diagrams.
    Nullmodel(NullmodelArgs),
    /// Fit normal, log-normal and Weibull distributions to a sample.
    Fitdist(FitdistArgs),
    /// Binomial capabilities model.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Grid calibration of the binomial model against a binary matrix.
    Calibrate(CalibrateArgs),
    /// Expected diversification against capability count.
    Quiescence(QuiescenceArgs),
    /// Summarize the artifacts of a run directory.
    Report(ReportArgs),
}

impl Command {
    /// Name used for the manifest file.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Rca(_) => "rca",
            Command::Matrix(_) => "matrix",
            Command::Metrics(_) => "metrics",
            Command::Nullmodel(_) => "nullmodel",
            Command::Fitdist(_) => "fitdist",
            Command::Model(ModelCommand::Simulate(_)) => "model_simulate",
            Command::Model(ModelCommand::Analytic(_)) => "model_analytic",
            Command::Calibrate(_) => "calibrate",
            Command::Quiescence(_) => "quiescence",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct IngestArgs {
    /// Trade CSV with header `country,product,value[,year]`.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,

    /// Keep only records of this year.
    #[arg(long)]
    pub year: Option<i32>,

    /// Generate trade from a planted binomial-model world instead of reading a file.
    #[arg(long)]
    pub synthetic: bool,

    #[command(flatten)]
    pub world: OptionalWorldArgs,

    #[arg(long)]
    pub seed: Option<u64>,
}

/// Model parameters that are only needed in some modes.
#[derive(Args, Debug, Serialize, Default)]
pub struct OptionalWorldArgs {
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, conflicts_with = "eta")]
    pub q: Option<f64>,
    /// Target density; sets q = ln(eta) / (N_a ln r).
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub na: Option<usize>,
    #[arg(long)]
    pub nc: Option<usize>,
    #[arg(long)]
    pub np: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct RcaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub year: Option<i32>,
    /// Write log10(RCA); zero entries become empty cells.
    #[arg(long)]
    pub log10: bool,
    /// Order rows and columns by decreasing degree of the network thresholded at `--order-threshold`.
    #[arg(long)]
    pub ordered: bool,
    #[arg(long, default_value_t = 1.0)]
    pub order_threshold: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct MatrixArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub year: Option<i32>,
    /// RCA threshold R*.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    /// Products removed after thresholding.
    #[arg(long, value_delimiter = ',')]
    pub drop_products: Vec<String>,
    /// Also write the adjacency as an edge list.
    #[arg(long)]
    pub edge_list: bool,
    /// Order rows by decreasing diversification and columns by decreasing ubiquity.
    #[arg(long)]
    pub ordered: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct MetricsArgs {
    /// Dense 0/1 matrix CSV.
    #[arg(long)]
    pub matrix: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct NullmodelArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub model: u8,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Swap attempts per edge for the degree-preserving model.
    #[arg(long, default_value_t = capnet::null_models::DEFAULT_SWAP_FACTOR)]
    pub swap_factor: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Diversification,
    Ubiquity,
    Proximity,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Diversification => "diversification",
            SampleKind::Ubiquity => "ubiquity",
            SampleKind::Proximity => "proximity",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct FitdistArgs {
    /// CSV holding the sample in `--column`.
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "value")]
    pub column: String,
    /// Take the sample from a 0/1 matrix instead.
    #[arg(long, requires = "sample")]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub sample: Option<SampleKind>,
    #[arg(long, value_delimiter = ',', default_value = "normal,lognormal,weibull")]
    pub families: Vec<String>,
    /// Also report the variance-weighted KS statistic.
    #[arg(long)]
    pub weighted_ks: bool,
    /// Label used in the output file name; defaults to the sample kind or the column.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCommand {
    /// Sample a world and its Leontief network.
    Simulate(SimulateArgs),
    /// Closed-form curves, implied densities and derivative checks.
    Analytic(AnalyticArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct WorldArgs {
    #[arg(long)]
    pub r: f64,
    #[arg(long, required_unless_present = "eta", conflicts_with = "eta")]
    pub q: Option<f64>,
    /// Target density; sets q = ln(eta) / (N_a ln r).
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub na: usize,
    #[arg(long)]
    pub nc: usize,
    #[arg(long)]
    pub np: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the capability holdings and requirements matrices.
    #[arg(long)]
    pub export_world: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    /// Points per curve and per derivative check.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Finite-difference step of the derivative checks.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 0.50)]
    pub r_min: f64,
    #[arg(long, default_value_t = 0.98)]
    pub r_max: f64,
    #[arg(long, default_value_t = 0.02)]
    pub r_step: f64,
    #[arg(long, default_value_t = 10)]
    pub na_min: usize,
    #[arg(long, default_value_t = 200)]
    pub na_max: usize,
    #[arg(long, default_value_t = 5)]
    pub na_step: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds_per_cell: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub r2_quantile: f64,
    #[arg(long, default_value_t = 0.1)]
    pub ks_quantile: f64,
    /// Score the proximity layer with the variance-weighted KS statistic.
    #[arg(long)]
    pub weighted_ks: bool,
    /// Replicates of the heterogeneous refit; 0 skips it.
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct QuiescenceArgs {
    #[arg(long, required_unless_present = "eta", conflicts_with = "eta")]
    pub q: Option<f64>,
    /// Target density; needs `--r` to set q.
    #[arg(long, requires = "r")]
    pub eta: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Capability totals, one curve each.
    #[arg(long, value_delimiter = ',', required = true)]
    pub na: Vec<usize>,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// Run directory to summarize; defaults to `--out`.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}
