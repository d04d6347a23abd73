use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dcov", version, about = "Distance covariance, distance correlation and tests of independence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads; 1 gives bit-reproducible output
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Missing {
    /// Fail on the first empty or NA cell
    Error,
    /// Drop rows with an empty or NA cell in a selected column
    Drop,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    pub input: PathBuf,

    /// Columns of the first sample: names or zero-based ranges, e.g. `a,b` or `0:2`
    #[arg(long)]
    pub x: String,

    /// Columns of the second sample
    #[arg(long)]
    pub y: String,

    #[arg(long, value_enum, default_value_t = Missing::Drop)]
    pub missing: Missing,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance covariance, correlation and variances
    Stats(StatsArgs),
    /// Test of independence
    Test(TestArgs),
    /// Distance correlation test on ranks of two univariate samples
    RankTest(RankTestArgs),
    /// Leave-one-out replicates and influence diagnostics
    Jackknife(JackknifeArgs),
    /// Closed-form curves, constants and the Brownian covariance check
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Monte Carlo power comparison
    Power(PowerArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Distance exponent in (0, 2]
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,

    /// Whiten each sample by its covariance first
    #[arg(long, conflicts_with = "rank")]
    pub affine: bool,

    /// Use ranks of univariate samples, ties broken at random
    #[arg(long)]
    pub rank: bool,

    /// Seed for tie-breaking with --rank
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Permutation,
    Chi2,
    Rank,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum, default_value_t = Method::Permutation)]
    pub method: Method,

    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,

    #[arg(long)]
    pub affine: bool,

    /// Permutation replicates
    #[arg(long, default_value_t = 999)]
    pub replicates: usize,

    #[arg(long, default_value_t = 0.10)]
    pub level: f64,

    /// Drawn from the OS when omitted; always reported
    #[arg(long)]
    pub seed: Option<u64>,

    /// Permute n dCov^2 / T2 instead of n dCov^2
    #[arg(long)]
    pub normalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankModeArg {
    /// Published critical values (levels 0.10 and 0.05)
    Table,
    /// Full enumeration of the permutation distribution (n <= 10)
    Exact,
}

#[derive(Debug, Args)]
pub struct RankTestArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 0.10)]
    pub level: f64,

    #[arg(long, value_enum, default_value_t = RankModeArg::Table)]
    pub mode: RankModeArg,

    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct JackknifeArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,

    /// Column holding a label for each row
    #[arg(long)]
    pub labels: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// dCor of a standard bivariate normal pair as a function of rho
    BvnCurve(BvnCurveArgs),
    /// The weight constant C(d, alpha)
    Constants(ConstantsArgs),
    /// Monte Carlo Brownian covariance against dCov^2 on a small data set
    BrownianCheck(BrownianArgs),
}

#[derive(Debug, Args)]
pub struct BvnCurveArgs {
    /// Equally spaced grid points on [-1, 1]
    #[arg(long, default_value_t = 201)]
    pub points: usize,

    /// Explicit values of rho, overriding --points
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    /// Dimensions
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub dim: Vec<usize>,

    /// Exponents in (0, 2)
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub alpha: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct BrownianArgs {
    /// Data file; the built-in toy data is used when omitted
    #[arg(long, requires_all = ["x", "y"])]
    pub input: Option<PathBuf>,

    #[arg(long)]
    pub x: Option<String>,

    #[arg(long)]
    pub y: Option<String>,

    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,

    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// `bvn:RHO`, `density` or `gumbel:THETA`
    #[arg(long)]
    pub model: String,

    /// Sample sizes
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,

    /// Any of dcov_perm, pearson_t, spearman, rank_dcov
    #[arg(long, value_delimiter = ',', default_value = "dcov_perm,pearson_t")]
    pub tests: Vec<String>,

    #[arg(long, default_value_t = 2000)]
    pub runs: usize,

    #[arg(long, default_value_t = 0.10)]
    pub level: f64,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Test x against the residuals of a least-squares fit of y on x
    #[arg(long)]
    pub residuals: bool,

    /// Permutation replicates for dcov_perm
    #[arg(long, default_value_t = 199)]
    pub replicates: usize,
}
