use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use techcast::hindcast::Weighting;
use techcast::surrogate::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(name = "techcast", version, about = "Distributional forecasts of technology costs")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, value_parser = positive)]
    pub threads: Option<usize>,

    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-technology statistics, the improving split and the mu-K regression.
    Describe(DescribeArgs),
    /// Rolling-origin hindcasts and the empirical error-growth curve.
    Hindcast(HindcastArgs),
    /// Surrogate-data validation: null bands, deviation tests, theta estimates.
    Validate(ValidateArgs),
    /// Distributional forecast of one technology.
    Forecast(ForecastArgs),
    /// Probability that one technology is cheaper than another.
    Compare(CompareArgs),
    /// Years until a deterministic exponential trend overtakes another.
    Trend(TrendArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Long-format CSV with columns technology,year,cost (sector optional).
    #[arg(long)]
    pub input: PathBuf,

    /// Output directory, created if missing.
    #[arg(long, default_value = "techcast-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectionArgs {
    /// Significance level of the one-sided drift test.
    #[arg(long, default_value_t = techcast::dataset::DEFAULT_ALPHA, value_parser = probability)]
    pub alpha: f64,

    /// Keep every technology instead of only the improving ones.
    #[arg(long)]
    pub all_series: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub io: InputArgs,

    #[arg(long, default_value_t = techcast::dataset::DEFAULT_ALPHA, value_parser = probability)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingArg {
    Pooled,
    EqualTech,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Pooled => Weighting::Pooled,
            WeightingArg::EqualTech => Weighting::EqualTech,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HindcastArgs {
    #[command(flatten)]
    pub io: InputArgs,

    #[command(flatten)]
    pub selection: SelectionArgs,

    /// Estimation window m (number of trailing differences).
    #[arg(long, default_value_t = 5, value_parser = window)]
    pub window: usize,

    /// Longest forecast horizon.
    #[arg(long, default_value_t = techcast::hindcast::DEFAULT_TAU_MAX, value_parser = positive)]
    pub tau_max: usize,

    #[arg(long, value_enum, default_value_t = WeightingArg::Pooled)]
    pub weighting: WeightingArg,

    /// Adds a predicted-growth column for this MA coefficient.
    #[arg(long, value_parser = theta, allow_negative_numbers = true)]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaSource {
    /// Forecast-count weighted mean of per-series MLEs.
    Weighted,
    /// Value whose surrogate error growth matches the data.
    Matched,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub io: InputArgs,

    #[command(flatten)]
    pub selection: SelectionArgs,

    #[arg(long, default_value_t = 5, value_parser = window)]
    pub window: usize,

    #[arg(long, default_value_t = techcast::hindcast::DEFAULT_TAU_MAX, value_parser = positive)]
    pub tau_max: usize,

    #[arg(long, value_enum, default_value_t = WeightingArg::Pooled)]
    pub weighting: WeightingArg,

    /// MA coefficient to validate.
    #[arg(long, value_parser = theta, conflicts_with = "theta_from", allow_negative_numbers = true)]
    pub theta: Option<f64>,

    /// Estimate theta instead of taking it from --theta.
    #[arg(long, value_enum, default_value_t = ThetaSource::Matched)]
    pub theta_from: ThetaSource,

    /// Theta grid for matching and the forecast sweep: `a:b:step` or `a,b,c`.
    #[arg(long, default_value = "0:0.9:0.01")]
    pub grid: String,

    /// Monte Carlo replications for every stage. Without it each stage
    /// uses its own default (1000 bands, 10000 deviation, 3000 matching).
    #[arg(long, value_parser = positive)]
    pub reps: Option<usize>,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Also score MA-adjusted forecasts over the grid.
    #[arg(long)]
    pub sweep: bool,

    /// Extra checks: `vary-m=4,8,16`, `half=TRIALS`, `tau-max=N`,
    /// `fat-tails=DF,...`. Repeatable.
    #[arg(long = "robustness", value_name = "CHECK")]
    pub robustness: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowArg {
    All,
    Value(usize),
}

fn window_arg(s: &str) -> Result<WindowArg, String> {
    if s.eq_ignore_ascii_case("all") {
        Ok(WindowArg::All)
    } else {
        s.parse::<usize>()
            .ok()
            .filter(|m| *m >= 2)
            .map(WindowArg::Value)
            .ok_or_else(|| format!("expected `all` or an integer >= 2, got `{s}`"))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub io: InputArgs,

    /// Technology name as it appears in the input.
    #[arg(long)]
    pub tech: String,

    /// Forecast horizons 1..=HORIZON.
    #[arg(long, default_value_t = 20, value_parser = positive)]
    pub horizon: usize,

    #[arg(long, default_value_t = 0.0, value_parser = theta, allow_negative_numbers = true)]
    pub theta: f64,

    /// `all` for every difference, or a trailing window length.
    #[arg(long, default_value = "all", value_parser = window_arg)]
    pub window: WindowArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// Read technology A from this CSV (needs --tech).
    #[arg(long, requires = "tech")]
    pub input: Option<PathBuf>,

    #[arg(long, default_value = "techcast-out")]
    pub out: PathBuf,

    /// Technology A, estimated from --input.
    #[arg(long, requires = "input")]
    pub tech: Option<String>,

    /// Current cost of technology A.
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    pub a_cost: Option<f64>,

    /// Drift of technology A's log cost.
    #[arg(
        long,
        required_unless_present = "input",
        conflicts_with = "input",
        allow_negative_numbers = true
    )]
    pub a_mu: Option<f64>,

    /// Volatility of technology A.
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    pub a_k: Option<f64>,

    /// Current cost of technology B.
    #[arg(long)]
    pub b_cost: f64,

    #[arg(long, allow_negative_numbers = true)]
    pub b_mu: f64,

    /// Volatility of technology B; a comma list gives one scenario each.
    #[arg(long, value_delimiter = ',', required = true)]
    pub b_k: Vec<f64>,

    /// Estimation window shared by both technologies. With --input it
    /// defaults to every difference of technology A.
    #[arg(long, value_parser = window)]
    pub window: Option<usize>,

    #[arg(long, default_value_t = 0.0, value_parser = theta, allow_negative_numbers = true)]
    pub theta: f64,

    /// Horizons 1..=HORIZON in the output table.
    #[arg(long, default_value_t = 40, value_parser = positive)]
    pub horizon: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrendArgs {
    /// Starting level of the faster-growing quantity.
    #[arg(long)]
    pub f: f64,
    /// Its annual growth factor.
    #[arg(long)]
    pub gf: f64,
    /// Starting level of the target.
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub gs: f64,

    #[arg(long, default_value = "techcast-out")]
    pub out: PathBuf,
}

fn probability(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|p| (0.0..=1.0).contains(p))
        .ok_or_else(|| format!("expected a number in [0, 1], got `{s}`"))
}

fn positive(s: &str) -> Result<usize, String> {
    s.parse::<usize>()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| format!("expected an integer >= 1, got `{s}`"))
}

fn window(s: &str) -> Result<usize, String> {
    s.parse::<usize>()
        .ok()
        .filter(|n| *n >= 4)
        .ok_or_else(|| format!("expected an integer >= 4, got `{s}`"))
}

fn theta(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|t| *t > -1.0 && *t < 1.0)
        .ok_or_else(|| format!("expected a number strictly between -1 and 1, got `{s}`"))
}
