use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fspd_core::types::{MarketQuote, ModelParams, SeriesControl, Truncation};

/// European call prices under space-time fractional diffusion.
///
/// Every flag can also be set through an `FSPD_` environment variable
/// (for example `FSPD_ALPHA`); a flag on the command line wins.
#[derive(Debug, Parser)]
#[command(name = "fspd", version)]
pub struct Cli {
    /// Output format: text rounds to 3 decimals, json and csv carry 12
    /// significant digits.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text, env = "FSPD_FORMAT")]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price one call.
    Price(PriceArgs),
    /// Print the (n, m) terms of the series and the cumulative call row.
    Table(TableArgs),
    /// Price every row of a CSV file.
    Batch(BatchArgs),
    /// Compute the risk-neutral factor mu.
    Mu(MuArgs),
    /// Sample the Green function on a grid.
    Green(GreenArgs),
    /// Price a strike range with one mu.
    Smile(SmileArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Space-fractional order, 1 < alpha <= 2 for pricing.
    #[arg(long, default_value_t = 1.7, env = "FSPD_ALPHA", allow_negative_numbers = true)]
    pub alpha: f64,
    /// Time-fractional order.
    #[arg(long, default_value_t = 0.9, env = "FSPD_GAMMA", allow_negative_numbers = true)]
    pub gamma: f64,
    /// Scale (market risk).
    #[arg(long, default_value_t = 0.2, env = "FSPD_SIGMA", allow_negative_numbers = true)]
    pub sigma: f64,
    /// Asymmetry; defaults to maximal negative asymmetry alpha - 2.
    #[arg(long, env = "FSPD_THETA", allow_negative_numbers = true)]
    pub theta: Option<f64>,
}

impl ModelArgs {
    pub fn params(&self) -> ModelParams {
        match self.theta {
            Some(theta) => ModelParams::new(self.alpha, self.gamma, self.sigma, theta),
            None => ModelParams::max_asymmetry(self.alpha, self.gamma, self.sigma),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct QuoteArgs {
    #[arg(long, default_value_t = 3800.0, env = "FSPD_SPOT", allow_negative_numbers = true)]
    pub spot: f64,
    #[arg(long, default_value_t = 4000.0, env = "FSPD_STRIKE", allow_negative_numbers = true)]
    pub strike: f64,
    /// Continuously compounded risk-free rate.
    #[arg(long, default_value_t = 0.01, env = "FSPD_RATE", allow_negative_numbers = true)]
    pub rate: f64,
    /// Continuous dividend yield.
    #[arg(long, default_value_t = 0.0, env = "FSPD_DIVIDEND", allow_negative_numbers = true)]
    pub dividend: f64,
    /// Time to maturity in years.
    #[arg(long, default_value_t = 1.0, env = "FSPD_MATURITY", allow_negative_numbers = true)]
    pub maturity: f64,
}

impl QuoteArgs {
    pub fn quote(&self) -> MarketQuote {
        MarketQuote::new(self.spot, self.strike, self.rate, self.dividend, self.maturity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruncationArg {
    Rectangular,
    Triangular,
}

#[derive(Debug, Clone, Args)]
pub struct SeriesArgs {
    /// Stop once a whole shell of terms is below this.
    #[arg(long, default_value_t = 1e-6, env = "FSPD_TOL")]
    pub tol: f64,
    /// Largest shell index summed before giving up.
    #[arg(long, default_value_t = 64, env = "FSPD_MAX_INDEX")]
    pub max_index: usize,
    #[arg(long, value_enum, default_value_t = TruncationArg::Rectangular, env = "FSPD_TRUNCATION")]
    pub truncation: TruncationArg,
}

impl SeriesArgs {
    pub fn control(&self) -> SeriesControl {
        let mode = match self.truncation {
            TruncationArg::Rectangular => Truncation::Rectangular,
            TruncationArg::Triangular => Truncation::Triangular,
        };
        SeriesControl::new(self.tol, self.max_index).with_mode(mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Double residue series.
    Series,
    /// Payoff integrated against the Green function.
    Convolution,
    /// Two-dimensional Mellin-Barnes integral.
    Mb2,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub quote: QuoteArgs,
    #[command(flatten)]
    pub series: SeriesArgs,
    #[arg(long, value_enum, default_value_t = Method::Series, env = "FSPD_METHOD")]
    pub method: Method,
    /// Use this mu instead of computing the risk-neutral factor.
    #[arg(long, env = "FSPD_MU", allow_negative_numbers = true)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub quote: QuoteArgs,
    #[arg(long, default_value_t = 7, env = "FSPD_MAX_N")]
    pub max_n: usize,
    #[arg(long, default_value_t = 7, env = "FSPD_MAX_M")]
    pub max_m: usize,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// CSV with header `id,spot,strike,rate,dividend,maturity,alpha,gamma,sigma`.
    #[arg(long, env = "FSPD_INPUT")]
    pub input: PathBuf,
    /// Output CSV; standard output if absent.
    #[arg(long, env = "FSPD_OUTPUT")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub series: SeriesArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    /// Closed form at gamma = 1, series otherwise.
    Auto,
    Series,
    Mb,
    Subordination,
}

#[derive(Debug, Args)]
pub struct MuArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = RouteArg::Auto, env = "FSPD_ROUTE")]
    pub route: RouteArg,
}

#[derive(Debug, Args)]
pub struct GreenArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sample points `lo:hi:step`; x = 0 is skipped.
    #[arg(long, default_value = "-2:2:0.1", env = "FSPD_X", allow_hyphen_values = true)]
    pub x: Range,
    #[arg(long, default_value_t = 1.0, env = "FSPD_T")]
    pub t: f64,
    /// Length-scale factor; the risk-neutral factor if absent.
    #[arg(long, env = "FSPD_MU", allow_negative_numbers = true)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SmileArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub quote: QuoteArgs,
    #[command(flatten)]
    pub series: SeriesArgs,
    /// Strikes `lo:hi:step`, both ends included.
    #[arg(
        long,
        default_value = "3000:5000:500",
        env = "FSPD_STRIKES",
        allow_hyphen_values = true
    )]
    pub strikes: Range,
}

/// An inclusive grid `lo:hi:step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(format!("expected lo:hi:step, got {s:?}"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let r = Range {
            lo: num(lo)?,
            hi: num(hi)?,
            step: num(step)?,
        };
        if !(r.step > 0.0 && r.hi >= r.lo && r.lo.is_finite() && r.hi.is_finite()) {
            return Err(format!("need step > 0 and lo <= hi, got {s:?}"));
        }
        if (r.hi - r.lo) / r.step > 1e6 {
            return Err(format!("grid {s:?} has more than a million points"));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_includes_both_ends() {
        let r: Range = "3000:5000:500".parse().unwrap();
        assert_eq!(r.points(), vec![3000.0, 3500.0, 4000.0, 4500.0, 5000.0]);
        let r: Range = "-0.2:0.2:0.1".parse().unwrap();
        assert_eq!(r.points().len(), 5);
    }

    #[test]
    fn range_rejects_bad_grids() {
        for s in ["1:2", "2:1:0.5", "0:1:0", "a:1:1", "0:1:-1"] {
            assert!(s.parse::<Range>().is_err(), "{s}");
        }
    }

    #[test]
    fn theta_defaults_to_maximal_asymmetry() {
        let m = ModelArgs {
            alpha: 1.6,
            gamma: 0.9,
            sigma: 0.2,
            theta: None,
        };
        assert!(m.params().is_max_asymmetry());
    }
}
