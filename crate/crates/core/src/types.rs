//! Parameter containers shared by every other module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing parameters against closed interval bounds and
/// the `theta = alpha - 2` pinning.
pub const PARAM_EPS: f64 = 1e-12;

/// Model-side state: fractional orders, asymmetry and volatility scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Order of the space-fractional (Riesz-Feller) derivative.
    pub alpha: f64,
    /// Order of the time-fractional (Caputo) derivative.
    pub gamma: f64,
    /// Volatility scale per square-root of time.
    pub sigma: f64,
    /// Asymmetry parameter, inside the Feller-Takayasu diamond.
    pub theta: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, gamma: f64, sigma: f64, theta: f64) -> Self {
        ModelParams {
            alpha,
            gamma,
            sigma,
            theta,
        }
    }

    /// Maximal negative asymmetry, `theta = alpha - 2`: the only case that
    /// can be priced.
    pub fn max_asymmetry(alpha: f64, gamma: f64, sigma: f64) -> Self {
        ModelParams::new(alpha, gamma, sigma, alpha - 2.0)
    }

    /// Scaling exponent `gamma / alpha` of the Green function.
    pub fn scaling_exponent(&self) -> f64 {
        self.gamma / self.alpha
    }

    /// Lower bound on gamma for the mu and price series: `1 - 1/alpha`.
    pub fn gamma_lower_bound(&self) -> f64 {
        1.0 - 1.0 / self.alpha
    }

    pub fn is_max_asymmetry(&self) -> bool {
        (self.theta - (self.alpha - 2.0)).abs() <= PARAM_EPS
    }

    pub fn validate(self, for_pricing: bool) -> Result<Self> {
        validate_model(self, for_pricing)
    }
}

/// Checks the model invariants; the pricing ones only when `for_pricing`.
///
/// Outside pricing, `sigma = 0` is accepted as the degenerate
/// zero-volatility model.
pub fn validate_model(params: ModelParams, for_pricing: bool) -> Result<ModelParams> {
    let ModelParams {
        alpha,
        gamma,
        sigma,
        theta,
    } = params;
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 2.0 + PARAM_EPS {
        return Err(Error::domain("alpha", "0 < alpha <= 2", alpha));
    }
    if for_pricing && alpha <= 1.0 {
        return Err(Error::domain("alpha", "1 < alpha <= 2 for pricing", alpha));
    }
    if !gamma.is_finite() || gamma <= 0.0 || gamma > alpha + PARAM_EPS {
        return Err(Error::domain("gamma", "0 < gamma <= alpha", gamma));
    }
    if !sigma.is_finite() || sigma < 0.0 || (for_pricing && sigma == 0.0) {
        return Err(Error::domain("sigma", "sigma > 0", sigma));
    }
    let diamond = alpha.min(2.0 - alpha).max(0.0);
    if !theta.is_finite() || theta.abs() > diamond + PARAM_EPS {
        return Err(Error::domain(
            "theta",
            format!("|theta| <= min(alpha, 2 - alpha) = {diamond}"),
            theta,
        ));
    }
    if for_pricing {
        if !params.is_max_asymmetry() {
            return Err(Error::PricingAsymmetry {
                theta,
                required: alpha - 2.0,
            });
        }
        let bound = params.gamma_lower_bound();
        if gamma <= bound {
            return Err(Error::SeriesDivergence { gamma, bound });
        }
    }
    Ok(params)
}

/// Contract-side state of a European call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketQuote {
    pub spot: f64,
    pub strike: f64,
    /// Continuously compounded rate per unit time.
    pub rate: f64,
    /// Continuous dividend yield per unit time.
    pub dividend: f64,
    /// Time to expiry in years.
    pub maturity: f64,
}

impl MarketQuote {
    pub fn new(spot: f64, strike: f64, rate: f64, dividend: f64, maturity: f64) -> Self {
        MarketQuote {
            spot,
            strike,
            rate,
            dividend,
            maturity,
        }
    }

    pub fn validate(self) -> Result<Self> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(Error::domain("spot", "spot > 0", self.spot));
        }
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::domain("strike", "strike > 0", self.strike));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(Error::domain("maturity", "maturity > 0", self.maturity));
        }
        if !self.rate.is_finite() {
            return Err(Error::domain("rate", "finite rate", self.rate));
        }
        if !self.dividend.is_finite() {
            return Err(Error::domain("dividend", "finite dividend", self.dividend));
        }
        Ok(self)
    }

    /// `ln(S/K) + (r - q) tau`.
    pub fn log_moneyness(&self) -> f64 {
        log_moneyness(self)
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }

    pub fn forward(&self) -> f64 {
        self.spot * ((self.rate - self.dividend) * self.maturity).exp()
    }
}

/// Carry-adjusted log-moneyness `ln(S/K) + (r - q) tau`, zero at the money
/// forward.
pub fn log_moneyness(quote: &MarketQuote) -> f64 {
    (quote.spot / quote.strike).ln() + (quote.rate - quote.dividend) * quote.maturity
}

/// How the double series is truncated while it is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Truncation {
    /// Growing squares `0 <= n <= N, 1 <= m <= N`; each shell adds row `n = N`
    /// and column `m = N`.
    #[default]
    Rectangular,
    /// Growing triangles `n + m - 1 <= N`; each shell is one anti-diagonal.
    Triangular,
}

/// Truncation bounds and tolerance for series summation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    /// Absolute convergence tolerance.
    pub tol: f64,
    /// Hard cap on both summation indices.
    pub max_index: usize,
    pub mode: Truncation,
}

impl SeriesControl {
    pub fn new(tol: f64, max_index: usize) -> Self {
        SeriesControl {
            tol,
            max_index,
            mode: Truncation::Rectangular,
        }
    }

    /// Defaults for the mu series: tolerance 1e-12, 200 terms.
    pub fn for_mu() -> Self {
        SeriesControl::new(1e-12, 200)
    }

    pub fn with_mode(mut self, mode: Truncation) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(self) -> Result<Self> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::domain("tol", "tol > 0", self.tol));
        }
        if self.max_index < 2 {
            return Err(Error::domain("max_index", "max_index >= 2", self.max_index as f64));
        }
        Ok(self)
    }
}

impl Default for SeriesControl {
    /// Price defaults: 1e-6 currency units, N = 64.
    fn default() -> Self {
        SeriesControl::new(1e-6, 64)
    }
}

/// A price together with its convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceResult {
    pub price: f64,
    /// Number of nonzero terms summed.
    pub terms_used: usize,
    /// Absolute value of the last shell contribution.
    pub last_increment: f64,
    pub converged: bool,
    /// Index of the last shell summed. The truncation one shell smaller was
    /// already within `tol` of `price`.
    pub shells: usize,
}
