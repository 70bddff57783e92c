use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} out of domain: requires {constraint} (got {value})")]
    OutOfDomain {
        field: &'static str,
        constraint: String,
        value: f64,
    },

    /// gamma <= 1 - 1/alpha: the mu series and the price series diverge.
    #[error("series diverges: requires gamma > 1 - 1/alpha = {bound:.6} (got gamma = {gamma})")]
    SeriesDivergence { gamma: f64, bound: f64 },

    /// Pricing is only defined under maximal negative asymmetry.
    #[error("pricing undefined: requires theta = alpha - 2 = {required} (got theta = {theta})")]
    PricingAsymmetry { theta: f64, required: f64 },

    #[error("pole of the Gamma function at x = {x}")]
    Pole { x: f64 },

    #[error("{what} did not converge after {iterations} steps (last increment {last_increment:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last_increment: f64,
    },

    #[error("{what}: cancellation exceeds the accuracy budget (largest term {largest_term:e})")]
    PrecisionLoss { what: &'static str, largest_term: f64 },

    #[error("truncated mu series sum is not positive ({sum:e}); sigma outside the validated range")]
    NonPositiveSum { sum: f64 },

    #[error("{what}: residual imaginary part {imag:e} exceeds {threshold:e}")]
    Contour {
        what: &'static str,
        imag: f64,
        threshold: f64,
    },

    #[error("series converged to a negative price {price}")]
    NegativePrice { price: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(field: &'static str, constraint: impl Into<String>, value: f64) -> Self {
        Error::OutOfDomain {
            field,
            constraint: constraint.into(),
            value,
        }
    }

    /// True for errors caused by inputs outside the model's domain, as
    /// opposed to numerical failures.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::OutOfDomain { .. }
                | Error::SeriesDivergence { .. }
                | Error::PricingAsymmetry { .. }
                | Error::Pole { .. }
                | Error::NonPositiveSum { .. }
                | Error::NegativePrice { .. }
        )
    }
}
