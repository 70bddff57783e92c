//! European call prices under space-time fractional diffusion: the double
//! residue series, the risk-neutral factor, the Green function, and
//! independent quadrature routes to check them against.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Lanczos coefficients are kept as published.
#![allow(clippy::excessive_precision)]
#![allow(clippy::should_implement_trait)]

pub mod error;
pub mod green;
pub mod oracle;
pub mod pricer;
pub mod quad;
pub mod risk_neutral;
pub mod special_fn;
pub mod types;
