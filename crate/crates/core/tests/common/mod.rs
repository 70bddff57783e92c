//! Shared fixtures: the published term table for the prototype quote.
#![allow(dead_code)]

use fspd_core::types::{MarketQuote, ModelParams};

/// S = 3800, K = 4000, r = 1%, q = 0, tau = 1.
pub fn table_quote() -> MarketQuote {
    MarketQuote::new(3800.0, 4000.0, 0.01, 0.0, 1.0)
}

/// alpha = 1.7, gamma = 0.9, sigma = 0.2, maximal negative asymmetry.
pub fn table_params() -> ModelParams {
    ModelParams::max_asymmetry(1.7, 0.9, 0.2)
}

/// Terms (n, m) for n = 0..=7 (rows) and m = 1..=7 (columns), as printed.
/// Cell (2, 5) is printed as "0.0.028" and read as 0.028.
pub const TABLE1_TERMS: [[f64; 7]; 8] = [
    [429.751, 60.850, 7.216, 0.749, 0.070, 0.006, 0.000],
    [-203.666, -37.572, -5.320, -0.6315, -0.065, -0.006, -0.000],
    [28.893, 8.903, 1.642, 0.233, 0.028, 0.003, 0.000],
    [0.549, -0.842, -0.259, -0.048, -0.007, -0.000, -0.000],
    [-0.352, -0.012, 0.018, 0.006, 0.001, 0.000, 0.000],
    [-0.016, 0.006, 0.000, -0.000, -0.000, -0.000, -0.000],
    [0.005, 0.000, -0.000, -0.000, 0.000, 0.000, 0.000],
    [0.000, -0.000, -0.000, 0.000, 0.000, -0.000, -0.000],
];

/// Cumulative price through columns 1..=m, as printed. The m = 4 entry
/// (290.090) disagrees with the printed terms, which sum to 290.100.
pub const TABLE1_CALL: [f64; 7] = [255.162, 286.495, 289.792, 290.090, 290.126, 290.128, 290.128];

/// Full-precision price at the table quote.
pub const TABLE1_PRICE: f64 = 290.128_688_083_695;
