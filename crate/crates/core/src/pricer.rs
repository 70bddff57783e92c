//! European call price as the double residue series
//!
//! ```text
//! C = K e^{-r tau} / a * sum_{n >= 0, m >= 1} (-1)^n / (n! G(1 - g (n - m) / a))
//!     * B^n * s^{(m - n) / a},      B = -[log] - mu tau,  s = -mu tau^g
//! ```
//!
//! together with its special-parameter forms and the at-the-money-forward
//! leading order.
//!
//! Terms are built in signed-log space and summed shell by shell with
//! compensated addition. A rectangular shell `N` is row `n = N` (for
//! `m = 1..=N`) followed by column `m = N` (for `n = 0..N`); a triangular
//! shell holds the terms with `n + m - 1 = N - 1`. Summation stops at the
//! first shell `N >= 2` whose sum and largest term are both below `tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk_neutral::{mu_stable, risk_neutral_factor};
use crate::special_fn::{gamma, ln_factorial, log_gamma_signed, CompensatedSum, SignedLog};
use crate::types::{validate_model, MarketQuote, ModelParams, PriceResult, SeriesControl, Truncation, PARAM_EPS};

/// Closeness to a non-positive integer at which `1/G` is taken as exactly 0.
const POLE_SNAP_ULPS: f64 = 8.0;
/// Relative rounding error assumed per term (log-space evaluation).
const TERM_REL_ERROR: f64 = 64.0 * f64::EPSILON;

/// The summands `(n, m)` for `n = 0..=n_max`, `m = 1..=m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermGrid {
    pub n_max: usize,
    pub m_max: usize,
    /// Row-major by `n`, then `m - 1`.
    pub values: Vec<f64>,
}

impl TermGrid {
    pub fn get(&self, n: usize, m: usize) -> Option<f64> {
        if n > self.n_max || m == 0 || m > self.m_max {
            return None;
        }
        Some(self.values[n * self.m_max + (m - 1)])
    }

    /// Cumulative price after columns `1..=m`, all rows included; the
    /// "Call" row of the term table.
    pub fn cumulative_by_column(&self) -> Vec<f64> {
        let mut acc = CompensatedSum::new();
        (1..=self.m_max)
            .map(|m| {
                for n in 0..=self.n_max {
                    acc.add(self.values[n * self.m_max + (m - 1)]);
                }
                acc.value()
            })
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().copied().collect::<CompensatedSum>().value()
    }
}

/// Parameter pinnings with their own closed series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    /// `gamma = 1`: finite-moment log-stable model.
    Fmls,
    /// `alpha = 2, gamma = 1`: Black-Scholes.
    BlackScholesSeries,
    /// `alpha = gamma`: only `m >= n` survives, with `1/(n! (m-n)!)`.
    Neural,
    /// `alpha = 2`: time-fractional Black-Scholes.
    TimeFractional,
}

/// True if `x` is within a few ulps of 0, -1, -2, ...
fn near_pole(x: f64) -> bool {
    let k = x.round();
    k <= 0.0 && (x - k).abs() <= POLE_SNAP_ULPS * f64::EPSILON * x.abs().max(1.0)
}

/// Inputs shared by every term of the general series.
struct Series {
    ln_prefactor: f64,
    base: SignedLog,
    ln_s: f64,
    ratio: f64,
    inv_alpha: f64,
    ln_fact: Vec<f64>,
}

impl Series {
    fn new(p: &ModelParams, q: &MarketQuote, mu: f64, max_n: usize) -> Self {
        let tau = q.maturity;
        Series {
            ln_prefactor: (q.strike * q.discount() / p.alpha).ln(),
            base: SignedLog::from_value(-q.log_moneyness() - mu * tau),
            ln_s: (-mu * tau.powf(p.gamma)).ln(),
            ratio: p.gamma / p.alpha,
            inv_alpha: 1.0 / p.alpha,
            ln_fact: (0..=max_n).map(ln_factorial).collect(),
        }
    }

    fn term(&self, n: usize, m: usize) -> f64 {
        let k = n as f64 - m as f64;
        let x = 1.0 - self.ratio * k;
        if near_pole(x) {
            return 0.0;
        }
        let power = self.base.powi(n as u32);
        if power.is_zero() {
            return 0.0;
        }
        let Ok(lg) = log_gamma_signed(x) else {
            return 0.0;
        };
        let sign = if n.is_multiple_of(2) { 1 } else { -1 } * power.sign * lg.sign;
        let ln_abs = self.ln_prefactor - self.ln_fact[n] + power.log_abs - k * self.inv_alpha * self.ln_s - lg.log_abs;
        f64::from(sign) * ln_abs.exp()
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu < 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("mu", "mu < 0", mu))
    }
}

fn shell_cells(index: usize, mode: Truncation) -> Vec<(usize, usize)> {
    match mode {
        Truncation::Rectangular => {
            let mut cells: Vec<(usize, usize)> = (1..=index).map(|m| (index, m)).collect();
            cells.extend((0..index).map(|n| (n, index)));
            if index == 1 {
                cells.sort_unstable();
            }
            cells
        }
        Truncation::Triangular => (0..index).map(|n| (n, index - n)).collect(),
    }
}

/// Sums `term` shell by shell. Rectangular shell 1 is `{(0,1), (1,1)}`.
///
/// Fails with `PrecisionLoss` when the summed magnitudes are so large that
/// term rounding alone could exceed `tol`.
fn sum_shells<F: Fn(usize, usize) -> f64>(control: &SeriesControl, term: F) -> Result<PriceResult> {
    let mut acc = CompensatedSum::new();
    let mut magnitude = 0.0f64;
    let mut terms_used = 0usize;
    let mut last = f64::INFINITY;
    for index in 1..=control.max_index {
        let mut shell = CompensatedSum::new();
        let mut largest = 0.0f64;
        for (n, m) in shell_cells(index, control.mode) {
            let t = term(n, m);
            if !t.is_finite() {
                return Err(Error::NoConvergence {
                    what: "call price series (non-finite term)",
                    iterations: index,
                    last_increment: t,
                });
            }
            if t != 0.0 {
                terms_used += 1;
            }
            largest = largest.max(t.abs());
            magnitude += t.abs();
            shell.add(t);
            acc.add(t);
        }
        last = shell.value().abs();
        if index >= 2 && last < control.tol && largest < control.tol {
            let price = acc.value();
            if magnitude * TERM_REL_ERROR > control.tol {
                // Cancellation has eaten the requested accuracy.
                return Err(Error::PrecisionLoss {
                    what: "call price series",
                    largest_term: magnitude,
                });
            }
            if price < -control.tol {
                return Err(Error::NegativePrice { price });
            }
            return Ok(PriceResult {
                price,
                terms_used,
                last_increment: last,
                converged: true,
                shells: index,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "call price series",
        iterations: control.max_index,
        last_increment: last,
    })
}

/// Call price by the double residue series.
///
/// `mu` is the risk-neutral factor (negative); passing it in lets one value
/// serve a whole strike sweep.
pub fn call_price_series(
    params: &ModelParams,
    quote: &MarketQuote,
    mu: f64,
    control: &SeriesControl,
) -> Result<PriceResult> {
    let p = validate_model(*params, true)?;
    let q = quote.validate()?;
    let control = control.validate()?;
    check_mu(mu)?;
    let series = Series::new(&p, &q, mu, control.max_index);
    sum_shells(&control, |n, m| series.term(n, m))
}

/// The individual summands on `0..=n_max x 1..=m_max`.
pub fn term_grid(params: &ModelParams, quote: &MarketQuote, mu: f64, n_max: usize, m_max: usize) -> Result<TermGrid> {
    let p = validate_model(*params, true)?;
    let q = quote.validate()?;
    check_mu(mu)?;
    if m_max == 0 {
        return Err(Error::domain("m_max", "m_max >= 1", 0.0));
    }
    let series = Series::new(&p, &q, mu, n_max);
    let mut values = Vec::with_capacity((n_max + 1) * m_max);
    for n in 0..=n_max {
        for m in 1..=m_max {
            values.push(series.term(n, m));
        }
    }
    Ok(TermGrid { n_max, m_max, values })
}

fn pinned(value: f64, target: f64) -> bool {
    (value - target).abs() <= PARAM_EPS
}

fn pinning_error(case: SpecialCase, p: &ModelParams) -> Error {
    let (field, constraint, value) = match case {
        SpecialCase::Fmls => ("gamma", "gamma = 1 for the FMLS series", p.gamma),
        SpecialCase::BlackScholesSeries if !pinned(p.alpha, 2.0) => {
            ("alpha", "alpha = 2 for the Black-Scholes series", p.alpha)
        }
        SpecialCase::BlackScholesSeries => ("gamma", "gamma = 1 for the Black-Scholes series", p.gamma),
        SpecialCase::Neural => ("gamma", "gamma = alpha for the neural series", p.gamma),
        SpecialCase::TimeFractional => ("alpha", "alpha = 2 for the time-fractional series", p.alpha),
    };
    Error::domain(field, constraint, value)
}

/// Call price through the series of a pinned special case.
///
/// Without an explicit `mu` the closed form `mu_1` is used where
/// `gamma = 1` and the residue series otherwise.
pub fn call_price_special(
    case: SpecialCase,
    params: &ModelParams,
    quote: &MarketQuote,
    mu: Option<f64>,
    control: &SeriesControl,
) -> Result<PriceResult> {
    let p = validate_model(*params, true)?;
    let q = quote.validate()?;
    let control = control.validate()?;
    let ok = match case {
        SpecialCase::Fmls => pinned(p.gamma, 1.0),
        SpecialCase::BlackScholesSeries => pinned(p.alpha, 2.0) && pinned(p.gamma, 1.0),
        SpecialCase::Neural => pinned(p.gamma, p.alpha),
        SpecialCase::TimeFractional => pinned(p.alpha, 2.0),
    };
    if !ok {
        return Err(pinning_error(case, &p));
    }
    let mu = match (mu, case) {
        (Some(mu), _) => mu,
        (None, SpecialCase::Fmls) => mu_stable(p.alpha, p.sigma),
        (None, SpecialCase::BlackScholesSeries) => -0.5 * p.sigma * p.sigma,
        (None, _) => risk_neutral_factor(&p)?.mu,
    };
    check_mu(mu)?;
    let tau = q.maturity;
    let base = SignedLog::from_value(-q.log_moneyness() - mu * tau);
    let cap = control.max_index;
    let ln_fact: Vec<f64> = (0..=cap).map(ln_factorial).collect();
    let sign_n =
        |n: usize, s: SignedLog, extra: i8| -> i8 { (if n.is_multiple_of(2) { 1 } else { -1 }) * s.sign * extra };
    match case {
        SpecialCase::Fmls | SpecialCase::BlackScholesSeries | SpecialCase::TimeFractional => {
            // All three have the general shape with a simplified ratio;
            // spelled out so each reads as its own series.
            let (a, ratio, ln_s) = match case {
                SpecialCase::Fmls => (p.alpha, 1.0 / p.alpha, (-mu * tau).ln()),
                SpecialCase::BlackScholesSeries => (2.0, 0.5, (-mu * tau).ln()),
                _ => (2.0, 0.5 * p.gamma, (-mu * tau.powf(p.gamma)).ln()),
            };
            let ln_pref = (q.strike * q.discount() / a).ln();
            sum_shells(&control, |n, m| {
                let k = n as f64 - m as f64;
                let x = 1.0 - ratio * k;
                let power = base.powi(n as u32);
                if near_pole(x) || power.is_zero() {
                    return 0.0;
                }
                let Ok(lg) = log_gamma_signed(x) else {
                    return 0.0;
                };
                let ln_abs = ln_pref - ln_fact[n] + power.log_abs - k / a * ln_s - lg.log_abs;
                f64::from(sign_n(n, power, lg.sign)) * ln_abs.exp()
            })
        }
        SpecialCase::Neural => {
            let a = p.alpha;
            let ln_pref = (q.strike * q.discount() / a).ln();
            let ln_w = (-mu).ln() / a + tau.ln();
            sum_shells(&control, |n, m| {
                if m < n {
                    return 0.0;
                }
                let power = base.powi(n as u32);
                if power.is_zero() {
                    return 0.0;
                }
                let j = m - n;
                let ln_abs = ln_pref - ln_fact[n] - ln_factorial(j) + power.log_abs + j as f64 * ln_w;
                f64::from(sign_n(n, power, 1)) * ln_abs.exp()
            })
        }
    }
}

/// Leading order of the `alpha = 2` series at the money forward:
/// `(S e^{-q tau} / 2) sigma / G(1 + gamma/2) sqrt(tau^gamma / G(1 + 2 gamma))`.
///
/// With no dividend the prefactor is `S/2`.
pub fn atmf_leading_order(params: &ModelParams, quote: &MarketQuote) -> Result<f64> {
    let p = validate_model(*params, false)?;
    let q = quote.validate()?;
    if !pinned(p.alpha, 2.0) {
        return Err(Error::domain("alpha", "alpha = 2 for the ATMF expansion", p.alpha));
    }
    let lm = q.log_moneyness();
    if lm.abs() > 1e-12 {
        return Err(Error::domain(
            "log_moneyness",
            "at the money forward, |[log]| <= 1e-12",
            lm,
        ));
    }
    let g = p.gamma;
    let half_spot = 0.5 * q.spot * (-q.dividend * q.maturity).exp();
    Ok(half_spot * p.sigma / gamma(1.0 + 0.5 * g)? * (q.maturity.powf(g) / gamma(1.0 + 2.0 * g)?).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk_neutral::mu_series;

    const TABLE_MU: f64 = -0.046_134_733_076_535_3;

    fn table() -> (ModelParams, MarketQuote) {
        (
            ModelParams::max_asymmetry(1.7, 0.9, 0.2),
            MarketQuote::new(3800.0, 4000.0, 0.01, 0.0, 1.0),
        )
    }

    #[test]
    fn table_price() {
        let (p, q) = table();
        let r = call_price_series(&p, &q, TABLE_MU, &SeriesControl::default()).unwrap();
        assert!((r.price - 290.128_688_083_695).abs() < 1e-6, "{}", r.price);
        assert!(r.converged && r.last_increment < 1e-6);
    }

    #[test]
    fn table_terms() {
        let (p, q) = table();
        let grid = term_grid(&p, &q, TABLE_MU, 7, 7).unwrap();
        assert!((grid.get(0, 1).unwrap() - 429.751).abs() < 1e-3);
        assert!((grid.get(1, 1).unwrap() + 203.666).abs() < 1e-3);
        assert!((grid.get(2, 1).unwrap() - 28.893).abs() < 1e-3);
        assert_eq!(grid.get(8, 1), None);
        assert_eq!(grid.get(0, 0), None);
    }

    #[test]
    fn pole_terms_are_exact_zeros() {
        // gamma/alpha = 1/2: 1 - (n - m)/2 is a pole whenever n - m is even and >= 2.
        let p = ModelParams::max_asymmetry(1.6, 0.8, 0.2);
        let q = MarketQuote::new(100.0, 110.0, 0.01, 0.0, 0.5);
        let grid = term_grid(&p, &q, -0.03, 12, 6).unwrap();
        for n in 0..=12 {
            for m in 1..=6 {
                let v = grid.get(n, m).unwrap();
                if n >= m + 2 && (n - m) % 2 == 0 {
                    assert_eq!(v, 0.0, "({n},{m})");
                } else {
                    assert_ne!(v, 0.0, "({n},{m})");
                }
            }
        }
    }

    #[test]
    fn zero_base_keeps_only_first_row() {
        let p = ModelParams::max_asymmetry(2.0, 1.0, 0.2);
        // B = -[log] - mu tau = 0 when [log] = sigma^2 tau / 2.
        let q = MarketQuote::new(100.0, 100.0, 0.02, 0.0, 1.0);
        let grid = term_grid(&p, &q, -0.02, 4, 4).unwrap();
        for n in 1..=4 {
            for m in 1..=4 {
                assert_eq!(grid.get(n, m).unwrap(), 0.0);
            }
        }
        assert!(grid.get(0, 1).unwrap() > 0.0);
    }

    #[test]
    fn zero_volatility_limit_is_intrinsic() {
        // Out of the money forward: the price falls to 0 as sigma shrinks.
        let (_, q) = table();
        let mut prev = f64::INFINITY;
        for sigma in [0.05, 0.03, 0.02, 0.01] {
            let p = ModelParams::max_asymmetry(1.7, 0.9, sigma);
            let mu = mu_series(&p, &SeriesControl::for_mu()).unwrap().mu;
            let r = call_price_series(&p, &q, mu, &SeriesControl::new(1e-6, 400)).unwrap();
            assert!(r.price >= 0.0 && r.price < prev, "sigma {sigma}: {}", r.price);
            prev = r.price;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn cancellation_is_reported_not_returned() {
        let (_, q) = table();
        let p = ModelParams::max_asymmetry(1.7, 0.9, 0.005);
        let mu = mu_series(&p, &SeriesControl::for_mu()).unwrap().mu;
        assert!(matches!(
            call_price_series(&p, &q, mu, &SeriesControl::new(1e-6, 400)),
            Err(Error::PrecisionLoss { .. })
        ));
    }

    #[test]
    fn special_cases_match_general_series() {
        let (_, q) = table();
        let control = SeriesControl::new(1e-10, 120);
        let fmls = ModelParams::max_asymmetry(1.7, 1.0, 0.2);
        let a = call_price_special(SpecialCase::Fmls, &fmls, &q, None, &control).unwrap();
        let b = call_price_series(&fmls, &q, mu_stable(1.7, 0.2), &control).unwrap();
        assert!((a.price - b.price).abs() < 1e-9);

        let neural = ModelParams::max_asymmetry(1.5, 1.5, 0.2);
        let mu = risk_neutral_factor(&neural).unwrap().mu;
        let a = call_price_special(SpecialCase::Neural, &neural, &q, Some(mu), &control).unwrap();
        let b = call_price_series(&neural, &q, mu, &control).unwrap();
        assert!((a.price - b.price).abs() < 1e-9);
        // Closed form of the neural series: (K e^{-r tau}/a)(e^{w - B} - 1).
        let w = (-mu).powf(1.0 / 1.5);
        let big_b = -q.log_moneyness() - mu;
        let closed = q.strike * q.discount() / 1.5 * ((w - big_b).exp() - 1.0);
        assert!((a.price - closed).abs() < 1e-8);

        let tf = ModelParams::max_asymmetry(2.0, 0.8, 0.2);
        let mu = risk_neutral_factor(&tf).unwrap().mu;
        let a = call_price_special(SpecialCase::TimeFractional, &tf, &q, Some(mu), &control).unwrap();
        let b = call_price_series(&tf, &q, mu, &control).unwrap();
        assert!((a.price - b.price).abs() < 1e-9);
    }

    #[test]
    fn black_scholes_series_value() {
        let p = ModelParams::max_asymmetry(2.0, 1.0, 0.2);
        let q = MarketQuote::new(100.0, 100.0, 0.0, 0.0, 1.0);
        let r = call_price_special(SpecialCase::BlackScholesSeries, &p, &q, None, &SeriesControl::default()).unwrap();
        assert!((r.price - 7.965_567_455_405_804).abs() < 1e-5);
    }

    #[test]
    fn special_case_pinning_is_enforced() {
        let (p, q) = table();
        let c = SeriesControl::default();
        for case in [
            SpecialCase::Fmls,
            SpecialCase::BlackScholesSeries,
            SpecialCase::Neural,
            SpecialCase::TimeFractional,
        ] {
            assert!(call_price_special(case, &p, &q, Some(TABLE_MU), &c)
                .unwrap_err()
                .is_domain());
        }
    }

    #[test]
    fn atmf_examples() {
        let p = ModelParams::max_asymmetry(2.0, 1.0, 0.2);
        let q = MarketQuote::new(100.0, 100.0, 0.0, 0.0, 1.0);
        let v = atmf_leading_order(&p, &q).unwrap();
        assert!((v - 100.0 * 0.2 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((v - 7.978_845_608_028_654).abs() < 1e-12);
        let flat = ModelParams::new(2.0, 1.0, 0.0, 0.0);
        assert_eq!(atmf_leading_order(&flat, &q).unwrap(), 0.0);
        let off = MarketQuote::new(101.0, 100.0, 0.0, 0.0, 1.0);
        assert!(atmf_leading_order(&p, &off).unwrap_err().is_domain());
    }

    #[test]
    fn io_errors_and_limits() {
        let (p, q) = table();
        assert!(call_price_series(&p, &q, 0.01, &SeriesControl::default()).is_err());
        assert!(matches!(
            call_price_series(&p, &q, TABLE_MU, &SeriesControl::new(1e-12, 3)),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn triangular_truncation_agrees() {
        let (p, q) = table();
        let rect = call_price_series(&p, &q, TABLE_MU, &SeriesControl::new(1e-9, 64)).unwrap();
        let tri = call_price_series(
            &p,
            &q,
            TABLE_MU,
            &SeriesControl::new(1e-9, 64).with_mode(Truncation::Triangular),
        )
        .unwrap();
        assert!((rect.price - tri.price).abs() < 1e-7);
    }
}
