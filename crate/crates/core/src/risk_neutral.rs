//! Risk-neutral factor `mu = -ln int e^y g(y, 1) dy` at maximal negative
//! asymmetry.
//!
//! The space-fractional value `mu_1 = (sigma/sqrt 2)^alpha sec(pi alpha/2)`
//! is closed form. For `gamma != 1` there are three routes: the residue
//! series, a Mellin-Barnes integral and subordination through the Wright
//! M-function.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::ContourSpec;
use crate::quad::{self, PANEL_ORDER};
use crate::special_fn::{ln_factorial, ln_gamma_c, log_gamma_signed, wright_m, CompensatedSum};
use crate::types::{validate_model, ModelParams, SeriesControl, PARAM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuRoute {
    ClosedForm,
    Series,
    MellinBarnes,
    Subordination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuResult {
    pub mu: f64,
    pub route: MuRoute,
    /// Series terms summed, or quadrature nodes used.
    pub terms_or_nodes: usize,
}

/// `mu_1 = (sigma/sqrt 2)^alpha sec(pi alpha / 2)`, negative on `1 < alpha <= 2`.
pub fn mu_stable(alpha: f64, sigma: f64) -> f64 {
    (sigma / 2f64.sqrt()).powf(alpha) / (0.5 * PI * alpha).cos()
}

fn check_mu_params(params: &ModelParams) -> Result<ModelParams> {
    let p = validate_model(*params, false)?;
    if p.alpha <= 1.0 {
        return Err(Error::domain("alpha", "1 < alpha <= 2", p.alpha));
    }
    let bound = p.gamma_lower_bound();
    if p.gamma <= bound {
        return Err(Error::SeriesDivergence { gamma: p.gamma, bound });
    }
    Ok(p)
}

fn finish(inner: f64, route: MuRoute, count: usize) -> Result<MuResult> {
    if !(inner > 0.0) {
        return Err(Error::NonPositiveSum { sum: inner });
    }
    Ok(MuResult {
        mu: -inner.ln(),
        route,
        terms_or_nodes: count,
    })
}

/// `mu = -ln sum_n (-1)^n G(1 + a n) / (n! G(1 + g a n)) mu_1^n`.
///
/// Stops at the first term below `control.tol`. Since `mu_1 < 0` every
/// term is positive.
pub fn mu_series(params: &ModelParams, control: &SeriesControl) -> Result<MuResult> {
    let p = check_mu_params(params)?;
    let control = control.validate()?;
    let m1 = mu_stable(p.alpha, p.sigma);
    if m1 == 0.0 {
        return Ok(MuResult {
            mu: 0.0,
            route: MuRoute::Series,
            terms_or_nodes: 1,
        });
    }
    let ln_m1 = m1.abs().ln();
    // (-1)^n mu_1^n carries the sign of (-mu_1)^n.
    let sign: f64 = if m1 < 0.0 { 1.0 } else { -1.0 };
    let mut acc = CompensatedSum::new();
    let mut last = f64::INFINITY;
    for n in 0..=control.max_index {
        let nf = n as f64;
        let ln_term = log_gamma_signed(1.0 + p.alpha * nf)?.log_abs
            - ln_factorial(n)
            - log_gamma_signed(1.0 + p.gamma * p.alpha * nf)?.log_abs
            + nf * ln_m1;
        let term = sign.powi(n as i32) * ln_term.exp();
        acc.add(term);
        last = term.abs();
        if n >= 1 && last < control.tol {
            return finish(acc.value(), MuRoute::Series, n + 1);
        }
    }
    Err(Error::NoConvergence {
        what: "risk-neutral series",
        iterations: control.max_index,
        last_increment: last,
    })
}

const MU_RAY_ANGLE: f64 = 0.25 * PI;
const MU_TAIL_DROP: f64 = 40.0;
const MU_MAX_RAY: f64 = 5_000.0;
const MU_REFINE_TOL: f64 = 1e-13;
const MU_IMAG_TOL: f64 = 1e-8;

/// `mu = -ln[(1/a) (1/2 pi i) int G(s) G((1-s)/a) / G(g s + 1 - g) mu_1^{(s-1)/a} ds]`.
///
/// With `mu_1 < 0` the power `mu_1^{(s-1)/a}` (principal branch,
/// `arg mu_1 = pi`) grows like `exp(pi |Im s| / a)` on a vertical line and
/// the integral diverges there. The line through `c` is therefore bent
/// into two rays at `+-45` degrees into the right half-plane, which keeps
/// the poles of `G((1-s)/a)` on the right and makes the integrand decay
/// along both rays. `contour.abscissa` is the ray vertex, `half_length`
/// the ray length and `nodes` the node count per ray.
pub fn mu_mellin_barnes(params: &ModelParams, contour: &ContourSpec) -> Result<MuResult> {
    let p = check_mu_params(params)?;
    contour.validate()?;
    let m1 = mu_stable(p.alpha, p.sigma);
    if m1 == 0.0 {
        return Ok(MuResult {
            mu: 0.0,
            route: MuRoute::MellinBarnes,
            terms_or_nodes: 0,
        });
    }
    let (a, g) = (p.alpha, p.gamma);
    let ln_m1 = Complex64::new(m1.abs().ln(), if m1 < 0.0 { PI } else { 0.0 });
    let ln_f =
        |s: Complex64| ln_gamma_c(s) + ln_gamma_c((1.0 - s) / a) - ln_gamma_c(g * s + 1.0 - g) + (s - 1.0) / a * ln_m1;
    let c = contour.abscissa.unwrap_or(0.5);
    let vertex = Complex64::new(c, 0.0);
    let dir = Complex64::from_polar(1.0, MU_RAY_ANGLE);
    let length = match contour.half_length {
        Some(l) => l,
        None => {
            let up = quad::march_length(|r| ln_f(vertex + dir * r).re, MU_TAIL_DROP, MU_MAX_RAY);
            let down = quad::march_length(|r| ln_f(vertex + dir.conj() * r).re, MU_TAIL_DROP, MU_MAX_RAY);
            match (up, down) {
                (Some(u), Some(d)) => u.max(d),
                _ => {
                    return Err(Error::Contour {
                        what: "risk-neutral contour does not reach the decay threshold",
                        imag: f64::NAN,
                        threshold: MU_MAX_RAY,
                    })
                }
            }
        }
    };
    let eval = |panels: usize| Ok(quad::wedge(vertex, dir, length, panels).integrate_log(ln_f) / a);
    let (value, panels) = match contour.nodes {
        Some(n) => {
            let panels = n.div_ceil(PANEL_ORDER);
            (eval(panels)?, panels)
        }
        None => {
            // Nearest singularities: s = 0 at the vertex and s = 1 seen from a ray.
            let gap = c.min((1.0 - c) * MU_RAY_ANGLE.sin());
            let width = 0.5f64.min(2.0 * gap);
            let start = ((length / width).ceil() as usize).max(4);
            quad::refine_panels(start, MU_REFINE_TOL, 5, eval)?
        }
    };
    if !(value.im.abs() <= MU_IMAG_TOL) {
        return Err(Error::Contour {
            what: "risk-neutral integral has an imaginary residue",
            imag: value.im,
            threshold: MU_IMAG_TOL,
        });
    }
    finish(value.re, MuRoute::MellinBarnes, 2 * panels * PANEL_ORDER)
}

/// Default node count for [`mu_subordination`].
pub const SUBORDINATION_NODES: usize = 1024;

/// `mu = -ln int_0^inf M_g(l) exp(-mu_1 l^a) dl`, the space-fractional factor
/// smeared over the Wright M-density of operational time.
///
/// Requires `gamma < 1`, where `M_g` is a probability density. The
/// integrand grows like `exp(|mu_1| l^a)` but the kernel decays like
/// `exp(-c l^{1/(1-g)})`, which wins for `g > 1 - 1/a`. The upper limit is
/// marched out until the integrand is negligible, and Gauss-Legendre with
/// `quad_nodes` nodes is applied in `l = L v^2`, which smooths `l^a` at 0.
pub fn mu_subordination(params: &ModelParams, quad_nodes: usize) -> Result<MuResult> {
    let p = check_mu_params(params)?;
    if p.gamma >= 1.0 - PARAM_EPS {
        return Err(Error::domain("gamma", "gamma < 1 for subordination", p.gamma));
    }
    if quad_nodes < 64 {
        return Err(Error::domain("quad_nodes", "quad_nodes >= 64", quad_nodes as f64));
    }
    let m1 = mu_stable(p.alpha, p.sigma);
    let integrand = |l: f64| -> Result<f64> { Ok(wright_m(p.gamma, l)? * (-m1 * l.powf(p.alpha)).exp()) };
    // March in unit steps until the integrand is below 1e-18 of its peak.
    let mut peak = integrand(0.0)?;
    let mut upper = 0.0;
    let mut below = 0;
    while below < 2 {
        upper += 1.0;
        if upper > 1e4 {
            return Err(Error::NoConvergence {
                what: "subordination tail",
                iterations: upper as usize,
                last_increment: peak,
            });
        }
        let v = integrand(upper)?;
        peak = peak.max(v);
        if v < 1e-18 * peak {
            below += 1;
        } else {
            below = 0;
        }
    }
    let panels = quad_nodes.div_ceil(PANEL_ORDER);
    let mut acc = CompensatedSum::new();
    for (v, w) in quad::composite_nodes(0.0, 1.0, panels) {
        let l = upper * v * v;
        acc.add(w * 2.0 * upper * v * integrand(l)?);
    }
    finish(acc.value(), MuRoute::Subordination, panels * PANEL_ORDER)
}

/// The factor used for pricing: closed form at `gamma = 1`, the residue
/// series otherwise.
pub fn risk_neutral_factor(params: &ModelParams) -> Result<MuResult> {
    let p = check_mu_params(params)?;
    if (p.gamma - 1.0).abs() <= PARAM_EPS {
        return Ok(MuResult {
            mu: mu_stable(p.alpha, p.sigma),
            route: MuRoute::ClosedForm,
            terms_or_nodes: 0,
        });
    }
    mu_series(&p, &SeriesControl::for_mu())
}

/// Memo of `mu` keyed by the exact bits of `(alpha, gamma, sigma)`.
///
/// Readers share the lock; a miss computes outside it and then inserts.
#[derive(Debug, Default)]
pub struct MuCache {
    entries: RwLock<HashMap<(u64, u64, u64), f64>>,
}

impl MuCache {
    pub fn new() -> Self {
        MuCache::default()
    }

    fn key(params: &ModelParams) -> (u64, u64, u64) {
        (params.alpha.to_bits(), params.gamma.to_bits(), params.sigma.to_bits())
    }

    /// Cached value, or `compute(params)` stored on success.
    pub fn get_or_insert_with<F>(&self, params: &ModelParams, compute: F) -> Result<f64>
    where
        F: FnOnce(&ModelParams) -> Result<f64>,
    {
        let key = Self::key(params);
        if let Some(mu) = self.entries.read().expect("mu cache poisoned").get(&key) {
            return Ok(*mu);
        }
        let mu = compute(params)?;
        self.entries.write().expect("mu cache poisoned").insert(key, mu);
        Ok(mu)
    }

    /// [`risk_neutral_factor`] through the cache.
    pub fn mu(&self, params: &ModelParams) -> Result<f64> {
        self.get_or_insert_with(params, |p| risk_neutral_factor(p).map(|r| r.mu))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("mu cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, gamma: f64, sigma: f64) -> ModelParams {
        ModelParams::max_asymmetry(alpha, gamma, sigma)
    }

    #[test]
    fn mu_stable_examples() {
        assert!((mu_stable(2.0, 0.2) + 0.02).abs() < 1e-15);
        assert!((mu_stable(1.7, 0.2) + 0.040_364_038_546_938_74).abs() < 1e-15);
        assert!(mu_stable(2.0, 1e-9).abs() < 1e-17);
    }

    #[test]
    fn series_is_exact_at_gamma_one() {
        for alpha in [1.3, 1.5, 1.7, 2.0] {
            for sigma in [0.05, 0.2, 0.4] {
                let r = mu_series(&params(alpha, 1.0, sigma), &SeriesControl::for_mu()).unwrap();
                assert!((r.mu - mu_stable(alpha, sigma)).abs() < 1e-12);
                assert_eq!(r.route, MuRoute::Series);
            }
        }
    }

    #[test]
    fn table_value() {
        let r = mu_series(&params(1.7, 0.9, 0.2), &SeriesControl::for_mu()).unwrap();
        assert!((r.mu + 0.046_134_733_076_535_3).abs() < 1e-13, "{}", r.mu);
    }

    #[test]
    fn first_order_in_small_sigma() {
        let p = params(1.7, 0.9, 0.01);
        let r = mu_series(&p, &SeriesControl::for_mu()).unwrap();
        let lead = crate::special_fn::gamma(2.7).unwrap() / crate::special_fn::gamma(1.0 + 0.9 * 1.7).unwrap()
            * mu_stable(1.7, 0.01);
        assert!((r.mu / lead - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mellin_barnes_matches_series() {
        let p = params(1.7, 0.9, 0.2);
        let s = mu_series(&p, &SeriesControl::for_mu()).unwrap().mu;
        let m = mu_mellin_barnes(&p, &ContourSpec::auto()).unwrap();
        assert!((s - m.mu).abs() < 1e-12, "{s} vs {}", m.mu);
        let g = mu_mellin_barnes(&params(2.0, 1.0, 0.2), &ContourSpec::auto())
            .unwrap()
            .mu;
        assert!((g + 0.02).abs() < 1e-12);
    }

    #[test]
    fn mellin_barnes_is_abscissa_independent() {
        let p = params(1.7, 0.9, 0.2);
        let a = mu_mellin_barnes(&p, &ContourSpec::at(0.5)).unwrap().mu;
        let b = mu_mellin_barnes(&p, &ContourSpec::at(0.3)).unwrap().mu;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn subordination_matches_series() {
        let p = params(1.7, 0.9, 0.2);
        let s = mu_series(&p, &SeriesControl::for_mu()).unwrap().mu;
        let w = mu_subordination(&p, SUBORDINATION_NODES).unwrap();
        assert!((s - w.mu).abs() < 1e-8, "{s} vs {}", w.mu);
        let zero = mu_subordination(&params(1.7, 0.9, 0.0), SUBORDINATION_NODES).unwrap();
        assert!(zero.mu.abs() < 1e-10);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            mu_series(&params(1.7, 0.4, 0.2), &SeriesControl::for_mu()),
            Err(Error::SeriesDivergence { .. })
        ));
        assert!(mu_subordination(&params(1.7, 1.0, 0.2), 256).unwrap_err().is_domain());
        assert!(mu_series(&params(0.9, 0.5, 0.2), &SeriesControl::for_mu()).is_err());
        assert!(mu_mellin_barnes(&params(1.7, 0.9, 0.2), &ContourSpec::at(1.5)).is_err());
    }

    #[test]
    fn cache_returns_stored_value() {
        let cache = MuCache::new();
        let p = params(1.7, 0.9, 0.2);
        let a = cache.mu(&p).unwrap();
        let b = cache.get_or_insert_with(&p, |_| panic!("should hit")).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
        assert!(cache.mu(&params(1.7, 0.3, 0.2)).is_err());
        assert_eq!(cache.len(), 1);
    }
}
