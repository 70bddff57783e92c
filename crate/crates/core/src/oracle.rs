//! Independent price routes used to validate the series: Black-Scholes in
//! closed form, direct convolution of payoff and Green function, and the
//! two-dimensional Mellin-Barnes representation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{green_max_asym, ContourSpec};
use crate::quad::{self, ContourNodes, PANEL_ORDER};
use crate::special_fn::{ln_gamma_c, ln_sin_pi, ComplexSum};
use crate::types::{validate_model, MarketQuote, ModelParams};

/// Standard normal CDF through `erfc`, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Black-Scholes call `S e^{-q tau} N(d1) - K e^{-r tau} N(d2)`.
///
/// At `sigma = 0` this is the discounted intrinsic value of the forward.
pub fn bs_closed_form(quote: &MarketQuote, sigma: f64) -> f64 {
    let q = quote;
    let df = q.discount();
    let carry = (-q.dividend * q.maturity).exp();
    let vol = sigma * q.maturity.sqrt();
    if vol == 0.0 {
        return (q.spot * carry - q.strike * df).max(0.0);
    }
    let d1 = (q.log_moneyness() + 0.5 * vol * vol) / vol;
    let d2 = d1 - vol;
    q.spot * carry * norm_cdf(d1) - q.strike * df * norm_cdf(d2)
}

/// Settings for [`price_by_convolution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Absolute tolerance as a fraction of the strike.
    pub tol: f64,
    /// Largest log-return the upper limit may be pushed to.
    pub y_max: f64,
    /// Contour for each density evaluation.
    pub contour: ContourSpec,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            tol: 1e-10,
            y_max: 50.0,
            contour: ContourSpec::auto(),
        }
    }
}

/// Half-width around `y = 0`, where the density representation is singular,
/// bridged by linear interpolation.
const ORIGIN_GAP: f64 = 1e-9;

fn check_price_inputs(params: &ModelParams, quote: &MarketQuote, mu: f64) -> Result<(ModelParams, MarketQuote)> {
    let p = validate_model(*params, true)?;
    let q = quote.validate()?;
    if !(mu < 0.0 && mu.is_finite()) {
        return Err(Error::domain("mu", "mu < 0", mu));
    }
    Ok((p, q))
}

/// `e^{-r tau} int [S e^{tau (r - q + mu) + y} - K]^+ g(y, tau) dy`.
///
/// The payoff is positive above `y0 = -[log] - mu tau`, where it equals
/// `K expm1(y - y0)`. The integral runs from `y0` to the point where the
/// integrand has fallen below the tolerance, split at `y = 0`.
///
/// For `y0 < 0` and `gamma < 1` this does not reproduce the series: the
/// series continues the `y > 0` branch of the density analytically below
/// the origin, while here `y < 0` uses the reflected density.
pub fn price_by_convolution(params: &ModelParams, quote: &MarketQuote, mu: f64, spec: &QuadSpec) -> Result<f64> {
    let (p, q) = check_price_inputs(params, quote, mu)?;
    if !(spec.tol > 0.0 && spec.y_max > 0.0) {
        return Err(Error::domain("tol", "tol > 0 and y_max > 0", spec.tol));
    }
    let tau = q.maturity;
    let y0 = -q.log_moneyness() - mu * tau;
    let abs_tol = spec.tol * q.strike;
    let density = |y: f64| -> Result<f64> {
        if y.abs() < ORIGIN_GAP {
            let lo = green_max_asym(-ORIGIN_GAP, tau, &p, mu, &spec.contour)?;
            let hi = green_max_asym(ORIGIN_GAP, tau, &p, mu, &spec.contour)?;
            return Ok(lo + (hi - lo) * (y + ORIGIN_GAP) / (2.0 * ORIGIN_GAP));
        }
        green_max_asym(y, tau, &p, mu, &spec.contour)
    };
    let integrand = |y: f64| -> Result<f64> { Ok(q.strike * (y - y0).exp_m1() * density(y)?) };

    // March the upper limit out in half steps past the point where the
    // integrand has dropped below a thousandth of the tolerance.
    let start = y0.max(0.0);
    let mut upper = start;
    let mut below = 0;
    while below < 2 {
        upper += 0.5;
        if upper > spec.y_max {
            return Err(Error::NoConvergence {
                what: "convolution upper limit",
                iterations: (spec.y_max / 0.5) as usize,
                last_increment: integrand(upper - 0.5)?,
            });
        }
        if integrand(upper)?.abs() < 1e-3 * abs_tol {
            below += 1;
        } else {
            below = 0;
        }
    }

    let mut failure = None;
    let mut guarded = |y: f64| match integrand(y) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let mut total = 0.0;
    if y0 < 0.0 {
        total += quad::adaptive(y0, 0.0, 0.5 * abs_tol, &mut guarded)?;
    }
    total += quad::adaptive(start, upper, 0.5 * abs_tol, &mut guarded)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.discount() * total)
}

/// Ray angle of the bent 2-D contours, measured from the negative real axis.
const MB2_RAY_ANGLE: f64 = 0.25 * PI;
const MB2_TAIL_DROP: f64 = 40.0;
const MB2_MAX_RAY: f64 = 2_000.0;
const MB2_REFINE_TOL: f64 = 1e-8;
const MB2_ACCEPT_TOL: f64 = 1e-4;
const MB2_MAX_DOUBLINGS: usize = 4;
const MB2_IMAG_TOL: f64 = 1e-6;

fn mb2_vertex(spec: &ContourSpec, default: f64) -> f64 {
    spec.abscissa.unwrap_or(default)
}

/// Call price from the two-dimensional Mellin-Barnes representation.
///
/// The form carries `(-1)^{-t2}`, read as `e^{-i pi t2}` (principal branch).
/// Evaluation uses the residue coordinates `u1 = -1 - t1 + t2`, `u2 = t2`,
/// in which the integrand is
///
/// ```text
/// e^{-i pi u2} G(u2) G(1-u2) G(u1) / G(1 + g/a - g (u2 - u1)/a) B^{-u1} s^{(1+u1-u2)/a}
/// ```
///
/// with `B = -[log] - mu tau` and `s = -mu tau^g`. On vertical lines this
/// grows along `t1 = t2`, so each line is bent into two rays at `+-45`
/// degrees leaning left from its vertex, and the tensor product of the two
/// Gauss-Legendre rules is summed. `contours.0` and `contours.1` hold `c1`
/// and `c2` (defaults `-1.6`, `0.4`), which must satisfy `0 < c2 < 1` and
/// `c2 - c1 > 1`; their `half_length` is read as ray length and `nodes` as
/// nodes per ray.
pub fn price_by_mb2(
    params: &ModelParams,
    quote: &MarketQuote,
    mu: f64,
    contours: (&ContourSpec, &ContourSpec),
) -> Result<f64> {
    let (p, q) = check_price_inputs(params, quote, mu)?;
    let (spec1, spec2) = contours;
    spec2.validate()?;
    spec1.validate_in(f64::NEG_INFINITY, f64::INFINITY)?;
    let c2 = mb2_vertex(spec2, 0.4);
    let c1 = mb2_vertex(spec1, c2 - 2.0);
    if !(c2 - c1 > 1.0) {
        return Err(Error::domain("abscissa", "c2 - c1 > 1", c1));
    }
    let tau = q.maturity;
    let (a, g) = (p.alpha, p.gamma);
    let b = -q.log_moneyness() - mu * tau;
    if b == 0.0 || !b.is_finite() {
        return Err(Error::domain("log_moneyness", "-[log] - mu tau != 0", b));
    }
    let ln_b = Complex64::new(b.abs().ln(), if b < 0.0 { PI } else { 0.0 });
    let ln_s = (-mu * tau.powf(g)).ln();
    let v1 = Complex64::new(-1.0 - c1 + c2, 0.0);
    let v2 = Complex64::new(c2, 0.0);
    let dir = Complex64::from_polar(1.0, PI - MB2_RAY_ANGLE);
    let i = Complex64::i();

    let part1 = |u1: Complex64| ln_gamma_c(u1) - u1 * ln_b + u1 / a * ln_s;
    // G(u2) G(1-u2) = pi / sin(pi u2)
    let part2 = |u2: Complex64| -i * PI * u2 + PI.ln() - ln_sin_pi(u2) - u2 / a * ln_s;
    let coupling = |u1: Complex64, u2: Complex64| -ln_gamma_c(1.0 + g / a - g * (u2 - u1) / a);
    let constant = ln_s / a;
    let ln_f = |u1: Complex64, u2: Complex64| part1(u1) + part2(u2) + coupling(u1, u2) + constant;

    let ray_length = |spec: &ContourSpec, along: &dyn Fn(Complex64) -> Complex64, vertex: Complex64| {
        if let Some(l) = spec.half_length {
            return Ok(l);
        }
        let up = quad::march_length(|r| along(vertex + dir * r).re, MB2_TAIL_DROP, MB2_MAX_RAY);
        let down = quad::march_length(|r| along(vertex + dir.conj() * r).re, MB2_TAIL_DROP, MB2_MAX_RAY);
        match (up, down) {
            (Some(u), Some(d)) => Ok(u.max(d)),
            _ => Err(Error::Contour {
                what: "two-dimensional contour does not reach the decay threshold",
                imag: f64::NAN,
                threshold: MB2_MAX_RAY,
            }),
        }
    };
    let len1 = ray_length(spec1, &|u1| ln_f(u1, v2), v1)?;
    let len2 = ray_length(spec2, &|u2| ln_f(v1, u2), v2)?;

    let sin_phi = MB2_RAY_ANGLE.sin();
    let width1 = 0.5f64.min(2.0 * v1.re * sin_phi);
    let width2 = 0.5f64.min(2.0 * (c2 * sin_phi).min(1.0 - c2));
    let panels = |spec: &ContourSpec, len: f64, width: f64| match spec.nodes {
        Some(n) => n.div_ceil(PANEL_ORDER),
        None => ((len / width).ceil() as usize).max(4),
    };
    let evaluate = |n1: usize, n2: usize| -> Complex64 {
        let nodes1 = quad::wedge(v1, dir, len1, n1);
        let nodes2 = quad::wedge(v2, dir, len2, n2);
        tensor_sum(&nodes1, &nodes2, &part1, &part2, &coupling, constant)
    };
    let (mut n1, mut n2) = (panels(spec1, len1, width1), panels(spec2, len2, width2));
    let mut value = evaluate(n1, n2);
    if spec1.nodes.is_none() || spec2.nodes.is_none() {
        let mut change = f64::INFINITY;
        for _ in 0..MB2_MAX_DOUBLINGS {
            if spec1.nodes.is_none() {
                n1 *= 2;
            }
            if spec2.nodes.is_none() {
                n2 *= 2;
            }
            let next = evaluate(n1, n2);
            change = (next - value).norm() / next.norm();
            value = next;
            if change < MB2_REFINE_TOL {
                break;
            }
        }
        if change > MB2_ACCEPT_TOL {
            return Err(Error::NoConvergence {
                what: "two-dimensional contour refinement",
                iterations: n1.max(n2) * PANEL_ORDER,
                last_increment: change,
            });
        }
    }
    let price = q.strike * q.discount() / a * value;
    if !(price.im.abs() <= MB2_IMAG_TOL * price.re.abs().max(1e-300)) {
        return Err(Error::Contour {
            what: "two-dimensional price has an imaginary residue",
            imag: price.im,
            threshold: MB2_IMAG_TOL,
        });
    }
    Ok(price.re)
}

fn tensor_sum(
    nodes1: &ContourNodes,
    nodes2: &ContourNodes,
    part1: &dyn Fn(Complex64) -> Complex64,
    part2: &dyn Fn(Complex64) -> Complex64,
    coupling: &dyn Fn(Complex64, Complex64) -> Complex64,
    constant: f64,
) -> Complex64 {
    let a1: Vec<Complex64> = nodes1.points.iter().map(|&u| part1(u)).collect();
    let a2: Vec<Complex64> = nodes2.points.iter().map(|&u| part2(u) + constant).collect();
    let mut acc = ComplexSum::default();
    for (k, (&u1, &w1)) in nodes1.points.iter().zip(&nodes1.weights).enumerate() {
        let mut row = ComplexSum::default();
        for (j, (&u2, &w2)) in nodes2.points.iter().zip(&nodes2.weights).enumerate() {
            let ln = a1[k] + a2[j] + coupling(u1, u2);
            if ln.re > -745.0 {
                row.add(w2 * ln.exp());
            }
        }
        acc.add(w1 * row.value());
    }
    acc.value()
}
