//! Green function of the space-time fractional diffusion equation by
//! numerical Mellin-Barnes inversion on a vertical line.
//!
//! For `x > 0`
//!
//! ```text
//! g(x,t) = 1/(a x) * (1/2 pi i) int G(s/a) G(1-s/a) G(1-s)
//!          / (G(1-gs/a) G(rs) G(1-rs)) * X^s ds,    X = x / (-mu t^g)^{1/a}
//! ```
//!
//! with `r = (a - theta)/(2a)`; negative `x` uses `g^theta(-x) = g^{-theta}(x)`.
//! Along the line the integrand decays like `exp(-k |Im s|)` with
//! `k = pi (2 + theta - g) / (2a)`, so the truncation length is found by
//! marching until the integrand has dropped by `e^-38` from its peak.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, PANEL_ORDER};
use crate::special_fn::ln_gamma_c;
use crate::types::{validate_model, ModelParams};

/// Log-magnitude drop that ends the contour.
const TAIL_DROP: f64 = 38.0;
const MAX_HALF_LENGTH: f64 = 20_000.0;
/// Doubling stops once the density changes by less than this.
const REFINE_TOL: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 5;
/// Largest imaginary residue or negative value accepted in a density.
const REALITY_TOL: f64 = 1e-8;
/// Lowest abscissa tried when steering the reduced-form contour.
const SADDLE_FLOOR: f64 = -1.0e6;

/// A vertical integration line `Re s = abscissa`, `|Im s| <= half_length`.
///
/// Fields left as `None` are chosen per evaluation: the abscissa defaults
/// to 1/2, the half-length comes from the decay envelope and the node count
/// is doubled until the result settles. The bent contours in
/// [`crate::risk_neutral`] and [`crate::oracle`] reuse the type with
/// `half_length` read as the ray length and `nodes` as nodes per ray.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContourSpec {
    pub abscissa: Option<f64>,
    pub half_length: Option<f64>,
    pub nodes: Option<usize>,
}

impl ContourSpec {
    /// Everything adaptive.
    pub fn auto() -> Self {
        ContourSpec::default()
    }

    /// Fixed abscissa, adaptive truncation and nodes.
    pub fn at(abscissa: f64) -> Self {
        ContourSpec {
            abscissa: Some(abscissa),
            ..ContourSpec::default()
        }
    }

    /// Fully explicit contour.
    pub fn fixed(abscissa: f64, half_length: f64, nodes: usize) -> Self {
        ContourSpec {
            abscissa: Some(abscissa),
            half_length: Some(half_length),
            nodes: Some(nodes),
        }
    }

    /// Checks the explicit fields: `0 < abscissa < 1`, `half_length > 0`,
    /// `nodes >= 64`.
    pub fn validate(&self) -> Result<()> {
        self.validate_in(0.0, 1.0)
    }

    pub(crate) fn validate_in(&self, lo: f64, hi: f64) -> Result<()> {
        if let Some(c) = self.abscissa {
            if !(c > lo && c < hi) {
                return Err(Error::domain("abscissa", format!("{lo} < abscissa < {hi}"), c));
            }
        }
        if let Some(t) = self.half_length {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::domain("half_length", "0 < half_length < inf", t));
            }
        }
        if let Some(n) = self.nodes {
            if n < 64 {
                return Err(Error::domain("nodes", "nodes >= 64", n as f64));
            }
        }
        Ok(())
    }
}

/// `(1/2 pi i) int exp(ln_f(s)) ds` on `Re s = c`.
///
/// `pole_distance` is the gap from the line to the nearest singularity and
/// `freq` the oscillation rate `|ln X|`; both bound the panel width.
fn integrate_line<F: Fn(Complex64) -> Complex64>(
    ln_f: F,
    c: f64,
    spec: &ContourSpec,
    pole_distance: f64,
    freq: f64,
    scale: f64,
) -> Result<Complex64> {
    let half_length = match spec.half_length {
        Some(t) => t,
        None => {
            let up = quad::march_length(|t| ln_f(Complex64::new(c, t)).re, TAIL_DROP, MAX_HALF_LENGTH);
            let down = quad::march_length(|t| ln_f(Complex64::new(c, -t)).re, TAIL_DROP, MAX_HALF_LENGTH);
            match (up, down) {
                (Some(a), Some(b)) => a.max(b),
                _ => {
                    return Err(Error::Contour {
                        what: "vertical line does not reach the decay threshold",
                        imag: f64::NAN,
                        threshold: MAX_HALF_LENGTH,
                    })
                }
            }
        }
    };
    let eval = |panels: usize| -> Result<Complex64> {
        let nodes = quad::vertical_line(c, half_length, panels);
        Ok(nodes.integrate_log(&ln_f) * scale)
    };
    match spec.nodes {
        Some(n) => eval(n.div_ceil(PANEL_ORDER)),
        None => {
            let mut width = 1.0f64.min(2.0 * pole_distance);
            if freq > 0.0 {
                width = width.min(2.0 * PI / freq);
            }
            let start = ((2.0 * half_length / width).ceil() as usize).max(4);
            quad::refine_panels(start, REFINE_TOL, MAX_DOUBLINGS, eval).map(|(v, _)| v)
        }
    }
}

fn check_density(value: Complex64) -> Result<f64> {
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::Contour {
            what: "non-finite density",
            imag: value.im,
            threshold: REALITY_TOL,
        });
    }
    if value.im.abs() > REALITY_TOL {
        return Err(Error::Contour {
            what: "density has an imaginary residue",
            imag: value.im,
            threshold: REALITY_TOL,
        });
    }
    if value.re < -REALITY_TOL {
        return Err(Error::Contour {
            what: "negative density",
            imag: value.re,
            threshold: REALITY_TOL,
        });
    }
    Ok(value.re)
}

fn check_common(x: f64, t: f64, mu: f64) -> Result<()> {
    if !(x.is_finite() && x != 0.0) {
        return Err(Error::domain("x", "x != 0", x));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain("t", "t > 0", t));
    }
    if !(mu < 0.0 && mu.is_finite()) {
        return Err(Error::domain("mu", "mu < 0", mu));
    }
    Ok(())
}

/// Green function `g(x, t)` for general asymmetry.
///
/// `mu < 0` is the diffusion coefficient, so the length scale is
/// `(-mu t^gamma)^{1/alpha}`; pricing passes the risk-neutral factor.
pub fn green_mb(x: f64, t: f64, params: &ModelParams, mu: f64, contour: &ContourSpec) -> Result<f64> {
    let p = validate_model(*params, false)?;
    check_common(x, t, mu)?;
    let strip_hi = 1.0f64.min(p.alpha);
    contour.validate_in(0.0, strip_hi)?;
    let (x, theta) = if x < 0.0 { (-x, -p.theta) } else { (x, p.theta) };
    let (a, g) = (p.alpha, p.gamma);
    let rho = (a - theta) / (2.0 * a);
    if rho <= 0.0 {
        // One-sided law with all mass on the other half-line.
        return Ok(0.0);
    }
    let decay = PI * (2.0 + theta - g) / (2.0 * a);
    if decay <= 1e-9 {
        return Err(Error::Contour {
            what: "integrand does not decay along the vertical line",
            imag: decay,
            threshold: 0.0,
        });
    }
    let c = contour.abscissa.unwrap_or(0.5 * strip_hi);
    let ln_x = x.ln() - (-mu * t.powf(g)).ln() / a;
    let ln_f = |s: Complex64| {
        ln_gamma_c(s / a) + ln_gamma_c(1.0 - s / a) + ln_gamma_c(1.0 - s)
            - ln_gamma_c(1.0 - g * s / a)
            - ln_gamma_c(rho * s)
            - ln_gamma_c(1.0 - rho * s)
            + s * ln_x
    };
    let pole_distance = c.min(strip_hi - c);
    let value = integrate_line(ln_f, c, contour, pole_distance, ln_x.abs(), 1.0 / (a * x))?;
    check_density(value)
}

/// Green function at maximal negative asymmetry `theta = alpha - 2`, the
/// density that drives pricing.
///
/// For `y > 0` the Gamma ratio collapses to `G(1-s)/G(1-gs/a)`, whose strip
/// is the whole half-plane `Re s < 1`. With an adaptive abscissa the line is
/// moved left to the saddle of the integrand, which keeps relative accuracy
/// deep in the light right tail. `y < 0` goes through [`green_mb`].
pub fn green_max_asym(y: f64, tau: f64, params: &ModelParams, mu: f64, contour: &ContourSpec) -> Result<f64> {
    let p = check_max_asym(params, y, tau, mu)?;
    if y < 0.0 {
        return green_mb(y, tau, &p, mu, contour);
    }
    let (shift, scaled) = reduced_right_tail(y, tau, &p, mu, contour)?;
    check_density(scaled * shift.exp())
}

/// Natural log of [`green_max_asym`], free of underflow in the right tail
/// where the density falls below `1e-300` within a few units of `y`.
pub fn ln_green_max_asym(y: f64, tau: f64, params: &ModelParams, mu: f64, contour: &ContourSpec) -> Result<f64> {
    let p = check_max_asym(params, y, tau, mu)?;
    if y < 0.0 {
        return green_mb(y, tau, &p, mu, contour).map(f64::ln);
    }
    let (shift, scaled) = reduced_right_tail(y, tau, &p, mu, contour)?;
    if !(scaled.re > 0.0) || scaled.im.abs() > REALITY_TOL * scaled.re {
        return Err(Error::Contour {
            what: "log-density needs a positive real integral",
            imag: scaled.im,
            threshold: REALITY_TOL,
        });
    }
    Ok(shift + scaled.re.ln())
}

fn check_max_asym(params: &ModelParams, y: f64, tau: f64, mu: f64) -> Result<ModelParams> {
    let p = validate_model(*params, false)?;
    if !p.is_max_asymmetry() {
        return Err(Error::PricingAsymmetry {
            theta: p.theta,
            required: p.alpha - 2.0,
        });
    }
    check_common(y, tau, mu)?;
    Ok(p)
}

/// Reduced-form integral for `y > 0` as `(shift, I)` with density `I e^shift`;
/// `shift` is the log-integrand at the real point of the line.
fn reduced_right_tail(y: f64, tau: f64, p: &ModelParams, mu: f64, contour: &ContourSpec) -> Result<(f64, Complex64)> {
    contour.validate()?;
    let (a, g) = (p.alpha, p.gamma);
    let ratio = g / a;
    let decay = 0.5 * PI * (1.0 - ratio);
    if decay <= 1e-9 {
        return Err(Error::Contour {
            what: "integrand does not decay along the vertical line",
            imag: decay,
            threshold: 0.0,
        });
    }
    let ln_x = y.ln() - (-mu * tau.powf(g)).ln() / a;
    let ln_f = |s: Complex64| ln_gamma_c(1.0 - s) - ln_gamma_c(1.0 - ratio * s) + s * ln_x;
    let c = match contour.abscissa {
        Some(c) => c,
        None => saddle_abscissa(|c| ln_f(Complex64::new(c, 0.0)).re),
    };
    let shift = ln_f(Complex64::new(c, 0.0)).re;
    let scaled = integrate_line(|s| ln_f(s) - shift, c, contour, 1.0 - c, ln_x.abs(), 1.0 / (a * y))?;
    Ok((shift, scaled))
}

/// Minimiser of the real log-integrand over `[SADDLE_FLOOR, 1/2]`: a coarse
/// geometric scan and a golden-section polish.
fn saddle_abscissa<F: Fn(f64) -> f64>(phi: F) -> f64 {
    let mut grid = vec![0.5, 0.0];
    let mut c = -0.5;
    while c >= SADDLE_FLOOR {
        grid.push(c);
        c *= 2.0;
    }
    let values: Vec<f64> = grid.iter().map(|&c| phi(c)).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if best == 0 {
        return 0.5;
    }
    let hi = grid[best - 1];
    let lo = grid.get(best + 1).copied().unwrap_or(grid[best]);
    let (mut a, mut b) = (lo, hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    for _ in 0..40 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = phi(x2);
        }
    }
    (0.5 * (a + b)).min(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_params() -> ModelParams {
        ModelParams::max_asymmetry(1.7, 0.9, 0.2)
    }
    const TABLE_MU: f64 = -0.046_134_733_076_535_3;

    #[test]
    fn heat_kernel_limit() {
        let p = ModelParams::new(2.0, 1.0, 0.2, 0.0);
        let d = 0.3;
        for &x in &[-2.0, -0.7, 0.05, 0.4, 1.3, 3.0] {
            for &t in &[0.5, 1.0, 2.0] {
                let g = green_mb(x, t, &p, -d, &ContourSpec::auto()).unwrap();
                let exact = (-x * x / (4.0 * d * t)).exp() / (4.0 * PI * d * t).sqrt();
                assert!((g - exact).abs() < 1e-10, "x {x} t {t}: {g} vs {exact}");
            }
        }
    }

    #[test]
    fn reduced_form_matches_general_form() {
        let p = table_params();
        let a = green_max_asym(0.3, 1.0, &p, TABLE_MU, &ContourSpec::auto()).unwrap();
        let b = green_mb(0.3, 1.0, &p, TABLE_MU, &ContourSpec::auto()).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        let c = green_max_asym(0.3, 1.0, &p, TABLE_MU, &ContourSpec::at(0.5)).unwrap();
        assert!((a - c).abs() < 1e-10);
    }

    #[test]
    fn abscissa_independence() {
        let p = table_params();
        for &y in &[-1.2, -0.2, 0.1, 0.6] {
            let a = green_mb(y, 1.0, &p, TABLE_MU, &ContourSpec::at(0.25)).unwrap();
            let b = green_mb(y, 1.0, &p, TABLE_MU, &ContourSpec::at(0.75)).unwrap();
            assert!((a - b).abs() < 1e-10, "y {y}: {a} vs {b}");
        }
    }

    #[test]
    fn saddle_contour_keeps_relative_accuracy_in_the_tail() {
        // High-precision residue-series values of the right tail.
        let p = table_params();
        let refs = [
            (3.0, 1.339_288_228_721_79e-48),
            (5.0, 3.282_645_780_994_78e-143),
            (6.0, 8.155_073_137_423_98e-211),
        ];
        for (y, want) in refs {
            let got = green_max_asym(y, 1.0, &p, TABLE_MU, &ContourSpec::auto()).unwrap();
            assert!((got / want - 1.0).abs() < 1e-9, "y {y}: {got} vs {want}");
            let ln = ln_green_max_asym(y, 1.0, &p, TABLE_MU, &ContourSpec::auto()).unwrap();
            assert!((ln - want.ln()).abs() < 1e-9);
        }
        let far = green_max_asym(1.5, 1.0, &p, TABLE_MU, &ContourSpec::auto()).unwrap();
        let line = green_max_asym(1.5, 1.0, &p, TABLE_MU, &ContourSpec::at(0.5)).unwrap();
        assert!((far - line).abs() < 1e-12);
    }

    #[test]
    fn exponential_moment_weight_decreases_in_the_tail() {
        let p = table_params();
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let y = 5.0 + 0.5 * k as f64;
            let v = y + ln_green_max_asym(y, 1.0, &p, TABLE_MU, &ContourSpec::auto()).unwrap();
            assert!(v < prev, "y {y}");
            prev = v;
        }
    }

    #[test]
    fn explicit_contour_is_used_as_given() {
        let p = table_params();
        let auto = green_mb(-0.4, 1.0, &p, TABLE_MU, &ContourSpec::auto()).unwrap();
        let fixed = green_mb(-0.4, 1.0, &p, TABLE_MU, &ContourSpec::fixed(0.5, 80.0, 4096)).unwrap();
        assert!((auto - fixed).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = table_params();
        let auto = ContourSpec::auto();
        assert!(green_mb(0.0, 1.0, &p, TABLE_MU, &auto).unwrap_err().is_domain());
        assert!(green_mb(0.1, 0.0, &p, TABLE_MU, &auto).is_err());
        assert!(green_mb(0.1, 1.0, &p, 0.01, &auto).is_err());
        assert!(green_mb(0.1, 1.0, &p, TABLE_MU, &ContourSpec::at(1.2)).is_err());
        assert!(green_mb(0.1, 1.0, &p, TABLE_MU, &ContourSpec::fixed(0.5, 10.0, 32)).is_err());
        let sym = ModelParams::new(1.7, 0.9, 0.2, 0.0);
        assert!(matches!(
            green_max_asym(0.1, 1.0, &sym, TABLE_MU, &auto),
            Err(Error::PricingAsymmetry { .. })
        ));
        let neural = ModelParams::max_asymmetry(1.5, 1.5, 0.2);
        assert!(matches!(
            green_max_asym(0.1, 1.0, &neural, -0.1, &auto),
            Err(Error::Contour { .. })
        ));
    }

    #[test]
    fn reflection_swaps_asymmetry() {
        let p = ModelParams::new(1.5, 0.8, 0.2, -0.3);
        let q = ModelParams::new(1.5, 0.8, 0.2, 0.3);
        let a = green_mb(-0.7, 1.0, &p, -0.05, &ContourSpec::auto()).unwrap();
        let b = green_mb(0.7, 1.0, &q, -0.05, &ContourSpec::auto()).unwrap();
        assert_eq!(a, b);
    }
}
