//! Gauss-Legendre building blocks: composite panels, adaptive bisection and
//! node sets for complex contours.
//!
//! Contour weights already include the `1/(2 pi i)` factor, so a contour
//! integral is `sum w_k f(z_k)`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special_fn::{CompensatedSum, ComplexSum};

/// Nodes per Gauss-Legendre panel.
pub const PANEL_ORDER: usize = 16;
const ADAPTIVE_DEPTH: usize = 48;
const ADAPTIVE_MAX_SPLITS: usize = 1 << 15;

fn panel_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| rule_of_order(PANEL_ORDER))
}

fn rule_of_order(order: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(order.max(2)).expect("order >= 2");
    GaussLegendre::new(n).as_node_weight_pairs().to_vec()
}

/// Nodes and weights of `panels` equal Gauss-Legendre panels on `[a, b]`.
pub fn composite_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * PANEL_ORDER);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in panel_rule() {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn composite<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    composite_nodes(a, b, panels)
        .into_iter()
        .map(|(x, w)| w * f(x))
        .collect::<CompensatedSum>()
        .value()
}

fn panel<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    panel_rule()
        .iter()
        .map(|&(x, w)| half * w * f(mid + half * x))
        .collect::<CompensatedSum>()
        .value()
}

/// Adaptive bisection with 16-point panels until the estimated absolute
/// error is below `abs_tol`.
///
/// The tolerance is shared out in proportion to sub-interval width; gives
/// up after a fixed number of bisections.
pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, abs_tol: f64, mut f: F) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain(
            "bounds",
            "finite integration bounds",
            if a.is_finite() { b } else { a },
        ));
    }
    let width = (b - a).abs();
    let mut acc = CompensatedSum::new();
    // Error left over in intervals that hit the depth cap.
    let mut excess = 0.0f64;
    let whole = panel(a, b, &mut f);
    let mut stack = vec![(a, b, whole, 0usize)];
    let mut splits = 0usize;
    while let Some((lo, hi, est, depth)) = stack.pop() {
        splits += 1;
        if splits > ADAPTIVE_MAX_SPLITS {
            return Err(Error::NoConvergence {
                what: "adaptive quadrature",
                iterations: splits,
                last_increment: est.abs(),
            });
        }
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid, &mut f);
        let right = panel(mid, hi, &mut f);
        let err = (left + right - est).abs();
        let budget = abs_tol * (hi - lo).abs() / width;
        let floor = 1e-15 * (left.abs() + right.abs());
        if err <= budget.max(floor) {
            acc.add(left);
            acc.add(right);
        } else if depth >= ADAPTIVE_DEPTH {
            excess += err;
            acc.add(left);
            acc.add(right);
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    let value = acc.value();
    if excess > abs_tol || !value.is_finite() {
        return Err(Error::NoConvergence {
            what: "adaptive quadrature",
            iterations: ADAPTIVE_DEPTH,
            last_increment: excess,
        });
    }
    Ok(value)
}

/// A discretised contour: points `z_k` and weights `w_k` with the
/// `1/(2 pi i)` factor folded in.
#[derive(Debug, Clone, Default)]
pub struct ContourNodes {
    pub points: Vec<Complex64>,
    pub weights: Vec<Complex64>,
}

impl ContourNodes {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `sum w_k exp(ln_f(z_k))`.
    pub fn integrate_log<F: FnMut(Complex64) -> Complex64>(&self, mut ln_f: F) -> Complex64 {
        let mut acc = ComplexSum::default();
        for (z, w) in self.points.iter().zip(&self.weights) {
            let v = ln_f(*z);
            if v.re > -745.0 {
                acc.add(*w * v.exp());
            }
        }
        acc.value()
    }
}

/// Vertical line `Re z = c`, `|Im z| <= half_length`, traversed upwards.
pub fn vertical_line(c: f64, half_length: f64, panels: usize) -> ContourNodes {
    let mut nodes = ContourNodes::default();
    for (t, w) in composite_nodes(-half_length, half_length, panels) {
        nodes.points.push(Complex64::new(c, t));
        // dz = i dt, so dz / (2 pi i) = dt / (2 pi)
        nodes.weights.push(Complex64::new(w / (2.0 * PI), 0.0));
    }
    nodes
}

/// Two rays from `vertex`: in along `conj(dir)` and out along `dir`, with
/// `Im dir > 0`. Traversed from the lower ray's far end to the upper one's.
pub fn wedge(vertex: Complex64, dir: Complex64, length: f64, panels: usize) -> ContourNodes {
    let dir = dir / dir.norm();
    let lower = dir.conj();
    let scale = 1.0 / (2.0 * PI * Complex64::i());
    let mut nodes = ContourNodes::default();
    for (r, w) in composite_nodes(0.0, length, panels) {
        nodes.points.push(vertex + dir * r);
        nodes.weights.push(dir * w * scale);
        nodes.points.push(vertex + lower * r);
        nodes.weights.push(-lower * w * scale);
    }
    nodes
}

/// Smallest length after which `ln_mag` has dropped `drop` below its running
/// peak and stays there for two more unit steps. `None` if this never
/// happens before `max_length`.
pub fn march_length<F: FnMut(f64) -> f64>(mut ln_mag: F, drop: f64, max_length: f64) -> Option<f64> {
    let mut peak = ln_mag(0.0);
    let mut below = 0;
    let mut r = 0.0;
    while r < max_length {
        r += 1.0;
        let v = ln_mag(r);
        if v.is_nan() {
            return None;
        }
        if v > peak {
            peak = v;
        }
        if v < peak - drop {
            below += 1;
            if below >= 3 {
                return Some(r);
            }
        } else {
            below = 0;
        }
    }
    None
}

/// Evaluates `f(panels)` with the panel count doubled until two successive
/// values differ by at most `tol`. Returns the last value and its panel count.
pub fn refine_panels<F: FnMut(usize) -> Result<Complex64>>(
    start: usize,
    tol: f64,
    max_doublings: usize,
    mut f: F,
) -> Result<(Complex64, usize)> {
    let mut panels = start.max(1);
    let mut prev = f(panels)?;
    let mut change = f64::INFINITY;
    for _ in 0..max_doublings {
        panels *= 2;
        let next = f(panels)?;
        change = (next - prev).norm();
        prev = next;
        if change <= tol {
            return Ok((prev, panels));
        }
    }
    Err(Error::NoConvergence {
        what: "contour panel refinement",
        iterations: panels * PANEL_ORDER,
        last_increment: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_is_exact_for_polynomials() {
        let v = composite(-1.0, 2.0, 3, |x| x.powi(7) - 2.0 * x);
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (4.0 - 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_a_peak() {
        let v = adaptive(-10.0, 10.0, 1e-13, |x| (-1e4 * (x - 0.3) * (x - 0.3)).exp()).unwrap();
        assert!((v - (PI / 1e4).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn adaptive_endpoint_singularity() {
        let v = adaptive(0.0, 1.0, 1e-8, |x| 1.0 / x.sqrt()).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn adaptive_reversed_bounds() {
        let v = adaptive(1.0, 0.0, 1e-14, |x| x).unwrap();
        assert!((v + 0.5).abs() < 1e-15);
    }

    #[test]
    fn vertical_line_recovers_inverse_mellin_of_gamma() {
        // (1/2 pi i) int G(s) x^{-s} ds = e^{-x} on Re s = 1.
        let x: f64 = 0.7;
        let nodes = vertical_line(1.0, 60.0, 120);
        let v = nodes.integrate_log(|s| crate::special_fn::ln_gamma_c(s) - s * x.ln());
        assert!((v.re - (-x).exp()).abs() < 1e-13 && v.im.abs() < 1e-13);
    }

    #[test]
    fn wedge_recovers_reciprocal_gamma() {
        // Hankel: 1/G(z) = (1/2 pi i) int e^t t^{-z} dt around the negative axis.
        let z = 2.5;
        let nodes = wedge(
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, 0.75 * PI),
            60.0,
            120,
        );
        let v = nodes.integrate_log(|t| t - z * t.ln());
        assert!((v.re - crate::special_fn::reciprocal_gamma(z)).abs() < 1e-13);
        assert!(v.im.abs() < 1e-13);
    }

    #[test]
    fn march_finds_decay() {
        let r = march_length(|t| -t, 10.0, 100.0).unwrap();
        assert!((11.0..=14.0).contains(&r));
        assert!(march_length(|t| t, 10.0, 50.0).is_none());
    }
}
