//! Double-exponential (tanh-sinh) quadrature on a finite interval.
//!
//! The integrand receives the abscissa together with its exact distances to
//! both endpoints, so integrable endpoint singularities such as
//! `x^(a-1)` or `ln(1 - x)` can be evaluated without cancellation.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const T_MAX: f64 = 6.5;
const MAX_LEVELS: usize = 14;

/// Integrates `f(x, x - a, b - x)` over `[a, b]` until two successive
/// refinements differ by at most `abs_tol`.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if !(a < b) {
        return if a == b {
            Ok(0.0)
        } else {
            Err(Error::Usage(format!("empty interval [{a}, {b}]")))
        };
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);

    // Contribution of the symmetric pair of nodes at +t and -t (or the centre).
    let node = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        let weight = half * FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        if weight == 0.0 || !weight.is_finite() {
            return 0.0;
        }
        // Distance from the nearer endpoint: half * (1 - tanh|u|).
        let gap = half * 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        if t == 0.0 {
            return weight * f(mid, half, half);
        }
        let mut s = 0.0;
        if gap > 0.0 {
            s += weight * f(b - gap, b - a - gap, gap);
            s += weight * f(a + gap, gap, b - a - gap);
        }
        s
    };

    let mut step = 1.0;
    let mut sum = node(0.0);
    let mut k = 1.0;
    while k * step <= T_MAX {
        sum += node(k * step);
        k += 1.0;
    }
    let mut estimate = step * sum;

    for _ in 0..MAX_LEVELS {
        step *= 0.5;
        let mut t = step;
        while t <= T_MAX {
            sum += node(t);
            t += 2.0 * step;
        }
        let refined = step * sum;
        if !refined.is_finite() {
            return Err(Error::Numeric("quadrature produced a non-finite value".into()));
        }
        let diff = (refined - estimate).abs();
        estimate = refined;
        if diff <= abs_tol {
            return Ok(estimate);
        }
    }
    Err(Error::Numeric(format!(
        "tanh-sinh quadrature did not reach tolerance {abs_tol:e}"
    )))
}
