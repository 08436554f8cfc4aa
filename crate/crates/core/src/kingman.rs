//! Closed-form equilibrium of the constant mutation probability model.
//!
//! With mutation probability `b`, mutant law `Q` and top fitness `h`, the
//! forward sequence converges to
//!
//! * `b θ Q(dx) / (θ - (1-b) x)` when `∫ Q(dx) / (1 - x/h) >= 1/b`, with `θ`
//!   the root of `∫ b θ Q(dx) / (θ - (1-b) x) = 1`;
//! * `b Q(dx) / (1 - x/h) + (1 - ∫ b Q(dy) / (1 - y/h)) δ_h` otherwise, in
//!   which case a positive mass condenses at `h`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, MERGE_TOL};

/// Hazard integral ties within this are resolved to the non-condensing case.
const CASE_TIE_TOL: f64 = 1e-12;
const THETA_CEILING: f64 = 1_099_511_627_776.0; // 2^40
const THETA_WIDTH: f64 = 1e-13;
const THETA_RESIDUAL: f64 = 1e-12;

/// A real number or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedReal::PosInfinity)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            ExtendedReal::Finite(v) => s.serialize_f64(v),
            ExtendedReal::PosInfinity => s.serialize_str("inf"),
        }
    }
}

/// Which branch of the equilibrium formula applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EquilibriumCase {
    /// Mutation dominates; no atom forms at `h` beyond `Q(h)`.
    One,
    /// Selection dominates; mass condenses at `h`.
    Two,
}

#[derive(Clone, Debug, Serialize)]
pub struct KingmanEquilibrium {
    pub measure: DiscreteMeasure,
    pub case_tag: EquilibriumCase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Mass at `h` in excess of what `Q` puts there; zero in case One.
    pub condensate_mass: f64,
    pub hazard_integral: ExtendedReal,
}

fn check_rate(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("mutation probability {b} outside (0, 1)")))
    }
}

fn check_mutant(q: &DiscreteMeasure) -> Result<f64> {
    q.ensure_probability("mutant law")?;
    if q.is_dirac_zero() {
        return Err(Error::DegenerateMeasure("mutant law is the point mass at 0".into()));
    }
    Ok(q.support_sup()?.sup_point)
}

/// `∫ Q(dx) / (1 - x/h)`, infinite when `Q` has an atom at `h`.
pub fn hazard_integral(q: &DiscreteMeasure, h: f64) -> Result<ExtendedReal> {
    let s_q = q.support_sup()?.sup_point;
    if h < s_q - MERGE_TOL || h > 1.0 {
        return Err(Error::Domain(format!(
            "top fitness {h} must lie in [S_Q, 1] = [{s_q}, 1]"
        )));
    }
    if q.mass_at(h) > 0.0 {
        return Ok(ExtendedReal::PosInfinity);
    }
    Ok(ExtendedReal::Finite(
        q.atoms().iter().map(|a| a.w / (1.0 - a.x / h)).sum(),
    ))
}

/// Left side of the θ equation; `+∞` at or below the pole `(1-b) S_Q`.
fn theta_equation(b: f64, q: &DiscreteMeasure, theta: f64) -> f64 {
    let mut sum = 0.0;
    for a in q.atoms() {
        let den = theta - (1.0 - b) * a.x;
        if den <= 0.0 {
            return f64::INFINITY;
        }
        sum += b * theta * a.w / den;
    }
    sum
}

/// Root of `∫ b θ Q(dx) / (θ - (1-b) x) = 1` above `(1-b) S_Q`.
///
/// The left side decreases strictly in θ from (possibly) `+∞` at the pole
/// to `b < 1` at infinity, so a bracket exists exactly when the value just
/// above the pole is at least one. Bisection runs to `1e-13` width and then
/// on until the residual is below `1e-12` or the bracket is exhausted.
pub fn solve_theta(b: f64, q: &DiscreteMeasure) -> Result<f64> {
    check_rate(b)?;
    let s_q = check_mutant(q)?;
    let f = |t: f64| theta_equation(b, q, t) - 1.0;

    let mut lo = (1.0 - b) * s_q * (1.0 + 1e-15);
    if f(lo) < 0.0 {
        return Err(Error::Numeric(format!(
            "no root of the theta equation for b = {b}: the parameters are in the condensing case"
        )));
    }
    let mut hi = lo.max(1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > THETA_CEILING {
            return Err(Error::Numeric("theta bracket not found below 2^40".into()));
        }
    }

    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= THETA_WIDTH && f(lo).abs().min(f(hi).abs()) <= THETA_RESIDUAL {
            break;
        }
    }
    let theta = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    Ok(theta)
}

/// The limit of the forward sequence for constant mutation probability `b`.
pub fn equilibrium(b: f64, q: &DiscreteMeasure, h: f64) -> Result<KingmanEquilibrium> {
    check_rate(b)?;
    check_mutant(q)?;
    let hazard = hazard_integral(q, h)?;
    let case_one = match hazard {
        ExtendedReal::PosInfinity => true,
        ExtendedReal::Finite(v) => v >= 1.0 / b - CASE_TIE_TOL,
    };

    if case_one {
        let theta = solve_theta(b, q)?;
        let measure = DiscreteMeasure::canonicalize(
            q.atoms()
                .iter()
                .map(|a| (a.x, b * theta * a.w / (theta - (1.0 - b) * a.x))),
        )?
        .normalized()?;
        Ok(KingmanEquilibrium {
            measure,
            case_tag: EquilibriumCase::One,
            theta: Some(theta),
            condensate_mass: 0.0,
            hazard_integral: hazard,
        })
    } else {
        let spread: Vec<(f64, f64)> = q
            .atoms()
            .iter()
            .map(|a| (a.x, b * a.w / (1.0 - a.x / h)))
            .collect();
        let condensate = 1.0 - spread.iter().map(|s| s.1).sum::<f64>();
        let measure = DiscreteMeasure::canonicalize(
            spread.into_iter().chain(std::iter::once((h, condensate))),
        )?;
        Ok(KingmanEquilibrium {
            measure,
            case_tag: EquilibriumCase::Two,
            theta: None,
            condensate_mass: condensate,
            hazard_integral: hazard,
        })
    }
}

/// Mean fitness of the equilibrium, computed from the measure and from the
/// closed forms `θ` (case One) and `(1-b) h` (case Two).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanFitnessCheck {
    pub computed: f64,
    pub closed_form: f64,
}

pub fn equilibrium_mean_fitness(eq: &KingmanEquilibrium, b: f64, h: f64) -> MeanFitnessCheck {
    let computed = eq.measure.moment(1, false);
    let closed_form = match (eq.case_tag, eq.theta) {
        (EquilibriumCase::One, Some(theta)) => theta,
        _ => (1.0 - b) * h,
    };
    MeanFitnessCheck { computed, closed_form }
}

/// `ln(h (1-b) / ∫ x K_Q(dx))` where `K_Q` is the equilibrium at `h = S_Q`.
///
/// For `h > S_Q` this is `<= 0` exactly when the equilibrium at `h` does
/// not condense. At `h = S_Q` it is never positive.
pub fn log_ratio_diagnostic(b: f64, q: &DiscreteMeasure, h: f64) -> Result<f64> {
    let s_q = check_mutant(q)?;
    hazard_integral(q, h)?;
    let at_sup = equilibrium(b, q, s_q)?;
    Ok((h * (1.0 - b) / at_sup.measure.moment(1, false)).ln())
}
