//! Forward dynamics `P_n = (1 - β_n) x P_{n-1}(dx) / ∫ y P_{n-1}(dy) + β_n Q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::MutationLaw;
use crate::measure::{Atom, DiscreteMeasure};

/// `P_0, ..., P_n` with their mean fitnesses and the mutation probabilities
/// that produced them.
#[derive(Clone, Debug, Serialize)]
pub struct ForwardTrajectory {
    pub measures: Vec<DiscreteMeasure>,
    pub means: Vec<f64>,
    pub betas_used: Vec<f64>,
}

impl ForwardTrajectory {
    pub fn last(&self) -> &DiscreteMeasure {
        self.measures.last().expect("a trajectory holds at least P_0")
    }
}

/// The unnormalised recursion `P̄_n = (1-β_n) x P̄_{n-1} + β_n (∫ y P̄_{n-1}) Q`.
#[derive(Clone, Debug, Serialize)]
pub struct UnnormalizedTrajectory {
    /// Raw measures; weights below the smallest positive double are lost,
    /// the exact scale lives in `log_totals`.
    pub measures: Vec<DiscreteMeasure>,
    pub log_totals: Vec<f64>,
}

pub(crate) fn check_mutant_law(q: &DiscreteMeasure) -> Result<()> {
    q.ensure_probability("mutant law")?;
    if q.is_dirac_zero() {
        return Err(Error::DegenerateMeasure(
            "mutant law δ_0 is handled by the closed form, not the step map".into(),
        ));
    }
    Ok(())
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("mutation probability {beta} outside [0, 1)")))
    }
}

/// One generation: selection by size-biasing, then mutation towards `Q`.
pub fn forward_step(p: &DiscreteMeasure, beta: f64, q: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    check_beta(beta)?;
    step_unchecked(p, beta, q)
}

/// The step map without argument validation, for inner loops whose inputs
/// were validated once.
pub(crate) fn step_unchecked(
    p: &DiscreteMeasure,
    beta: f64,
    q: &DiscreteMeasure,
) -> Result<DiscreteMeasure> {
    p.size_bias()?.mix(1.0 - beta, q, beta).settle()
}

/// Iterates [`forward_step`] over `betas`, recording every generation.
pub fn forward_trajectory(
    p0: &DiscreteMeasure,
    betas: &[f64],
    q: &DiscreteMeasure,
) -> Result<ForwardTrajectory> {
    p0.ensure_probability("initial population")?;
    check_mutant_law(q)?;
    let mut measures = Vec::with_capacity(betas.len() + 1);
    let mut means = Vec::with_capacity(betas.len() + 1);
    measures.push(p0.clone());
    means.push(p0.mean());
    for &beta in betas {
        let next = forward_step(measures.last().unwrap(), beta, q)?;
        means.push(next.mean());
        measures.push(next);
    }
    Ok(ForwardTrajectory { measures, means, betas_used: betas.to_vec() })
}

/// Mean fitness path and final state only, for long runs.
pub fn forward_final(
    p0: &DiscreteMeasure,
    betas: &[f64],
    q: &DiscreteMeasure,
) -> Result<(DiscreteMeasure, Vec<f64>)> {
    p0.ensure_probability("initial population")?;
    check_mutant_law(q)?;
    let mut p = p0.clone();
    let mut means = Vec::with_capacity(betas.len() + 1);
    means.push(p.mean());
    for &beta in betas {
        check_beta(beta)?;
        p = step_unchecked(&p, beta, q)?;
        means.push(p.mean());
    }
    Ok((p, means))
}

/// `P_n` assembled term by term from the expansion
///
/// ```text
/// P_n = Π_{l<n} (1-b_{l+1}) / m̄_l · x^n P_0
///     + Σ_{j=1}^{n} Π_{j<=l<n} (1-b_{l+1}) / m̄_l · b_j x^{n-j} Q
/// ```
///
/// with `m̄_l = ∫ y P_l(dy)` supplied by the caller. Each coefficient is
/// accumulated in log space together with `x^k`.
pub fn expansion_oracle(
    p0: &DiscreteMeasure,
    betas: &[f64],
    q: &DiscreteMeasure,
    n: usize,
    means: &[f64],
) -> Result<DiscreteMeasure> {
    if betas.len() < n || means.len() < n {
        return Err(Error::Usage(format!(
            "expansion to generation {n} needs {n} betas and {n} means, got {} and {}",
            betas.len(),
            means.len()
        )));
    }
    // suffix[j] = Σ_{l=j}^{n-1} ln((1 - b_{l+1}) / m̄_l)
    let mut suffix = vec![0.0; n + 1];
    for l in (0..n).rev() {
        suffix[l] = suffix[l + 1] + (-betas[l]).ln_1p() - means[l].ln();
    }

    let tilt = |a: &Atom, k: usize, log_coef: f64| -> Option<(f64, f64)> {
        if k == 0 {
            return Some((a.x, (log_coef + a.w.ln()).exp()));
        }
        (a.x > 0.0).then(|| (a.x, (log_coef + a.w.ln() + k as f64 * a.x.ln()).exp()))
    };

    let mut raw: Vec<(f64, f64)> = p0.atoms().iter().filter_map(|a| tilt(a, n, suffix[0])).collect();
    for j in 1..=n {
        let b = betas[j - 1];
        if b == 0.0 {
            continue;
        }
        let log_coef = suffix[j] + b.ln();
        raw.extend(q.atoms().iter().filter_map(|a| tilt(a, n - j, log_coef)));
    }
    DiscreteMeasure::canonicalize(raw)
}

/// Runs the unnormalised recursion. Raw weights are carried with a
/// power-of-two scale so that the totals never under- or overflow.
pub fn unnormalized_trajectory(
    p0: &DiscreteMeasure,
    betas: &[f64],
    q: &DiscreteMeasure,
) -> Result<UnnormalizedTrajectory> {
    p0.ensure_probability("initial population")?;
    check_mutant_law(q)?;
    const RESCALE_EXP: i32 = 500;
    let rescale_hi = 2f64.powi(RESCALE_EXP);
    let rescale_lo = 2f64.powi(-RESCALE_EXP);

    let mut raw = p0.clone();
    let mut log_scale = 0.0;
    let mut measures = vec![p0.clone()];
    let mut log_totals = vec![p0.total().ln()];
    for &beta in betas {
        check_beta(beta)?;
        let first = raw.moment(1, false);
        if !(first > 0.0) {
            return Err(Error::DegenerateMeasure("unnormalised mass has zero mean".into()));
        }
        let selected = DiscreteMeasure::canonicalize(
            raw.atoms().iter().map(|a| (a.x, (1.0 - beta) * a.x * a.w)),
        )?;
        raw = selected.mix(1.0, q, beta * first);
        let total = raw.total();
        if total > rescale_hi {
            raw = raw.scaled(rescale_lo);
            log_scale += f64::from(RESCALE_EXP) * std::f64::consts::LN_2;
        } else if total < rescale_lo {
            raw = raw.scaled(rescale_hi);
            log_scale -= f64::from(RESCALE_EXP) * std::f64::consts::LN_2;
        }
        log_totals.push(log_scale + raw.total().ln());
        measures.push(raw.scaled(log_scale.exp()));
    }
    Ok(UnnormalizedTrajectory { measures, log_totals })
}

/// `gr(h) = E[ln h(1 - β)]`, the growth rate of the mass kept at `h`.
pub fn growth_rate_h(law: &MutationLaw, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Domain(format!("top fitness {h} outside (0, 1]")));
    }
    Ok(h.ln() + law.expected_log_one_minus()?)
}

/// Generation `n` of the model with mutant law `δ_0`, in closed form:
/// `(1 - β_n) x^n P_0 / ∫ y^n P_0 + β_n δ_0`.
pub fn zero_mutant_closed_form(p0: &DiscreteMeasure, n: u32, beta_n: f64) -> Result<DiscreteMeasure> {
    check_beta(beta_n)?;
    if n == 0 {
        p0.ensure_probability("initial population")?;
        return Ok(p0.clone());
    }
    let (tilted, _) = p0.tilt_power(n)?;
    Ok(tilted.mix(1.0 - beta_n, &DiscreteMeasure::dirac(0.0)?, beta_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kingman::equilibrium;
    use crate::seed::SeedSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(raw: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::canonicalize(raw.iter().copied()).unwrap()
    }

    fn dirac(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(x).unwrap()
    }

    #[test]
    fn step_examples() {
        assert_eq!(forward_step(&dirac(0.4), 0.3, &dirac(0.4)).unwrap(), dirac(0.4));

        let p = m(&[(0.0, 0.5), (1.0, 0.5)]);
        let next = forward_step(&p, 0.2, &dirac(0.5)).unwrap();
        assert_abs_diff_eq!(next.mass_at(1.0), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(next.mass_at(0.5), 0.2, epsilon = 1e-15);
        assert_eq!(next.len(), 2);

        let q = m(&[(0.2, 0.5), (0.8, 0.5)]);
        let k = equilibrium(0.5, &q, 1.0).unwrap().measure;
        assert!(forward_step(&k, 0.5, &q).unwrap().tv_distance(&k) <= 1e-12);

        assert!(forward_step(&dirac(0.0), 0.2, &q).is_err());
        assert!(forward_step(&q, 1.0, &q).is_err());
    }

    #[test]
    fn trajectory_examples() {
        let q = dirac(0.5);
        let t = forward_trajectory(&dirac(1.0), &[], &q).unwrap();
        assert_eq!(t.measures, vec![dirac(1.0)]);
        assert_eq!(t.means, vec![1.0]);

        let t = forward_trajectory(&dirac(1.0), &[0.3; 400], &q).unwrap();
        let target = m(&[(0.5, 0.6), (1.0, 0.4)]);
        assert!(t.last().tv_distance(&target) < 1e-6);
        for (mu, mean) in t.measures.iter().zip(&t.means) {
            assert_eq!(mu.mean(), *mean);
        }

        let p0 = m(&[(0.3, 0.5), (0.9, 0.5)]);
        let t = forward_trajectory(&p0, &[1.0 - 1e-12; 3], &p0).unwrap();
        assert!(t.last().tv_distance(&p0) < 1e-11);
    }

    #[test]
    fn trajectory_rejects_point_mass_at_zero_mutants() {
        assert!(matches!(
            forward_trajectory(&dirac(1.0), &[0.2], &dirac(0.0)),
            Err(Error::DegenerateMeasure(_))
        ));
    }

    #[test]
    fn expansion_small_cases() {
        let p0 = m(&[(0.4, 0.5), (0.9, 0.5)]);
        let q = m(&[(0.1, 0.3), (0.6, 0.7)]);
        assert_eq!(expansion_oracle(&p0, &[], &q, 0, &[]).unwrap(), p0);
        let one = expansion_oracle(&p0, &[0.35], &q, 1, &[p0.mean()]).unwrap();
        assert!(one.tv_distance(&forward_step(&p0, 0.35, &q).unwrap()) <= 1e-15);
        assert!(matches!(
            expansion_oracle(&p0, &[0.1], &q, 2, &[0.5, 0.5]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn unnormalized_examples() {
        let p0 = m(&[(0.4, 0.5), (0.9, 0.5)]);
        let q = m(&[(0.1, 0.3), (0.6, 0.7)]);
        let u = unnormalized_trajectory(&p0, &[], &q).unwrap();
        assert_eq!(u.measures, vec![p0.clone()]);
        assert_eq!(u.log_totals, vec![0.0]);

        let u = unnormalized_trajectory(&p0, &[0.3], &q).unwrap();
        assert_abs_diff_eq!(u.measures[1].total(), p0.mean(), epsilon = 1e-15);

        let c = dirac(0.7);
        let u = unnormalized_trajectory(&c, &[0.25; 3000], &c).unwrap();
        for (n, lt) in u.log_totals.iter().enumerate() {
            assert!((lt - n as f64 * 0.7f64.ln()).abs() <= 1e-10 * n.max(1) as f64);
        }
    }

    #[test]
    fn growth_rate_examples() {
        let c = MutationLaw::constant(0.3).unwrap();
        assert_abs_diff_eq!(growth_rate_h(&c, 1.0).unwrap(), -0.356675, epsilon = 1e-6);
        let z = MutationLaw::constant(0.0).unwrap();
        assert_eq!(growth_rate_h(&z, 1.0).unwrap(), 0.0);
        let u = MutationLaw::uniform(0.0, 0.5).unwrap();
        assert_abs_diff_eq!(growth_rate_h(&u, 0.8).unwrap(), -0.529996, epsilon = 1e-6);
        assert!(growth_rate_h(&u, 0.0).is_err());
    }

    #[test]
    fn zero_mutant_closed_form_matches_direct_iteration() {
        // Iterating with Q = δ_0 by hand: the δ_0 atom is wiped out by selection
        // every generation, so P_n depends only on P_0 and β_n.
        let p0 = m(&[(0.5, 0.5), (1.0, 0.5)]);
        let betas = [0.3, 0.1, 0.6, 0.2];
        let mut p = p0.clone();
        for &b in &betas {
            p = p.size_bias().unwrap().mix(1.0 - b, &dirac(0.0), b);
        }
        let closed = zero_mutant_closed_form(&p0, 4, 0.2).unwrap();
        assert!(closed.tv_distance(&p) <= 1e-14);
        assert_abs_diff_eq!(closed.mass_at(0.0), 0.2, epsilon = 1e-15);
    }

    fn instance() -> impl Strategy<Value = (DiscreteMeasure, DiscreteMeasure, Vec<f64>)> {
        let measure = prop::collection::vec((0.05f64..=1.0, 0.05f64..1.0), 1..8)
            .prop_map(|raw| DiscreteMeasure::canonicalize(raw).unwrap().normalized().unwrap());
        (measure.clone(), measure, prop::collection::vec(0.0f64..0.95, 0..=30))
    }

    proptest! {
        #[test]
        fn expansion_matches_iteration((p0, q, betas) in instance()) {
            let t = forward_trajectory(&p0, &betas, &q).unwrap();
            for n in 0..=betas.len() {
                let e = expansion_oracle(&p0, &betas, &q, n, &t.means).unwrap();
                prop_assert!(e.tv_distance(&t.measures[n]) <= 1e-9);
            }
        }

        #[test]
        fn unnormalized_totals_are_products_of_means((p0, q, betas) in instance()) {
            let t = forward_trajectory(&p0, &betas, &q).unwrap();
            let u = unnormalized_trajectory(&p0, &betas, &q).unwrap();
            let mut acc = 0.0;
            for n in 0..=betas.len() {
                prop_assert!((u.log_totals[n] - acc).abs() <= 1e-10 * n.max(1) as f64);
                acc += t.means[n].ln();
            }
        }

        #[test]
        fn top_fitness_is_preserved((p0, q, betas) in instance()) {
            let t = forward_trajectory(&p0, &betas, &q).unwrap();
            let top = p0.support_sup().unwrap().sup_point.max(q.support_sup().unwrap().sup_point);
            for (n, mu) in t.measures.iter().enumerate().skip(1) {
                if betas[n - 1] > 0.0 {
                    prop_assert_eq!(mu.support_sup().unwrap().sup_point, top);
                }
            }
        }
    }

    #[test]
    fn random_law_trajectories_are_reproducible() {
        let law = MutationLaw::uniform(0.0, 0.6).unwrap();
        let seed = SeedSpec::new(17, 4);
        let q = m(&[(0.2, 0.4), (0.7, 0.6)]);
        let a = forward_final(&dirac(1.0), &law.sample_sequence(seed, 200), &q).unwrap();
        let b = forward_final(&dirac(1.0), &law.sample_sequence(seed, 200), &q).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
