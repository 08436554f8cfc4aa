//! Deciding whether mass condenses at the top fitness `h`.
//!
//! The decision rests on the sign of
//!
//! ```text
//! E[ln h(1-β)] - E[ln ∫ y 𝓘_Q(dy)]
//! ```
//!
//! where `𝓘_Q` is the quenched limit with top fitness `S_Q`. The first term
//! is exact; the second is an ergodic average along one long backward pass,
//! with a batch-means confidence interval and an independent-replica
//! cross-check.

use rayon::prelude::*;
use serde::Serialize;

use crate::backward::{descend, quenched_limit, quenched_sequence, StoppingRule};
use crate::error::{Error, Result};
use crate::forward::{check_mutant_law, growth_rate_h};
use crate::law::{BetaStream, MutationLaw};
use crate::measure::{DiscreteMeasure, MERGE_TOL};
use crate::seed::SeedSpec;
use crate::stats::{batch_means_ci, mean_ci};

/// Monte Carlo settings shared by the estimators in this module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriterionConfig {
    /// Independent streams in the replica cross-check and the probe.
    pub replicas: usize,
    /// Length `J` of the ergodic series.
    pub ergodic_depth: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub rule: StoppingRule,
    /// Condensate masses above this count as positive in the probe.
    pub mass_tol: f64,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        CriterionConfig {
            replicas: 64,
            ergodic_depth: 2048,
            burn_in: 512,
            batches: 32,
            rule: StoppingRule::default(),
            mass_tol: 1e-6,
        }
    }
}

/// Mean of `ln ∫ y 𝓘(dy)` over independent quenched limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplicaCheck {
    pub mean: f64,
    pub halfwidth: f64,
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `E[ln h(1-β)]`, exact or by quadrature.
    pub term_log_h1mb: f64,
    /// Ergodic estimate of `E[ln ∫ y 𝓘(dy)]`.
    pub term_log_meanfit: f64,
    pub samples: usize,
    pub method: String,
    pub replica_check: Option<ReplicaCheck>,
}

impl CriterionEstimate {
    pub fn halfwidth(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// An estimate with no Monte Carlo error.
    pub fn exact(term_log_h1mb: f64, term_log_meanfit: f64, method: &str) -> Self {
        let point = term_log_h1mb - term_log_meanfit;
        CriterionEstimate {
            point,
            ci_low: point,
            ci_high: point,
            term_log_h1mb,
            term_log_meanfit,
            samples: 0,
            method: method.into(),
            replica_check: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Condensation,
    NoCondensation,
    Inconclusive,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CondensationVerdict {
    pub verdict: Verdict,
    pub reason: String,
    pub estimate: CriterionEstimate,
    /// `h` coincides with `S_Q`.
    pub boundary_case: bool,
}

fn check_inputs(q: &DiscreteMeasure, h: f64, replicas: usize) -> Result<f64> {
    check_mutant_law(q)?;
    let s_q = q.support_sup()?.sup_point;
    if !(h <= 1.0) || h < s_q - MERGE_TOL {
        return Err(Error::Domain(format!("top fitness {h} must lie in [S_Q, 1] = [{s_q}, 1]")));
    }
    if replicas < 2 {
        return Err(Error::Usage(format!("need at least 2 replicas, got {replicas}")));
    }
    Ok(s_q)
}

/// `E[ln h(1-β) / ∫ y 𝓘_Q(dy)]` with a 95% confidence interval.
///
/// The ergodic series uses stream 0 of `seed`; the replica cross-check uses
/// streams of `seed.fork(1)`, each a backward pass of the same depth.
pub fn criterion_expectation(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    cfg: &CriterionConfig,
    seed: SeedSpec,
) -> Result<CriterionEstimate> {
    let s_q = check_inputs(q, h, cfg.replicas)?;
    criterion_with_reference(law, q, h, s_q, cfg, seed)
}

/// The criterion with `𝓘_Q` replaced by the quenched limit `𝓘` at `h`
/// itself. When mass condenses at `h` this expectation is zero.
pub fn criterion_at_top(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    cfg: &CriterionConfig,
    seed: SeedSpec,
) -> Result<CriterionEstimate> {
    check_inputs(q, h, cfg.replicas)?;
    criterion_with_reference(law, q, h, h, cfg, seed)
}

fn criterion_with_reference(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    top: f64,
    cfg: &CriterionConfig,
    seed: SeedSpec,
) -> Result<CriterionEstimate> {
    let term_h = growth_rate_h(law, h)?;

    let mut stream = BetaStream::new(law, seed.stream(0));
    let series: Vec<f64> = quenched_sequence(&mut stream, q, top, cfg.ergodic_depth, cfg.burn_in)?
        .iter()
        .map(|r| r.mean_fitness.ln())
        .collect();
    let ci = batch_means_ci(&series, cfg.batches)?;

    // Fixed depth: at `top = S_Q` the condensate weight can decay too slowly
    // for the stopping rule.
    let depth = cfg.ergodic_depth + cfg.burn_in;
    let replica_logs = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|i| {
            let betas = law.sample_sequence(seed.fork(1).stream(i), depth);
            descend(&betas, q, top).map(|(limit, _)| limit.mean().ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    let replica = mean_ci(&replica_logs)?;

    Ok(CriterionEstimate {
        point: term_h - ci.mean,
        ci_low: term_h - ci.high(),
        ci_high: term_h - ci.low(),
        term_log_h1mb: term_h,
        term_log_meanfit: ci.mean,
        samples: series.len(),
        method: format!(
            "ergodic average over one backward pass of depth {} (burn-in {}), {} batch means",
            cfg.ergodic_depth + cfg.burn_in,
            cfg.burn_in,
            ci.batches
        ),
        replica_check: Some(ReplicaCheck {
            mean: replica.mean,
            halfwidth: replica.halfwidth,
            replicas: cfg.replicas,
        }),
    })
}

/// Applies the decision rule to an estimate. At `h > S_Q` the interval must
/// exclude zero either way, with a point mass at zero counting as no
/// condensation; at `h = S_Q` only a strictly negative interval decides.
pub fn verdict_from_estimate(est: &CriterionEstimate, boundary_case: bool) -> (Verdict, String) {
    if boundary_case {
        if est.ci_high < 0.0 {
            (Verdict::NoCondensation, "criterion interval lies below 0 at h = S_Q".into())
        } else {
            (
                Verdict::Inconclusive,
                "at h = S_Q a nonnegative criterion does not decide condensation".into(),
            )
        }
    } else if est.ci_low > 0.0 {
        (Verdict::Condensation, "criterion interval lies above 0".into())
    } else if est.ci_high <= 0.0 {
        (Verdict::NoCondensation, "criterion interval lies at or below 0".into())
    } else {
        (Verdict::Inconclusive, "criterion interval straddles 0".into())
    }
}

/// Condensation verdict at `h`.
pub fn classify(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    cfg: &CriterionConfig,
    seed: SeedSpec,
) -> Result<CondensationVerdict> {
    let estimate = criterion_expectation(law, q, h, cfg, seed)?;
    let s_q = q.support_sup()?.sup_point;
    let boundary_case = (h - s_q).abs() <= MERGE_TOL;
    if q.mass_at(h) > 0.0 {
        return Ok(CondensationVerdict {
            verdict: Verdict::NotApplicable,
            reason: format!("Q carries mass {} at h, condensation is undefined", q.mass_at(h)),
            estimate,
            boundary_case,
        });
    }
    let (verdict, reason) = verdict_from_estimate(&estimate, boundary_case);
    Ok(CondensationVerdict { verdict, reason, estimate, boundary_case })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CondensateProbe {
    pub fraction_positive: f64,
    pub masses: Vec<f64>,
}

/// Condensate masses of quenched limits on `cfg.replicas` independent
/// streams of `seed`, and the fraction above `cfg.mass_tol`.
pub fn empirical_condensate_probe(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    cfg: &CriterionConfig,
    seed: SeedSpec,
) -> Result<CondensateProbe> {
    check_inputs(q, h, 2)?;
    if q.mass_at(h) > 0.0 {
        return Err(Error::Domain("the condensate probe needs Q(h) = 0".into()));
    }
    if cfg.replicas == 0 {
        return Err(Error::Usage("the condensate probe needs at least one replica".into()));
    }
    let masses = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = BetaStream::new(law, seed.stream(i));
            quenched_limit(&mut s, q, h, cfg.rule).map(|r| r.condensate_mass)
        })
        .collect::<Result<Vec<f64>>>()?;
    let positive = masses.iter().filter(|&&g| g > cfg.mass_tol).count();
    Ok(CondensateProbe { fraction_positive: positive as f64 / masses.len() as f64, masses })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthRates {
    pub gr_h: f64,
    pub gr_q: f64,
    pub delta: f64,
}

/// Growth rate of the mass kept at `h` against that of the mutant inflow.
pub fn growth_rate_comparison(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    cfg: &CriterionConfig,
    seed: SeedSpec,
) -> Result<GrowthRates> {
    let est = criterion_expectation(law, q, h, cfg, seed)?;
    Ok(GrowthRates { gr_h: est.term_log_h1mb, gr_q: est.term_log_meanfit, delta: est.point })
}
