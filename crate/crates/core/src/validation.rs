//! Distributional identities of the random model as executable checks.
//!
//! Each statistical check draws two samples of random measures that should
//! agree in law and compares two one-dimensional projections of them, the
//! mean fitness and the mass of one distinguished atom, with two-sample KS
//! tests. Values within [`KS_RESOLUTION`] are tied, so that samples equal
//! up to rounding (as with deterministic laws) give statistic zero.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::backward::{backward_pass, condensate_mass_routes, descend};
use crate::error::{Error, Result};
use crate::forward::{
    check_mutant_law, expansion_oracle, forward_final, forward_step, forward_trajectory,
    unnormalized_trajectory, zero_mutant_closed_form,
};
use crate::law::MutationLaw;
use crate::measure::{DiscreteMeasure, MERGE_TOL};
use crate::seed::SeedSpec;
use crate::stats::{ks_two_sample_with_resolution, KsResult};

pub const KS_RESOLUTION: f64 = 1e-9;
pub const ALPHA: f64 = 0.01;

/// KS results for the two projections of one pair of samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectedKs {
    /// Location of the atom whose mass is the second projection.
    pub atom: f64,
    pub mean_fitness: KsResult,
    pub atom_mass: KsResult,
}

impl ProjectedKs {
    pub fn min_p(&self) -> f64 {
        self.mean_fitness.p_value.min(self.atom_mass.p_value)
    }

    pub fn max_statistic(&self) -> f64 {
        self.mean_fitness.statistic.max(self.atom_mass.statistic)
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.min_p() > alpha
    }
}

fn project(mu: &DiscreteMeasure, atom: f64) -> (f64, f64) {
    (mu.mean(), mu.mass_at(atom))
}

fn compare(atom: f64, a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<ProjectedKs> {
    let split = |s: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { s.iter().copied().unzip() };
    let (a_mean, a_mass) = split(a);
    let (b_mean, b_mass) = split(b);
    Ok(ProjectedKs {
        atom,
        mean_fitness: ks_two_sample_with_resolution(&a_mean, &b_mean, KS_RESOLUTION)?,
        atom_mass: ks_two_sample_with_resolution(&a_mass, &b_mass, KS_RESOLUTION)?,
    })
}

fn replicate<F>(replicas: usize, f: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(u64) -> Result<(f64, f64)> + Sync + Send,
{
    (0..replicas as u64).into_par_iter().map(f).collect()
}

fn top_of(mu: &DiscreteMeasure) -> Result<f64> {
    Ok(mu.support_sup()?.sup_point)
}

fn check_top(q: &DiscreteMeasure, h: f64) -> Result<()> {
    check_mutant_law(q)?;
    let s_q = top_of(q)?;
    if !(h > 0.0 && h <= 1.0) || h < s_q - MERGE_TOL {
        return Err(Error::Domain(format!("top fitness {h} must lie in [S_Q, 1] = [{s_q}, 1]")));
    }
    Ok(())
}

/// Forward `P_n` against backward `P_0^n`, both from `δ_h` on independent
/// streams.
pub fn duality_test(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    n: usize,
    replicas: usize,
    seed: SeedSpec,
) -> Result<ProjectedKs> {
    duality_test_depths(law, q, h, n, n, replicas, seed)
}

/// [`duality_test`] with separate forward and backward depths.
pub fn duality_test_depths(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    n_forward: usize,
    n_backward: usize,
    replicas: usize,
    seed: SeedSpec,
) -> Result<ProjectedKs> {
    check_top(q, h)?;
    let start = DiscreteMeasure::dirac(h)?;
    let fwd = replicate(replicas, |i| {
        let betas = law.sample_sequence(seed.fork(0).stream(i), n_forward);
        Ok(project(&forward_final(&start, &betas, q)?.0, h))
    })?;
    let bwd = replicate(replicas, |i| {
        let betas = law.sample_sequence(seed.fork(1).stream(i), n_backward);
        Ok(project(&descend(&betas, q, h)?.0, h))
    })?;
    compare(h, &fwd, &bwd)
}

/// `ν` against `(1-β) x ν(dx) / ∫ y ν(dy) + β Q` for `ν` a depth-`depth`
/// backward approximation of the quenched limit and a fresh `β`. The two
/// sides use independent copies of `ν`.
pub fn invariance_test(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    replicas: usize,
    depth: usize,
    seed: SeedSpec,
) -> Result<ProjectedKs> {
    check_top(q, h)?;
    let plain = replicate(replicas, |i| {
        let betas = law.sample_sequence(seed.fork(0).stream(i), depth);
        Ok(project(&descend(&betas, q, h)?.0, h))
    })?;
    let stepped = replicate(replicas, |i| {
        let betas = law.sample_sequence(seed.fork(1).stream(i), depth);
        let nu = descend(&betas, q, h)?.0;
        let fresh = law.sample(&mut seed.fork(2).stream(i).rng());
        Ok(project(&forward_step(&nu, fresh, q)?, h))
    })?;
    compare(h, &plain, &stepped)
}

/// Generation `n` from two initial populations on independent streams.
///
/// `p0_a` must top out at `h`. `p0_b` may top out lower, between `S_Q` and
/// `h`; the two laws then differ whenever mass condenses at `h`, which makes
/// a useful negative control.
#[allow(clippy::too_many_arguments)]
pub fn global_stability_test(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    p0_a: &DiscreteMeasure,
    p0_b: &DiscreteMeasure,
    n: usize,
    replicas: usize,
    seed: SeedSpec,
) -> Result<ProjectedKs> {
    check_top(q, h)?;
    let (top_a, top_b) = (top_of(p0_a)?, top_of(p0_b)?);
    if (top_a - h).abs() > MERGE_TOL || top_b > h + MERGE_TOL || top_b < top_of(q)? - MERGE_TOL {
        return Err(Error::Domain(format!(
            "initial populations top out at {top_a} and {top_b}; need {h} and a value in [S_Q, {h}]"
        )));
    }
    let run = |p0: &DiscreteMeasure, tag: u64| {
        replicate(replicas, |i| {
            let betas = law.sample_sequence(seed.fork(tag).stream(i), n);
            Ok(project(&forward_final(p0, &betas, q)?.0, h))
        })
    };
    compare(h, &run(p0_a, 0)?, &run(p0_b, 1)?)
}

/// Mutant law `δ_0`: generation `n` from the closed form against its limit
/// `(1-β) δ_h + β δ_0` with an independent `β`. The atom projected is `0`.
pub fn zero_mutant_test(
    law: &MutationLaw,
    p0: &DiscreteMeasure,
    n: usize,
    replicas: usize,
    seed: SeedSpec,
) -> Result<ProjectedKs> {
    p0.ensure_probability("initial population")?;
    if n == 0 {
        return Err(Error::Usage("the δ_0 check needs n >= 1".into()));
    }
    let h = top_of(p0)?;
    let closed = replicate(replicas, |i| {
        let betas = law.sample_sequence(seed.fork(0).stream(i), n);
        Ok(project(&zero_mutant_closed_form(p0, n as u32, betas[n - 1])?, 0.0))
    })?;
    let limit = replicate(replicas, |i| {
        let beta = law.sample(&mut seed.fork(1).stream(i).rng());
        Ok(((1.0 - beta) * h, beta))
    })?;
    compare(0.0, &closed, &limit)
}

/// Quenched limits at `h = S_Q` approximated at two depths on independent
/// streams.
pub fn uniqueness_test(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    depth_a: usize,
    depth_b: usize,
    replicas: usize,
    seed: SeedSpec,
) -> Result<ProjectedKs> {
    check_mutant_law(q)?;
    let s_q = top_of(q)?;
    let run = |depth: usize, tag: u64| {
        replicate(replicas, |i| {
            let betas = law.sample_sequence(seed.fork(tag).stream(i), depth);
            Ok(project(&descend(&betas, q, s_q)?.0, s_q))
        })
    };
    compare(s_q, &run(depth_a, 0)?, &run(depth_b, 1)?)
}

/// Whether `∫ y u1 >= ∫ y u2 / (1 - eps (h - a))`, allowing a relative
/// rounding slack of `1e-12`.
///
/// Inputs must satisfy `S_{u1} = S_{u2} = h`, `u1 <=_{h-} u2`, `a` in
/// `(0, h)` and `D_{u1}(a) + eps <= D_{u2}(a)`; anything else is a usage
/// error.
pub fn mean_ratio_bound_check(
    u1: &DiscreteMeasure,
    u2: &DiscreteMeasure,
    h: f64,
    a: f64,
    eps: f64,
) -> Result<bool> {
    u1.ensure_probability("u1")?;
    u2.ensure_probability("u2")?;
    let bad = |msg: &str| Err(Error::Usage(format!("mean ratio bound precondition: {msg}")));
    if (top_of(u1)? - h).abs() > MERGE_TOL || (top_of(u2)? - h).abs() > MERGE_TOL {
        return bad("both measures must top out at h");
    }
    if !u1.component_leq(u2, h, true) {
        return bad("u1 must be a component of u2 below h");
    }
    if !(a > 0.0 && a < h) || !(eps >= 0.0) {
        return bad("need 0 < a < h and eps >= 0");
    }
    if u1.cdf(a) + eps > u2.cdf(a) + 1e-12 {
        return bad("D_u1(a) + eps exceeds D_u2(a)");
    }
    let c = 1.0 / (1.0 - eps * (h - a));
    Ok(u1.mean() >= c * u2.mean() * (1.0 - 1e-12))
}

/// A random valid input for [`mean_ratio_bound_check`].
pub fn random_mean_ratio_case<R: Rng>(
    rng: &mut R,
) -> (DiscreteMeasure, DiscreteMeasure, f64, f64, f64) {
    let h = rng.random_range(0.3..=1.0);
    let k = rng.random_range(1..=6);
    let below: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(0.01..0.99) * h, rng.random_range(0.05..1.0)))
        .collect();
    let top_w = rng.random_range(0.05..1.0);
    let u2 = DiscreteMeasure::canonicalize(below.iter().copied().chain([(h, top_w)]))
        .unwrap()
        .normalized()
        .unwrap();
    let mut moved = 0.0;
    let mut u1_raw = Vec::with_capacity(u2.len());
    for atom in u2.atoms().iter().filter(|x| x.x < h) {
        let keep = atom.w * rng.random::<f64>();
        moved += atom.w - keep;
        u1_raw.push((atom.x, keep));
    }
    u1_raw.push((h, u2.mass_at(h) + moved));
    let u1 = DiscreteMeasure::canonicalize(u1_raw).unwrap();
    let lows: Vec<f64> = u2.atoms().iter().map(|x| x.x).filter(|&x| x < h).collect();
    let a = lows[rng.random_range(0..lows.len())];
    let eps = rng.random::<f64>() * (u2.cdf(a) - u1.cdf(a)).max(0.0);
    (u1, u2, h, a, eps)
}

/// One entry of the validation report.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub pass: bool,
    pub statistic: f64,
    pub details: serde_json::Value,
}

/// Runs `test` on `reps` disjoint seeds and passes on a strict majority.
pub fn majority_check<F>(name: &str, reps: usize, seed: SeedSpec, test: F) -> Result<CheckReport>
where
    F: Fn(SeedSpec) -> Result<ProjectedKs>,
{
    let runs = (0..reps as u64)
        .map(|r| test(seed.fork(1000 + r)))
        .collect::<Result<Vec<_>>>()?;
    let passed = runs.iter().filter(|r| r.passes(ALPHA)).count();
    Ok(CheckReport {
        check_name: name.into(),
        pass: 2 * passed > reps,
        statistic: runs.iter().map(|r| r.min_p()).fold(f64::INFINITY, f64::min),
        details: json!({ "alpha": ALPHA, "runs_passed": passed, "runs": runs }),
    })
}

/// Settings of the validation suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuiteSettings {
    pub replicas: usize,
    /// Depth of forward and backward runs in the statistical checks.
    pub n_steps: usize,
    pub repetitions: usize,
    pub fuzz_cases: usize,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        SuiteSettings { replicas: 2000, n_steps: 200, repetitions: 3, fuzz_cases: 10_000 }
    }
}

fn deterministic(name: &str, worst: f64, bound: f64, details: serde_json::Value) -> CheckReport {
    CheckReport { check_name: name.into(), pass: worst <= bound, statistic: worst, details }
}

/// The full property suite on one model instance.
pub fn run_suite(
    law: &MutationLaw,
    q: &DiscreteMeasure,
    h: f64,
    settings: &SuiteSettings,
    seed: SeedSpec,
) -> Result<Vec<CheckReport>> {
    check_top(q, h)?;
    let s_q = top_of(q)?;
    let (n, reps, replicas) = (settings.n_steps, settings.repetitions, settings.replicas);
    let start = DiscreteMeasure::dirac(h)?;
    let mut out = Vec::new();

    let betas = law.sample_sequence(seed.fork(1), n.max(30));
    let traj = forward_trajectory(&start, &betas, q)?;
    let mut worst = 0.0f64;
    for k in 0..=30.min(n) {
        worst = worst.max(expansion_oracle(&start, &betas, q, k, &traj.means)?.tv_distance(&traj.measures[k]));
    }
    out.push(deterministic("expansion_formula", worst, 1e-9, json!({ "max_n": 30.min(n) })));

    let unnorm = unnormalized_trajectory(&start, &betas, q)?;
    let mut acc = 0.0;
    let mut worst = 0.0f64;
    for (k, lt) in unnorm.log_totals.iter().enumerate() {
        worst = worst.max((lt - acc).abs() / k.max(1) as f64);
        acc += traj.means[k].ln();
    }
    out.push(deterministic("unnormalised_identity", worst, 1e-10, json!({ "steps": betas.len() })));

    let depth = n.min(200);
    let pass_betas = law.sample_sequence(seed.fork(2), depth);
    let mut violations = 0usize;
    let mut prev = backward_pass(&start, &pass_betas[..0], q, h)?;
    for k in 1..=depth {
        let next = backward_pass(&start, &pass_betas[..k], q, h)?;
        for j in 0..k {
            let ok = prev.measures[j].component_leq(&next.measures[j], h, true)
                && next.measures[j].mass_at(h) <= prev.measures[j].mass_at(h) + 1e-15;
            violations += usize::from(!ok);
        }
        prev = next;
    }
    out.push(deterministic("backward_monotonicity", violations as f64, 0.0, json!({ "depth": depth })));

    let routes = condensate_mass_routes(&prev, q);
    out.push(deterministic(
        "condensate_routes",
        (routes.product_route - routes.series_route).abs(),
        1e-8,
        json!(routes),
    ));

    out.push(majority_check("duality", reps, seed.fork(10), |s| {
        duality_test(law, q, h, n, replicas, s)
    })?);
    out.push(majority_check("invariance", reps, seed.fork(11), |s| {
        invariance_test(law, q, h, replicas, n, s)
    })?);
    let p0_b = start.mix(0.5, &DiscreteMeasure::dirac(0.5 * s_q)?, 0.5);
    out.push(majority_check("global_stability", reps, seed.fork(12), |s| {
        global_stability_test(law, q, h, &start, &p0_b, n, replicas, s)
    })?);
    let p0_zero = start.mix(0.5, &DiscreteMeasure::dirac(0.5 * h)?, 0.5);
    out.push(majority_check("zero_mutant_limit", reps, seed.fork(13), |s| {
        zero_mutant_test(law, &p0_zero, n, replicas, s)
    })?);
    out.push(majority_check("invariant_uniqueness", reps, seed.fork(14), |s| {
        uniqueness_test(law, q, n / 2, n, replicas, s)
    })?);

    let mut rng = seed.fork(15).rng();
    let mut failures = 0usize;
    for _ in 0..settings.fuzz_cases {
        let (u1, u2, hh, a, eps) = random_mean_ratio_case(&mut rng);
        failures += usize::from(!mean_ratio_bound_check(&u1, &u2, hh, a, eps)?);
    }
    out.push(deterministic(
        "mean_ratio_bound",
        failures as f64,
        0.0,
        json!({ "cases": settings.fuzz_cases }),
    ));
    Ok(out)
}
