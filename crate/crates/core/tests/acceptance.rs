//! Acceptance criteria, one line each. Exits nonzero if any fails.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use kingman::backward::{backward_pass, condensate_mass_routes, quenched_limit, quenched_sequence, StoppingRule};
use kingman::condensation::{
    classify, criterion_expectation, empirical_condensate_probe, CriterionConfig, CriterionEstimate, Verdict,
};
use kingman::forward::{expansion_oracle, forward_step, forward_trajectory, unnormalized_trajectory};
use kingman::kingman::{equilibrium, solve_theta, EquilibriumCase};
use kingman::two_atom::{scalar_backward, TwoAtomModel};
use kingman::validation::{
    duality_test, global_stability_test, invariance_test, majority_check, mean_ratio_bound_check,
    random_mean_ratio_case, uniqueness_test, zero_mutant_test, ALPHA,
};
use kingman::{BetaStream, DiscreteMeasure, MutationLaw, SeedSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{} [{:.2} s]", o.detail, took.as_secs_f64());
    if let Some(b) = budget {
        if took > b {
            o.pass = false;
            o.detail = format!("{} over budget {:.0} s", o.detail, b.as_secs_f64());
        }
    }
    o
}

fn m(raw: &[(f64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::canonicalize(raw.iter().copied()).unwrap()
}

fn dirac(x: f64) -> DiscreteMeasure {
    DiscreteMeasure::dirac(x).unwrap()
}

/// Random atomic probability measure with `1..=max_atoms` atoms in
/// `[0.01 top, top]`, always including `top`.
fn random_measure(rng: &mut ChaCha8Rng, top: f64, max_atoms: usize) -> DiscreteMeasure {
    let k = rng.random_range(1..=max_atoms);
    let mut raw: Vec<(f64, f64)> =
        (1..k).map(|_| (top * rng.random_range(0.01..1.0), rng.random_range(0.05..1.0))).collect();
    raw.push((top, rng.random_range(0.05..1.0)));
    DiscreteMeasure::canonicalize(raw).unwrap().normalized().unwrap()
}

fn random_law(rng: &mut ChaCha8Rng) -> MutationLaw {
    match rng.random_range(0..4) {
        0 => MutationLaw::constant(rng.random_range(0.02..0.9)).unwrap(),
        1 => {
            let k = rng.random_range(1..=4);
            let raw: Vec<(f64, f64)> =
                (0..k).map(|_| (rng.random_range(0.0..0.9), rng.random_range(0.1..1.0))).collect();
            let total: f64 = raw.iter().map(|a| a.1).sum();
            MutationLaw::discrete(raw.into_iter().map(|(b, p)| (b, p / total)).collect()).unwrap()
        }
        2 => {
            let lo = rng.random_range(0.0..0.5);
            MutationLaw::uniform(lo, lo + rng.random_range(0.05..0.45)).unwrap()
        }
        _ => MutationLaw::beta(rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)).unwrap(),
    }
}

/// Random `(b, Q, h)` with `S_Q <= h`, the top sometimes equal to `h`.
fn kingman_instances(count: usize) -> Vec<(f64, DiscreteMeasure, f64)> {
    let mut rng = SeedSpec::new(101, 0).rng();
    (0..count)
        .map(|_| {
            let b = rng.random_range(0.02..0.98);
            let h = rng.random_range(0.2..=1.0);
            let s_q = if rng.random_bool(0.2) { h } else { h * rng.random_range(0.1..0.999) };
            (b, random_measure(&mut rng, s_q, 16), h)
        })
        .collect()
}

fn ac1() -> Outcome {
    let mut worst = 0.0f64;
    for (b, q, h) in kingman_instances(100) {
        let k = equilibrium(b, &q, h).unwrap().measure;
        worst = worst.max(forward_step(&k, b, &q).unwrap().tv_distance(&k));
    }
    outcome(worst <= 1e-10, format!("max tv {worst:.3e} over 100 instances (tol 1e-10)"))
}

fn ac2() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (b, q, h) in kingman_instances(100) {
        let eq = equilibrium(b, &q, h).unwrap();
        if let Some(theta) = eq.theta {
            let lhs: f64 = q.atoms().iter().map(|a| b * theta * a.w / (theta - (1.0 - b) * a.x)).sum();
            worst = worst.max((lhs - 1.0).abs());
            count += 1;
        }
    }
    // 0.25θ/(θ-0.1) + 0.25θ/(θ-0.4) = 1 reduces to 0.5θ² - 0.375θ + 0.04 = 0.
    let reference = (0.375 + (0.375f64.powi(2) - 4.0 * 0.5 * 0.04).sqrt()) / (2.0 * 0.5);
    let theta = solve_theta(0.5, &m(&[(0.2, 0.5), (0.8, 0.5)])).unwrap();
    let ref_err = (theta - reference).abs();
    let listed = (theta - 0.621221).abs();
    outcome(
        worst <= 1e-12 && ref_err <= 1e-6 && listed <= 1e-6,
        format!("max residual {worst:.3e} on {count} case-One instances; θ = {theta:.9}, quadratic root {reference:.9}"),
    )
}

fn ac3() -> Outcome {
    let (mut one, mut two) = (0.0f64, 0.0f64);
    for (b, q, h) in kingman_instances(100) {
        let eq = equilibrium(b, &q, h).unwrap();
        let mean = eq.measure.mean();
        match eq.case_tag {
            EquilibriumCase::One => one = one.max((mean - eq.theta.unwrap()).abs()),
            EquilibriumCase::Two => two = two.max((mean - (1.0 - b) * h).abs()),
        }
    }
    outcome(one <= 1e-10 && two <= 1e-10, format!("max error case One {one:.3e}, case Two {two:.3e}"))
}

fn ac4() -> Outcome {
    let q = dirac(0.5);
    let target = m(&[(0.5, 0.6), (1.0, 0.4)]);
    let mut p = dirac(1.0);
    for n in 1..=5000 {
        p = forward_step(&p, 0.3, &q).unwrap();
        let tv = p.tv_distance(&target);
        if tv <= 1e-6 {
            return outcome(true, format!("tv {tv:.3e} at n = {n}"));
        }
    }
    outcome(false, format!("tv {:.3e} at n = 5000", p.tv_distance(&target)))
}

/// Random instances `(law, Q, P0, h)` with `S_Q <= h = S_{P0}`.
fn model_instances(seed: u64, count: usize) -> Vec<(MutationLaw, DiscreteMeasure, DiscreteMeasure, f64)> {
    let mut rng = SeedSpec::new(seed, 0).rng();
    (0..count)
        .map(|_| {
            let h: f64 = rng.random_range(0.3..=1.0);
            let s_q = h * rng.random_range(0.2..=1.0);
            let q = random_measure(&mut rng, s_q, 6);
            let p0 = random_measure(&mut rng, h, 4);
            (random_law(&mut rng), q, p0, h)
        })
        .collect()
}

fn ac5() -> Outcome {
    let mut worst = 0.0f64;
    for (i, (law, q, p0, _)) in model_instances(102, 50).into_iter().enumerate() {
        let betas = law.sample_sequence(SeedSpec::new(5, i as u64), 30);
        let t = forward_trajectory(&p0, &betas, &q).unwrap();
        for n in 0..=30 {
            let e = expansion_oracle(&p0, &betas, &q, n, &t.means).unwrap();
            worst = worst.max(e.tv_distance(&t.measures[n]));
        }
    }
    outcome(worst <= 1e-9, format!("max tv {worst:.3e} over 50 instances, n <= 30"))
}

fn ac6() -> Outcome {
    let mut worst = 0.0f64;
    for (i, (law, q, p0, _)) in model_instances(103, 50).into_iter().enumerate() {
        let betas = law.sample_sequence(SeedSpec::new(6, i as u64), 200);
        let t = forward_trajectory(&p0, &betas, &q).unwrap();
        let u = unnormalized_trajectory(&p0, &betas, &q).unwrap();
        let mut acc = 0.0f64;
        for (n, lt) in u.log_totals.iter().enumerate() {
            if n > 0 {
                worst = worst.max((lt - acc).abs() / (n as f64 * acc.abs().max(1.0)));
            }
            acc += t.means[n].ln();
        }
    }
    outcome(worst <= 1e-10, format!("max relative error per step {worst:.3e} over 50 instances, n <= 200"))
}

fn ac7() -> Outcome {
    let (mut violations, mut checked) = (0usize, 0usize);
    for (i, (law, q, _, h)) in model_instances(104, 20).into_iter().enumerate() {
        let betas = law.sample_sequence(SeedSpec::new(7, i as u64), 201);
        let start = dirac(h);
        let mut prev = backward_pass(&start, &betas[..0], &q, h).unwrap();
        for n in 0..200 {
            let next = backward_pass(&start, &betas[..n + 1], &q, h).unwrap();
            for j in 0..=n {
                checked += 1;
                violations += usize::from(!prev.measures[j].component_leq(&next.measures[j], h, true));
            }
            prev = next;
        }
    }
    outcome(violations == 0, format!("{violations} violations in {checked} comparisons"))
}

fn ac8() -> Outcome {
    let (mut route_gap, mut g_residual) = (0.0f64, 0.0f64);
    for (i, (law, q, _, h)) in model_instances(105, 20).into_iter().enumerate() {
        let betas = law.sample_sequence(SeedSpec::new(8, i as u64), 400);
        let pass = backward_pass(&dirac(h), &betas, &q, h).unwrap();
        let r = condensate_mass_routes(&pass, &q);
        route_gap = route_gap.max((r.product_route - r.series_route).abs());

        let mut stream = BetaStream::new(&law, SeedSpec::new(9, i as u64));
        let seq = quenched_sequence(&mut stream, &q, h, 50, 300).unwrap();
        let b = stream.prefix(350).unwrap();
        for j in 1..seq.len() {
            let g = seq[j].condensate_mass * h * (1.0 - b[j - 1]) / seq[j].mean_fitness;
            g_residual = g_residual.max((g - seq[j - 1].condensate_mass).abs());
        }
    }
    outcome(
        route_gap <= 1e-8 && g_residual <= 1e-8,
        format!("max route gap {route_gap:.3e}, max G-recursion residual {g_residual:.3e}"),
    )
}

fn ac9() -> Outcome {
    let mut rng = SeedSpec::new(106, 0).rng();
    let rule = StoppingRule { tol: 1e-10, ..StoppingRule::default() };
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let law = random_law(&mut rng);
        let h: f64 = rng.random_range(0.3..=1.0);
        let c: f64 = h * rng.random_range(0.05..0.95);
        // Near the critical line the pass converges too slowly to compare.
        let criterion = h.ln() + law.expected_log_one_minus().unwrap() - c.ln();
        if criterion.abs() < 0.05 {
            continue;
        }
        let model = TwoAtomModel::new(c, h, law.clone()).unwrap();
        let mut stream = BetaStream::new(&law, SeedSpec::new(10, done));
        let r = quenched_limit(&mut stream, &dirac(c), h, rule).unwrap();
        let x = scalar_backward(&model, stream.prefix(r.depth_used).unwrap()).unwrap();
        worst = worst.max((r.limit.mass_at(c) - x).abs());
        done += 1;
    }
    outcome(worst <= 1e-10, format!("max gap {worst:.3e} over 50 instances"))
}

/// Criterion estimates of the two previous criteria, for the bound check.
type Estimates = Vec<(DiscreteMeasure, f64, CriterionEstimate)>;

fn ac10(estimates: &mut Estimates) -> Outcome {
    let cfg = CriterionConfig::default();
    let (mut agree, mut inconclusive, mut total) = (0, 0, 0);
    let mut mismatches = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            let b = 0.05 + 0.1 * i as f64;
            let c = 0.02 + 0.1 * j as f64;
            // Condensation exactly when ∫ Q(dx) / (1 - x) = 1 / (1 - c) < 1 / b.
            let expected = if 1.0 / (1.0 - c) < 1.0 / b { Verdict::Condensation } else { Verdict::NoCondensation };
            let q = dirac(c);
            let law = MutationLaw::constant(b).unwrap();
            let v = classify(&law, &q, 1.0, &cfg, SeedSpec::new(11, (10 * i + j) as u64)).unwrap();
            total += 1;
            match v.verdict {
                Verdict::Inconclusive => inconclusive += 1,
                got if got == expected => agree += 1,
                got => mismatches.push(format!("(b={b:.2}, c={c:.2}): {got:?}")),
            }
            estimates.push((q, 1.0, v.estimate));
        }
    }
    outcome(
        mismatches.is_empty() && inconclusive == 0,
        format!("{agree}/{total} agree, {inconclusive} inconclusive, mismatches {mismatches:?}"),
    )
}

fn ac11(estimates: &mut Estimates) -> Outcome {
    let law = MutationLaw::discrete(vec![(0.1, 0.5), (0.5, 0.5)]).unwrap();
    let q = dirac(0.5);
    let cfg = CriterionConfig { replicas: 50, ..CriterionConfig::default() };
    let seed = SeedSpec::new(12, 0);
    let expected = 0.5 * 0.9f64.ln() + 0.5 * 0.5f64.ln() - 0.5f64.ln();
    let est = criterion_expectation(&law, &q, 1.0, &cfg, seed).unwrap();
    let probe = empirical_condensate_probe(&law, &q, 1.0, &cfg, seed.fork(2)).unwrap();
    let err = (est.point - expected).abs();
    let pass = err <= 1e-9 && (est.point - 0.293893).abs() <= 1e-6 && probe.fraction_positive == 1.0;
    let detail = format!(
        "point {:.9} (analytic {expected:.9}, error {err:.2e}), probe fraction {} over {} replicas",
        est.point,
        probe.fraction_positive,
        probe.masses.len()
    );
    estimates.push((q, 1.0, est));
    outcome(pass, detail)
}

fn ac12() -> Vec<(String, Outcome)> {
    let law = MutationLaw::discrete(vec![(0.1, 0.5), (0.5, 0.5)]).unwrap();
    let q = m(&[(0.1, 0.3), (0.3, 0.4), (0.4, 0.3)]);
    let h = 1.0;
    let (n, replicas, reps) = (200, 2000, 3);
    let seed = SeedSpec::new(13, 0);
    let p0_a = dirac(h);
    let p0_b = m(&[(0.2, 0.5), (h, 0.5)]);
    let p0_zero = m(&[(0.5, 0.5), (h, 0.5)]);

    let run = |tag: u64, name: &str, test: &dyn Fn(SeedSpec) -> kingman::Result<kingman::validation::ProjectedKs>| {
        let o = timed(Some(Duration::from_secs(120)), || {
            let r = majority_check(name, reps, seed.fork(tag), test).unwrap();
            let runs = r.details["runs_passed"].as_u64().unwrap();
            outcome(r.pass, format!("{runs}/{reps} runs with min p > {ALPHA}, smallest p {:.4}", r.statistic))
        });
        (name.to_string(), o)
    };
    vec![
        run(0, "duality", &|s| duality_test(&law, &q, h, n, replicas, s)),
        run(1, "invariance", &|s| invariance_test(&law, &q, h, replicas, n, s)),
        run(2, "global_stability", &|s| global_stability_test(&law, &q, h, &p0_a, &p0_b, n, replicas, s)),
        run(3, "zero_mutant_limit", &|s| zero_mutant_test(&law, &p0_zero, n, replicas, s)),
        run(4, "invariant_uniqueness", &|s| uniqueness_test(&law, &q, n / 2, n, replicas, s)),
    ]
}

fn ac13() -> Outcome {
    let mut rng = SeedSpec::new(14, 0).rng();
    let mut violations = 0;
    for _ in 0..10_000 {
        let (u1, u2, h, a, eps) = random_mean_ratio_case(&mut rng);
        violations += usize::from(!mean_ratio_bound_check(&u1, &u2, h, a, eps).unwrap());
    }
    outcome(violations == 0, format!("{violations} violations in 10000 cases"))
}

fn ac14(estimates: &Estimates) -> Outcome {
    let batches = CriterionConfig::default().batches as f64;
    let t = StudentsT::new(0.0, 1.0, batches - 1.0).unwrap().inverse_cdf(0.975);
    let mut worst = f64::NEG_INFINITY;
    for (q, h, est) in estimates {
        let sigma = est.halfwidth() / t;
        let s_q = q.support_sup().unwrap().sup_point;
        let mut bound = -q.mean().ln();
        if (*h - s_q).abs() < 1e-12 {
            bound = bound.min(0.0);
        }
        worst = worst.max(est.point - bound - 3.0 * sigma);
    }
    outcome(
        worst <= 0.0,
        format!("max excess over bound + 3σ {worst:.3e} on {} instances", estimates.len()),
    )
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut estimates = Estimates::new();
    let mut results: Vec<(String, Outcome)> = vec![
        ("1 kingman fixed point".into(), timed(secs(5), ac1)),
        ("2 theta residual".into(), timed(None, ac2)),
        ("3 equilibrium mean fitness".into(), timed(None, ac3)),
        ("4 forward convergence".into(), timed(secs(1), ac4)),
        ("5 expansion oracle".into(), timed(None, ac5)),
        ("6 unnormalised identity".into(), timed(None, ac6)),
        ("7 backward monotonicity".into(), timed(None, ac7)),
        ("8 condensate mass routes".into(), timed(None, ac8)),
        ("9 two-atom equivalence".into(), timed(None, ac9)),
        ("10 criterion vs case split".into(), timed(None, || ac10(&mut estimates))),
        ("11 random-law condensation".into(), timed(secs(60), || ac11(&mut estimates))),
    ];
    for (name, o) in ac12() {
        results.push((format!("12 {name}"), o));
    }
    results.push(("13 mean ratio fuzz".into(), timed(secs(10), ac13)));
    results.push(("14 criterion bounds".into(), timed(None, || ac14(&estimates))));

    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] AC{name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
