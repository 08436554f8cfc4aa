//! Mutant law `δ_c` with top fitness `h > c`.
//!
//! Every backward generation is then `X δ_c + (1 - X) δ_h`, and one step of
//! the recursion acts on the scalar `X` alone:
//!
//! ```text
//! X_j = (c + (h β_{j+1} - c)(1 - X_{j+1})) / (c + (h - c)(1 - X_{j+1}))
//! ```
//!
//! Condensation at `h` holds exactly when `E[ln h(1-β) / c] > 0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::condensation::{verdict_from_estimate, CondensationVerdict, CriterionEstimate};
use crate::error::{Error, Result};
use crate::law::MutationLaw;
use crate::seed::SeedSpec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoAtomModel {
    pub c: f64,
    pub h: f64,
    pub law: MutationLaw,
}

impl TwoAtomModel {
    pub fn new(c: f64, h: f64, law: MutationLaw) -> Result<Self> {
        if !(c > 0.0 && c < h && h <= 1.0) {
            return Err(Error::Domain(format!("two-atom model needs 0 < c < h <= 1, got c = {c}, h = {h}")));
        }
        Ok(TwoAtomModel { c, h, law })
    }

    fn step(&self, beta: f64, x_next: f64) -> f64 {
        let (c, h) = (self.c, self.h);
        let top = 1.0 - x_next;
        (c + (h * beta - c) * top) / (c + (h - c) * top)
    }
}

/// Mass at `c` of the backward pass over `betas` from the terminal `δ_h`.
pub fn scalar_backward(model: &TwoAtomModel, betas: &[f64]) -> Result<f64> {
    if betas.is_empty() {
        return Err(Error::Usage("scalar backward recursion needs at least one β".into()));
    }
    Ok(betas.iter().rev().fold(0.0, |x, &beta| model.step(beta, x)))
}

/// `X_0` at depth `depth` on `replicas` independent streams of `seed`.
pub fn x_distribution(model: &TwoAtomModel, replicas: usize, depth: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    if replicas == 0 || depth == 0 {
        return Err(Error::Usage("x_distribution needs at least one replica and depth >= 1".into()));
    }
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| scalar_backward(model, &model.law.sample_sequence(seed.stream(i), depth)))
        .collect()
}

/// Exact verdict from the sign of `ln h + E[ln(1-β)] - ln c`.
pub fn two_atom_classify(model: &TwoAtomModel) -> Result<CondensationVerdict> {
    let gr_h = model.h.ln() + model.law.expected_log_one_minus()?;
    let estimate = CriterionEstimate::exact(gr_h, model.c.ln(), "exact two-atom criterion");
    let (verdict, reason) = verdict_from_estimate(&estimate, false);
    Ok(CondensationVerdict { verdict, reason, estimate, boundary_case: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::{backward_pass, quenched_limit, StoppingRule};
    use crate::condensation::{classify, CriterionConfig, Verdict};
    use crate::law::BetaStream;
    use crate::measure::DiscreteMeasure;
    use crate::stats::ks_two_sample;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn model(c: f64, h: f64, law: MutationLaw) -> TwoAtomModel {
        TwoAtomModel::new(c, h, law).unwrap()
    }

    #[test]
    fn scalar_examples() {
        let m = model(0.5, 1.0, MutationLaw::constant(0.3).unwrap());
        assert_abs_diff_eq!(scalar_backward(&m, &[0.3; 5000]).unwrap(), 0.6, epsilon = 1e-12);
        assert!(scalar_backward(&m, &[0.0; 5000]).unwrap() < 1e-12);
        for beta in [0.0, 0.17, 0.5, 0.93] {
            assert_abs_diff_eq!(scalar_backward(&m, &[beta]).unwrap(), beta, epsilon = 1e-15);
        }
        assert!(scalar_backward(&m, &[]).is_err());
        assert!(TwoAtomModel::new(0.6, 0.6, MutationLaw::constant(0.1).unwrap()).is_err());
    }

    #[test]
    fn scalar_matches_measure_engine() {
        let law = MutationLaw::discrete(vec![(0.1, 0.5), (0.5, 0.5)]).unwrap();
        for (i, &(c, h)) in [(0.5, 1.0), (0.3, 0.8), (0.7, 0.75)].iter().enumerate() {
            let m = model(c, h, law.clone());
            let betas = law.sample_sequence(SeedSpec::new(40, i as u64), 300);
            let q = DiscreteMeasure::dirac(c).unwrap();
            let pass = backward_pass(&DiscreteMeasure::dirac(h).unwrap(), &betas, &q, h).unwrap();
            assert!((pass.measures[0].mass_at(c) - scalar_backward(&m, &betas).unwrap()).abs() <= 1e-12);

            let mut stream = BetaStream::new(&law, SeedSpec::new(41, i as u64));
            let r = quenched_limit(&mut stream, &q, h, StoppingRule::default()).unwrap();
            let x = scalar_backward(&m, stream.prefix(r.depth_used).unwrap()).unwrap();
            assert!((r.limit.mass_at(c) - x).abs() <= 1e-10);
        }
    }

    #[test]
    fn distribution_examples() {
        let m = model(0.5, 1.0, MutationLaw::constant(0.3).unwrap());
        let xs = x_distribution(&m, 20, 500, SeedSpec::new(1, 0)).unwrap();
        assert!(xs.iter().all(|&x| x == xs[0]));

        let m = model(0.5, 0.6, MutationLaw::uniform(0.2, 0.6).unwrap());
        assert_eq!(two_atom_classify(&m).unwrap().verdict, Verdict::NoCondensation);
        let xs = x_distribution(&m, 50, 2000, SeedSpec::new(2, 0)).unwrap();
        assert!(xs.iter().all(|&x| x > 1.0 - 1e-6));
    }

    #[test]
    fn independent_samples_agree_in_distribution() {
        let m = model(0.5, 1.0, MutationLaw::discrete(vec![(0.1, 0.5), (0.5, 0.5)]).unwrap());
        let a = x_distribution(&m, 2000, 400, SeedSpec::new(3, 0)).unwrap();
        let b = x_distribution(&m, 2000, 800, SeedSpec::new(4, 0)).unwrap();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
    }

    #[test]
    fn classify_examples() {
        let v = |b: MutationLaw| two_atom_classify(&model(0.5, 1.0, b)).unwrap();
        let c = v(MutationLaw::constant(0.3).unwrap());
        assert_eq!(c.verdict, Verdict::Condensation);
        assert_abs_diff_eq!(c.estimate.point, 1.4f64.ln(), epsilon = 1e-15);
        assert_eq!(v(MutationLaw::constant(0.6).unwrap()).verdict, Verdict::NoCondensation);
        let u = v(MutationLaw::uniform(0.0, 0.5).unwrap());
        assert_eq!(u.verdict, Verdict::Condensation);
        assert_abs_diff_eq!(u.estimate.point, 0.386294, epsilon = 1e-6);
    }

    #[test]
    fn agrees_with_monte_carlo_classification() {
        let cfg = CriterionConfig { replicas: 8, ergodic_depth: 512, ..CriterionConfig::default() };
        let laws = [
            MutationLaw::uniform(0.0, 0.5).unwrap(),
            MutationLaw::discrete(vec![(0.05, 0.5), (0.7, 0.5)]).unwrap(),
            MutationLaw::beta(2.0, 3.0).unwrap(),
        ];
        for law in &laws {
            for &(c, h) in &[(0.3, 1.0), (0.5, 0.9), (0.6, 0.8)] {
                let exact = two_atom_classify(&model(c, h, law.clone())).unwrap();
                let q = DiscreteMeasure::dirac(c).unwrap();
                let mc = classify(law, &q, h, &cfg, SeedSpec::new(9, 0)).unwrap();
                if mc.verdict != Verdict::Inconclusive {
                    assert_eq!(mc.verdict, exact.verdict, "{law} c = {c} h = {h}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn iterates_stay_in_unit_interval(
            c in 0.01f64..0.9,
            gap in 0.01f64..0.5,
            betas in prop::collection::vec(0.0f64..0.999, 1..200),
        ) {
            let h = (c + gap).min(1.0);
            let m = model(c, h, MutationLaw::constant(0.1).unwrap());
            let x = scalar_backward(&m, &betas).unwrap();
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }
}
