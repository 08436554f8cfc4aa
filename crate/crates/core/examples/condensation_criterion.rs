//! A random law whose mean lies on the condensing side of the
//! deterministic threshold, yet does not condense: fluctuations of the
//! mutation probability lower the growth rate of the mass at the top.

use kingman::condensation::{classify, empirical_condensate_probe, CriterionConfig};
use kingman::kingman::equilibrium;
use kingman::{DiscreteMeasure, MutationLaw, SeedSpec};

fn main() -> kingman::Result<()> {
    let q = DiscreteMeasure::dirac(0.5)?;
    let cfg = CriterionConfig::default();
    let seed = SeedSpec::new(5, 0);
    // With constant b the threshold at h = 1 is b = 0.5.
    let random = MutationLaw::discrete(vec![(0.05, 0.5), (0.85, 0.5)])?;
    let constant = MutationLaw::constant(random.mean())?;
    println!("constant b = {}: case {:?}", random.mean(), equilibrium(random.mean(), &q, 1.0)?.case_tag);

    for (name, law) in [("constant", &constant), ("random", &random)] {
        let v = classify(law, &q, 1.0, &cfg, seed)?;
        let e = &v.estimate;
        println!("{name:>8}: {:?}, criterion {:.6} in [{:.6}, {:.6}]", v.verdict, e.point, e.ci_low, e.ci_high);
        let probe = empirical_condensate_probe(law, &q, 1.0, &cfg, seed.fork(2))?;
        println!("          condensate positive in {:.0}% of streams", 100.0 * probe.fraction_positive);
    }
    Ok(())
}
