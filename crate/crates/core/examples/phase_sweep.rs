//! Phase diagram in `(mean mutation probability, c)` for uniform laws of
//! width 0.4 and `Q = δ_c`, with the constant-law boundary `b = 1 - c`
//! for comparison.

use kingman::condensation::{classify, CriterionConfig, Verdict};
use kingman::{DiscreteMeasure, MutationLaw, SeedSpec};

fn main() -> kingman::Result<()> {
    let cfg = CriterionConfig { replicas: 8, ..CriterionConfig::default() };
    let cs: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64).collect();
    print!("mean b \\ c ");
    for c in &cs {
        print!("{c:>5.1}");
    }
    println!();
    for i in 0..=8 {
        let mean = 0.2 + 0.075 * i as f64;
        let law = MutationLaw::uniform(mean - 0.2, mean + 0.2)?;
        print!("{mean:>10.3} ");
        for (j, &c) in cs.iter().enumerate() {
            let q = DiscreteMeasure::dirac(c)?;
            let v = classify(&law, &q, 1.0, &cfg, SeedSpec::new(9, (10 * i + j) as u64))?;
            let mark = match v.verdict {
                Verdict::Condensation => 'C',
                Verdict::NoCondensation => '.',
                _ => '?',
            };
            let deterministic = if mean < 1.0 - c { 'c' } else { ' ' };
            print!("{:>4}{mark}", deterministic);
        }
        println!();
    }
    println!("C: condenses under the random law; c: condenses under the constant law with the same mean");
    Ok(())
}
