//! The forward sequence under a random mutation law keeps fluctuating,
//! while the constant law with the same mean settles down.

use kingman::forward::forward_trajectory;
use kingman::{DiscreteMeasure, MutationLaw, SeedSpec};

fn main() -> kingman::Result<()> {
    let q = DiscreteMeasure::canonicalize([(0.2, 0.5), (0.5, 0.5)])?;
    let p0 = DiscreteMeasure::dirac(1.0)?;
    let random = MutationLaw::uniform(0.0, 0.4)?;
    let constant = MutationLaw::constant(random.mean())?;
    let seed = SeedSpec::new(3, 0);

    let a = forward_trajectory(&p0, &random.sample_sequence(seed, 400), &q)?;
    let b = forward_trajectory(&p0, &constant.sample_sequence(seed, 400), &q)?;
    println!("{:>4}  {:>8}  {:>12}  {:>12}  {:>10}", "n", "beta", "mean random", "mean const", "mass at 1");
    for n in (0..=400).step_by(25) {
        let beta = if n == 0 { f64::NAN } else { a.betas_used[n - 1] };
        println!(
            "{n:>4}  {beta:>8.4}  {:>12.6}  {:>12.6}  {:>10.6}",
            a.means[n],
            b.means[n],
            a.measures[n].mass_at(1.0),
        );
    }
    Ok(())
}
