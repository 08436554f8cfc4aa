//! Mutant law `δ_c`: the exact verdict and the law of the mass at `c` in
//! the quenched limit, sampled through the scalar recursion.

use kingman::two_atom::{two_atom_classify, x_distribution, TwoAtomModel};
use kingman::{MutationLaw, SeedSpec};

fn main() -> kingman::Result<()> {
    for b in [(0.2, 0.5), (0.5, 0.7)] {
        let law = MutationLaw::uniform(b.0, b.1)?;
        let model = TwoAtomModel::new(0.55, 1.0, law)?;
        let v = two_atom_classify(&model)?;
        println!("beta ~ U({}, {}): {:?}, criterion {:.6}", b.0, b.1, v.verdict, v.estimate.point);

        let mut xs = x_distribution(&model, 4000, 2000, SeedSpec::new(8, 0))?;
        xs.sort_by(f64::total_cmp);
        for p in [0.05, 0.25, 0.5, 0.75, 0.95] {
            println!("  {:>3.0}% quantile of X: {:.6}", 100.0 * p, xs[(p * xs.len() as f64) as usize]);
        }
    }
    Ok(())
}
