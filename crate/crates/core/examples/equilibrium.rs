//! Deterministic equilibria for constant mutation probability, across the
//! case split: below a critical `b` mass condenses at the top fitness.

use kingman::kingman::{equilibrium, equilibrium_mean_fitness, log_ratio_diagnostic};
use kingman::DiscreteMeasure;

fn main() -> kingman::Result<()> {
    let q = DiscreteMeasure::canonicalize([(0.2, 0.5), (0.6, 0.5)])?;
    let h = 1.0;
    println!("{:>5}  {:>4}  {:>9}  {:>10}  {:>10}  {:>9}", "b", "case", "theta", "condensate", "mean", "log ratio");
    for b in [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7] {
        let eq = equilibrium(b, &q, h)?;
        let mean = equilibrium_mean_fitness(&eq, b, h);
        let theta = eq.theta.map(|t| format!("{t:.6}")).unwrap_or_else(|| "-".into());
        println!(
            "{b:>5.2}  {:>4?}  {theta:>9}  {:>10.6}  {:>10.6}  {:>9.4}",
            eq.case_tag,
            eq.condensate_mass,
            mean.computed,
            log_ratio_diagnostic(b, &q, h)?,
        );
    }
    Ok(())
}
