//! Runs the property and statistical checks on one model and prints the
//! report. Pass `--full` for 2000 replicas and depth 200.

use kingman::validation::{run_suite, SuiteSettings};
use kingman::{DiscreteMeasure, MutationLaw, SeedSpec};

fn main() -> kingman::Result<()> {
    let law = MutationLaw::discrete(vec![(0.1, 0.5), (0.5, 0.5)])?;
    let q = DiscreteMeasure::canonicalize([(0.1, 0.3), (0.3, 0.4), (0.4, 0.3)])?;
    let settings = if std::env::args().any(|a| a == "--full") {
        SuiteSettings::default()
    } else {
        SuiteSettings { replicas: 500, n_steps: 100, repetitions: 3, fuzz_cases: 2000 }
    };
    let report = run_suite(&law, &q, 1.0, &settings, SeedSpec::new(0, 0))?;
    for r in &report {
        println!("{:<22} {}  {:.4e}", r.check_name, if r.pass { "pass" } else { "FAIL" }, r.statistic);
    }
    Ok(())
}
