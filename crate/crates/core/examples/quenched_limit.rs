//! Backward iteration along one realised stream of mutation probabilities:
//! the quenched limit, its condensate by two routes, and the decreasing
//! diagnostic that bounds the condensate from above.

use kingman::backward::{backward_pass, condensate_mass_routes, decreasing_diagnostic, quenched_limit, StoppingRule};
use kingman::{BetaStream, DiscreteMeasure, MutationLaw, SeedSpec};

fn main() -> kingman::Result<()> {
    let law = MutationLaw::beta(2.0, 8.0)?;
    let q = DiscreteMeasure::canonicalize([(0.1, 0.3), (0.3, 0.4), (0.45, 0.3)])?;
    let h = 1.0;

    let mut stream = BetaStream::new(&law, SeedSpec::new(21, 0));
    let r = quenched_limit(&mut stream, &q, h, StoppingRule::default())?;
    println!("depth used {}, condensate {:.8}, mean fitness {:.6}", r.depth_used, r.condensate_mass, r.mean_fitness);
    for a in r.limit.atoms() {
        println!("  x = {:.3}  w = {:.6}", a.x, a.w);
    }

    let pass = backward_pass(&DiscreteMeasure::dirac(h)?, stream.prefix(r.depth_used)?, &q, h)?;
    let routes = condensate_mass_routes(&pass, &q);
    println!("product route {:.12}, series route {:.12}", routes.product_route, routes.series_route);

    let d = decreasing_diagnostic(&pass);
    for k in [0, 1, 5, 20, pass.depth()] {
        println!("  D_{k:<5} = {:.8}", d[k]);
    }
    Ok(())
}
