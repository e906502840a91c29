//! Sampled checks of the growth and sign conditions for several
//! nonlinearities, together with the Hardy margin.

use hardy_variational::assembly::assemble;
use hardy_variational::geometry::{build_grid, check_condition_n, k_mask, DomainSpec, RegionK};
use hardy_variational::nonlinearity::{NonlinearitySpec, SamplePlan};

fn main() -> hardy_variational::Result<()> {
    let grid = build_grid(&DomainSpec::ball(1.0, 3)?, 100)?;
    let k = k_mask(&grid, &RegionK::Annulus { inner: 0.3, outer: 0.6 })?;
    let _ = assemble(&grid);

    for (mu, nu) in [(0.1, 0.1), (0.3, 0.0)] {
        match check_condition_n(mu, nu, 3) {
            Ok(m) => println!("mu = {mu}, nu = {nu}: Hardy margin {m:.4}"),
            Err(e) => println!("mu = {mu}, nu = {nu}: {e}"),
        }
    }

    let specs = [
        ("saturating, p = 4", NonlinearitySpec::saturating(1.0, 4.0)),
        ("saturating, p = 6", NonlinearitySpec::saturating(1.0, 6.0)),
        ("pure power, p = 4", NonlinearitySpec::pure_power(1.0, 4.0)),
    ];
    for (name, spec) in specs {
        let rep = spec.verify_conditions(&k, &SamplePlan::default());
        println!("{name}");
        for c in &rep.checks {
            println!("  {:<6} {:<5} {}", c.name, c.passed, c.detail);
        }
    }
    Ok(())
}
