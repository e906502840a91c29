//! Solutions with prescribed L2 mass. Without a nonlinearity the
//! multiplier is minus the first eigenvalue.

use hardy_variational::assembly::{assemble, Potentials};
use hardy_variational::functional::ProblemContext;
use hardy_variational::geometry::{build_grid, k_mask, DomainSpec, RegionK};
use hardy_variational::nonlinearity::NonlinearitySpec;
use hardy_variational::solvers::{normalized_solve, SolverConfig};

fn main() -> hardy_variational::Result<()> {
    let grid = build_grid(&DomainSpec::ball(1.0, 3)?, 200)?;
    let ops = assemble(&grid);
    let cases = [
        ("linear", NonlinearitySpec::zero(), RegionK::Empty, Potentials::none()),
        (
            "cubic in K",
            NonlinearitySpec::saturating(1.0, 3.0),
            RegionK::Annulus { inner: 0.3, outer: 0.6 },
            Potentials::new(0.0, 0.1, 0.1),
        ),
    ];
    for (name, spec, region, pot) in cases {
        let ctx = ProblemContext::new(ops.clone(), spec, pot, k_mask(&grid, &region)?)?;
        for rho in [0.5, 1.0, 2.0] {
            let rep = normalized_solve(&ctx, &SolverConfig::default(), rho, None)?;
            println!(
                "{name:<10} rho = {rho}: lambda {:+.5}, energy {:+.5}, mass drift {:.1e}",
                rep.multiplier.unwrap_or(f64::NAN),
                rep.energy,
                rep.mass_drift.unwrap_or(f64::NAN)
            );
        }
    }
    println!("-pi^2 = {:.5}", -std::f64::consts::PI.powi(2));
    Ok(())
}
