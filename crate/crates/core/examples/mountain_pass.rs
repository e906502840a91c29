//! Mountain-pass critical point for the default problem on the unit ball.

use hardy_variational::assembly::{assemble, Potentials};
use hardy_variational::functional::ProblemContext;
use hardy_variational::geometry::{build_grid, k_mask, DomainSpec, RegionK};
use hardy_variational::nonlinearity::NonlinearitySpec;
use hardy_variational::solvers::{mountain_pass, SolverConfig};

fn main() -> hardy_variational::Result<()> {
    let grid = build_grid(&DomainSpec::ball(1.0, 3)?, 200)?;
    let k = k_mask(&grid, &RegionK::Annulus { inner: 0.3, outer: 0.6 })?;
    let ctx = ProblemContext::new(
        assemble(&grid),
        NonlinearitySpec::saturating(1.0, 4.0),
        Potentials::new(1.0, 0.1, 0.1),
        k,
    )?;
    let rep = mountain_pass(&ctx, &SolverConfig::default())?;
    println!("energy          {:.6}", rep.energy);
    println!("Cerami residual {:.2e}", rep.cerami_residual);
    println!("level bracket   {:?}", rep.level_bracket);
    println!("converged       {} after {} iterations", rep.converged, rep.iterations);

    let r = ctx.ops().grid().dist_origin();
    println!("profile:");
    for (j, &i) in ctx.ops().nodes().iter().enumerate().step_by(20) {
        println!("  r = {:.3}  u = {:+.5}", r[i], rep.u[j]);
    }
    Ok(())
}
