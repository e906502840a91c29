//! Minimizing over the Nehari manifold of functions supported in `K`.
//! Shrinking `K` raises the level.

use hardy_variational::assembly::{assemble, Potentials};
use hardy_variational::functional::ProblemContext;
use hardy_variational::geometry::{build_grid, k_mask, DomainSpec, RegionK};
use hardy_variational::nonlinearity::NonlinearitySpec;
use hardy_variational::solvers::{nehari_solve, SolverConfig};

fn main() -> hardy_variational::Result<()> {
    let grid = build_grid(&DomainSpec::ball(1.0, 3)?, 200)?;
    let ops = assemble(&grid);
    for (inner, outer) in [(0.2, 0.8), (0.3, 0.6), (0.4, 0.5)] {
        let k = k_mask(&grid, &RegionK::Annulus { inner, outer })?;
        let ctx = ProblemContext::new(
            ops.clone(),
            NonlinearitySpec::saturating(1.0, 4.0),
            Potentials::new(1.0, 0.1, 0.1),
            k.clone(),
        )?;
        let rep = nehari_solve(&ctx, &SolverConfig::default(), &k, None)?;
        println!(
            "K = ({inner}, {outer}): level {:.4}, Nehari residual {:.1e}, converged {}",
            rep.energy, rep.nehari_residual, rep.converged
        );
    }
    Ok(())
}
