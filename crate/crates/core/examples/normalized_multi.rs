//! Two normalized solutions on the cube, compared with the discrete
//! eigenvalues in the linear case.

use hardy_variational::assembly::{assemble, Potentials};
use hardy_variational::functional::ProblemContext;
use hardy_variational::geometry::{build_grid, k_mask, DomainSpec, RegionK};
use hardy_variational::nonlinearity::NonlinearitySpec;
use hardy_variational::solvers::{normalized_multi, SolverConfig};
use hardy_variational::spectral::smallest_eigenpairs;

fn main() -> hardy_variational::Result<()> {
    let grid = build_grid(&DomainSpec::cube(1.0)?, 12)?;
    let k = k_mask(&grid, &RegionK::Empty)?;
    let ctx = ProblemContext::new(assemble(&grid), NonlinearitySpec::zero(), Potentials::none(), k)?;
    let reps = normalized_multi(&ctx, &SolverConfig::default(), 1.0, 2)?;
    let eig = smallest_eigenpairs(ctx.ops().stiffness(), ctx.mass(), 4, 1e-10)?;
    for rep in &reps {
        println!("lambda {:+.5} (converged {})", rep.multiplier.unwrap_or(f64::NAN), rep.converged);
    }
    println!("eigenvalues {:.5?}", eig.eigenvalues);
    Ok(())
}
