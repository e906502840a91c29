//! Several radial solutions of the cubic problem, ordered by energy, with
//! their numbers of nodal domains.

use hardy_variational::assembly::{assemble, Potentials};
use hardy_variational::functional::ProblemContext;
use hardy_variational::geometry::{build_grid, k_mask, DomainSpec, RegionK};
use hardy_variational::nonlinearity::NonlinearitySpec;
use hardy_variational::solvers::{multi_solve, SolverConfig};

fn main() -> hardy_variational::Result<()> {
    let grid = build_grid(&DomainSpec::ball(1.0, 3)?, 200)?;
    let k = k_mask(&grid, &RegionK::Whole)?;
    let ctx = ProblemContext::new(assemble(&grid), NonlinearitySpec::pure_power(1.0, 4.0), Potentials::none(), k)?;
    let reps = multi_solve(&ctx, &SolverConfig::default(), 3)?;
    for (j, rep) in reps.iter().enumerate() {
        let sign_changes = rep.u.as_slice().windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        println!(
            "u_{j}: energy {:>10.4}, sign changes {sign_changes}, u(0) = {:+.4}, {} ({})",
            rep.energy, rep.u[0], rep.method, if rep.converged { "converged" } else { "stalled" }
        );
    }
    Ok(())
}
