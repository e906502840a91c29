//! Discrete Hardy constants on the unit ball and the cube.

use hardy_variational::assembly::assemble;
use hardy_variational::geometry::{build_grid, DomainSpec};
use hardy_variational::spectral::{hardy_constant_boundary, hardy_constant_origin};

fn main() -> hardy_variational::Result<()> {
    println!("ball, N = 3 (limits 1/4 and 1/4)");
    for m in [50, 100, 200, 400] {
        let ops = assemble(&build_grid(&DomainSpec::ball(1.0, 3)?, m)?);
        println!("  M = {m:>3}  origin {:.5}  boundary {:.5}", hardy_constant_origin(&ops)?, hardy_constant_boundary(&ops)?);
    }
    println!("cube [-1, 1]^3");
    for m in [8, 10, 12] {
        let ops = assemble(&build_grid(&DomainSpec::cube(1.0)?, m)?);
        println!("  M = {m:>3}  boundary {:.5}", hardy_constant_boundary(&ops)?);
    }
    Ok(())
}
