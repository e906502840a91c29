//! Lowest eigenvalues of the singular operator on the complement of `K`
//! and the resulting verdict on the non-resonance condition.

use hardy_variational::assembly::assemble;
use hardy_variational::geometry::{build_grid, k_mask, DomainSpec, RegionK};
use hardy_variational::spectral::{check_condition_a, spectrum_a};

fn main() -> hardy_variational::Result<()> {
    let ops = assemble(&build_grid(&DomainSpec::ball(1.0, 3)?, 200)?);
    let k = k_mask(ops.grid(), &RegionK::Annulus { inner: 0.3, outer: 0.6 })?;
    let outside = ops.restrict_to_complement(&k)?;
    let (mu, nu) = (0.1, 0.1);

    for theta in [0.5, 20.0, 80.0] {
        let rep = spectrum_a(&outside, mu, nu, &vec![theta; outside.len()], 4)?;
        println!("theta = {theta:>4}: eigenvalues {:.4?}", rep.eigenvalues);
        for lambda in [1.0, -rep.eigenvalues[0]] {
            match check_condition_a(lambda, &rep, None) {
                Ok(a) => println!("    lambda = {lambda:>9.4}: margin {:.3e}, satisfied {}", a.margin, a.satisfied),
                Err(e) => println!("    lambda = {lambda:>9.4}: {e}"),
            }
        }
    }
    Ok(())
}
