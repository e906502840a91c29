//! Energy along rays through Nehari points, and a finite-difference check
//! of the derivative.

use hardy_variational::assembly::{assemble, Potentials};
use hardy_variational::functional::ProblemContext;
use hardy_variational::geometry::{build_grid, k_mask, DomainSpec, NodeMask, RegionK};
use hardy_variational::nonlinearity::NonlinearitySpec;

fn main() -> hardy_variational::Result<()> {
    let grid = build_grid(&DomainSpec::ball(1.0, 3)?, 200)?;
    let k = k_mask(&grid, &RegionK::Annulus { inner: 0.3, outer: 0.6 })?;
    let ctx = ProblemContext::new(
        assemble(&grid),
        NonlinearitySpec::saturating(1.0, 4.0),
        Potentials::new(1.0, 0.1, 0.1),
        k,
    )?;
    let dirs = ctx.random_directions(3, 1, &NodeMask::all(ctx.len()));
    for (n, d) in dirs.iter().enumerate() {
        let d = d / ctx.norm(d);
        let v = &dirs[(n + 1) % dirs.len()];
        let ray = ctx.ray_max(&d)?;
        let u = &d * ray.t_star;
        let worst = (0..=20).map(|j| ctx.ray_inequality(&u, 0.1 * 100f64.powf(j as f64 / 20.0))).fold(f64::MIN, f64::max);
        let h = 1e-5;
        let fd = (ctx.energy(&(&u + v * h)) - ctx.energy(&(&u - v * h))) / (2.0 * h);
        println!(
            "t* = {:.4}, peak {:.4}, max J(tu) - J(u) = {worst:.1e}, J'(u)v = {:.6e} (finite difference {fd:.6e})",
            ray.t_star,
            ray.energy,
            ctx.derivative_along(&u, v)
        );
    }
    Ok(())
}
