//! Deflated Newton iteration for the unconstrained problem.

use nalgebra::DVector;

use crate::assembly::GridFunction;
use crate::functional::ProblemContext;
use crate::solvers::SolverConfig;

/// `m(u) = Π_j (1/‖u - u_j‖² + 1)(1/‖u + u_j‖² + 1)` and its Euclidean
/// gradient, for the metric whose matrix action is `apply`.
pub fn deflation_factor(
    apply: &dyn Fn(&GridFunction) -> GridFunction,
    u: &GridFunction,
    found: &[GridFunction],
) -> (f64, GridFunction) {
    let mut m = 1.0;
    let mut log_grad = DVector::zeros(u.len());
    for v in found {
        for d in [u - v, u + v] {
            let bd = apply(&d);
            let q = bd.dot(&d);
            m *= 1.0 / q + 1.0;
            log_grad -= bd * (2.0 / (q * (1.0 + q)));
        }
    }
    let grad = log_grad * m;
    (m, grad)
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: GridFunction,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Newton's method on `𝒥'(u) = 0`, deflated away from `±found`, damped on
/// `m(u) ‖𝒥'(u)‖`.
pub fn deflated_newton(ctx: &ProblemContext, start: &GridFunction, found: &[GridFunction], cfg: &SolverConfig) -> NewtonOutcome {
    let apply = |x: &GridFunction| crate::linalg::mat_vec(ctx.b_matrix(), x);
    let dual_norm = |r: &GridFunction| ctx.riesz(r).dot(r).max(0.0).sqrt();
    let merit = |v: &GridFunction| deflation_factor(&apply, v, found).0 * dual_norm(&ctx.residual(v));
    let mut u = start.clone();
    let mut residual = ctx.cerami_residual(&u);
    let mut iterations = 0;
    for it in 0..cfg.max_newton {
        iterations = it;
        if residual < cfg.tol {
            return NewtonOutcome { u, iterations: it, residual, converged: true };
        }
        let r = ctx.residual(&u);
        let delta = match ctx.newton_solve(&u, &r) {
            Ok(x) => -x,
            Err(_) => break,
        };
        let (m, gm) = deflation_factor(&apply, &u, found);
        let denom = 1.0 + gm.dot(&delta) / m;
        let step = if denom.abs() > 1e-12 { delta / denom } else { delta };
        let m0 = merit(&u);
        let mut s = 1.0;
        while s > 1e-6 && merit(&(&u + &step * s)) > (1.0 - 1e-4 * s) * m0 {
            s *= 0.5;
        }
        u += step * s;
        iterations = it + 1;
        residual = ctx.cerami_residual(&u);
        if !residual.is_finite() || ctx.norm(&u) > cfg.norm_cap {
            break;
        }
    }
    let converged = residual < cfg.tol;
    NewtonOutcome { u, iterations, residual, converged }
}
