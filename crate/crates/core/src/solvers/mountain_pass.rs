//! Mountain-pass search by local deformation of a discrete path.

use crate::assembly::GridFunction;
use crate::error::{Error, Result};
use crate::functional::{golden_section_max, ProblemContext};
use crate::solvers::seeds::torsion_seed;
use crate::solvers::{require_nonnegative_lambda, IterateRecord, SolutionReport, SolverConfig};

/// Endpoint `e` on a `K`-supported ray with `𝒥(e) < 0`, and the ray
/// direction.
fn endpoint(ctx: &ProblemContext) -> Result<(GridFunction, GridFunction)> {
    let q = ctx.k_active();
    if !q.any() {
        return Err(Error::Range("K contains no node, so no K-supported ray exists".into()));
    }
    let seed = torsion_seed(ctx, &q)?;
    let dir = &seed / ctx.norm(&seed);
    let prof = ctx.ray_max(&dir)?;
    let t_end = prof
        .t
        .iter()
        .zip(&prof.values)
        .find(|(t, v)| **t > prof.t_star && **v < 0.0)
        .map(|(t, _)| *t)
        .ok_or_else(|| Error::Range("the energy stays nonnegative along the K-supported ray".into()))?;
    Ok((dir * t_end, seed))
}

/// Maximize `𝒥` on the two path segments adjacent to node `i`.
fn polyline_max(ctx: &ProblemContext, path: &[GridFunction], i: usize) -> GridFunction {
    let point = |s: f64| {
        if s < 0.0 {
            &path[i] + (&path[i - 1] - &path[i]) * (-s)
        } else {
            &path[i] + (&path[i + 1] - &path[i]) * s
        }
    };
    let s = golden_section_max(&|s| ctx.energy(&point(s)), -1.0, 1.0);
    let candidate = point(s);
    if ctx.energy(&candidate) >= ctx.energy(&path[i]) {
        candidate
    } else {
        path[i].clone()
    }
}

/// Mountain-pass critical point between `0` and a negative-energy endpoint.
///
/// Each sweep takes the highest interior node of the path, moves it to the
/// maximum along its two adjacent segments, stops if its Cerami residual is
/// below tolerance, otherwise pushes it downhill along `-∇𝒥` with
/// backtracking and refines the path around it (two midpoints in, the two
/// lowest far nodes out).
pub fn mountain_pass(ctx: &ProblemContext, cfg: &SolverConfig) -> Result<SolutionReport> {
    cfg.validate()?;
    require_nonnegative_lambda(ctx)?;
    let (e, seed) = endpoint(ctx)?;
    let n = cfg.path_nodes;
    let mut path: Vec<GridFunction> = (0..n).map(|k| &e * (k as f64 / (n - 1) as f64)).collect();
    let mut energies: Vec<f64> = path.iter().map(|p| ctx.energy(p)).collect();
    let mut log = Vec::new();
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut top = 1;
    for it in 0..cfg.max_iterations {
        iterations = it + 1;
        top = (1..path.len() - 1).max_by(|&a, &b| energies[a].total_cmp(&energies[b])).unwrap();
        let u = polyline_max(ctx, &path, top);
        energies[top] = ctx.energy(&u);
        path[top] = u;
        let u = &path[top];
        let r = ctx.residual(u);
        let g = ctx.riesz(&r);
        let g2 = g.dot(&r).max(0.0);
        let cerami = (1.0 + ctx.norm(u)) * g2.sqrt();
        let ju = energies[top];
        if cerami < cfg.tol {
            log.push(IterateRecord { iteration: it, energy: ju, residual: cerami, step: 0.0 });
            converged = true;
            break;
        }
        if ctx.norm(u) > cfg.norm_cap {
            diagnostics.push(format!(
                "iterate norm exceeded {:e}; check the non-resonance condition on lambda",
                cfg.norm_cap
            ));
            break;
        }
        let Some((step, jv)) = cfg.backtrack(ju, g2, |s| Some(ctx.energy(&(u - &g * s)))) else {
            diagnostics.push(format!("line search failed at iteration {it}"));
            break;
        };
        log.push(IterateRecord { iteration: it, energy: ju, residual: cerami, step });
        let v = u - &g * step;
        let left = (&path[top - 1] + &v) * 0.5;
        let right = (&v + &path[top + 1]) * 0.5;
        let (jl, jr) = (ctx.energy(&left), ctx.energy(&right));
        path.splice(top..=top, [left, v, right]);
        energies.splice(top..=top, [jl, jv, jr]);
        top += 1;
        for _ in 0..2 {
            let far = (1..path.len() - 1)
                .filter(|&k| k.abs_diff(top) > 2)
                .min_by(|&a, &b| energies[a].total_cmp(&energies[b]));
            if let Some(k) = far {
                path.remove(k);
                energies.remove(k);
                if k < top {
                    top -= 1;
                }
            }
        }
    }
    let u = path[top].clone();
    let mut report = SolutionReport::unconstrained(ctx, "mountain_pass", u, format!("path 0 -> {:.4}·torsion(K)", ctx.norm(&e) / ctx.norm(&seed)));
    report.cerami_residual = report.full_cerami_residual;
    report.converged = converged && report.cerami_residual < cfg.tol;
    report.iterations = iterations;
    report.log = log;
    report.diagnostics = diagnostics;
    report.level_bracket.q_ray_level = Some(ctx.ray_max(&(&seed / ctx.norm(&seed)))?.energy);
    report.bracket_with_sphere(ctx, cfg, &[seed]);
    Ok(report)
}
