//! Descent on the Nehari set, and multiple solutions for odd
//! nonlinearities.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::GridFunction;
use crate::error::{Error, Result};
use crate::functional::{ProblemContext, Subspace};
use crate::geometry::NodeMask;
use crate::solvers::deflation::deflated_newton;
use crate::solvers::seeds::{disjoint_bumps, oscillating_seed, torsion_seed};
use crate::solvers::{
    distance_to_set, require_nonnegative_lambda, require_odd, separation_tol, IterateRecord, SolutionReport, SolverConfig,
};

/// `t* u/‖u‖`, the maximizer of `𝒥` on the ray through `u`.
fn ray_project(ctx: &ProblemContext, u: &GridFunction) -> Result<GridFunction> {
    let n = ctx.norm(u);
    if !(n > 0.0) {
        return Err(Error::Precondition("ray through the zero function".into()));
    }
    let dir = u / n;
    let prof = ctx.ray_max(&dir)?;
    Ok(dir * prof.t_star)
}

/// Relative Cerami residual below which descent hands over to Newton.
const NEWTON_SWITCH: f64 = 1e-6;

/// Newton's method for `𝒥` restricted to `sub`, started at a descent
/// iterate. Accepted only if it converges without leaving the energy level
/// of the start, so it cannot jump to a different critical point.
fn subspace_newton(
    ctx: &ProblemContext,
    sub: &Subspace,
    start: &GridFunction,
    cfg: &SolverConfig,
) -> Option<(GridFunction, usize, f64)> {
    let j0 = ctx.energy(start);
    let mut u = start.clone();
    for it in 0..cfg.max_newton {
        let res = ctx.cerami_residual_in(sub, &u);
        if !res.is_finite() || ctx.norm(&u) > cfg.norm_cap {
            return None;
        }
        if res < cfg.tol {
            let close = (ctx.energy(&u) - j0).abs() <= 1e-6 * (1.0 + j0.abs());
            return close.then_some((u, it, res));
        }
        let step = ctx.newton_solve_in(sub, &u, &ctx.residual(&u)).ok()?;
        let mut s = 1.0;
        while s > 1e-6 && ctx.cerami_residual_in(sub, &(&u - &step * s)) > (1.0 - 1e-4 * s) * res {
            s *= 0.5;
        }
        u -= step * s;
    }
    None
}

/// Minimize `𝒥` over the Nehari set of the coordinate subspace `q_mask`
/// (active numbering).
///
/// Alternates a backtracked step along the subspace gradient with a
/// rescaling to the ray maximizer. The stopping metric is the Cerami
/// residual of `𝒥` restricted to the subspace; when `q_mask` flags every
/// node it is the full residual and the result is a critical point.
pub fn nehari_solve(
    ctx: &ProblemContext,
    cfg: &SolverConfig,
    q_mask: &NodeMask,
    seed: Option<&GridFunction>,
) -> Result<SolutionReport> {
    cfg.validate()?;
    require_nonnegative_lambda(ctx)?;
    let sub = ctx.subspace(q_mask)?;
    let (start, provenance) = match seed {
        Some(s) => (s.clone(), "user seed".to_string()),
        None => (torsion_seed(ctx, q_mask)?, "torsion function of the subspace".to_string()),
    };
    if !sub.contains(&start) {
        return Err(Error::Precondition("the seed is not supported in the search subspace".into()));
    }
    let mut u = ray_project(ctx, &start)?;
    let mut ju = ctx.energy(&u);
    let mut log = Vec::new();
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut cerami = f64::INFINITY;
    let mut iterations = 0;
    let mut tried_newton = false;
    for it in 0..cfg.max_iterations {
        iterations = it;
        let r = ctx.residual(&u);
        let g = ctx.riesz_in(&sub, &r);
        let g2 = g.dot(&r).max(0.0);
        cerami = (1.0 + ctx.norm(&u)) * g2.sqrt();
        if cerami < cfg.tol {
            log.push(IterateRecord { iteration: it, energy: ju, residual: cerami, step: 0.0 });
            converged = true;
            break;
        }
        if !tried_newton && cerami < NEWTON_SWITCH * (1.0 + ju.abs()) {
            tried_newton = true;
            if let Some((v, steps, res)) = subspace_newton(ctx, &sub, &u, cfg) {
                log.push(IterateRecord { iteration: it, energy: ju, residual: cerami, step: 0.0 });
                diagnostics.push(format!("finished by {steps} Newton steps"));
                u = v;
                iterations = it + steps;
                cerami = res;
                converged = true;
                break;
            }
        }
        if ctx.norm(&u) > cfg.norm_cap {
            diagnostics.push(format!(
                "iterate norm exceeded {:e}; check the non-resonance condition on lambda",
                cfg.norm_cap
            ));
            break;
        }
        let mut next = None;
        let accepted = cfg.backtrack(ju, g2, |s| {
            let v = ray_project(ctx, &(&u - &g * s)).ok()?;
            let jv = ctx.energy(&v);
            next = Some(v);
            Some(jv)
        });
        let Some((step, jv)) = accepted else {
            diagnostics.push(format!("line search failed at iteration {it}"));
            break;
        };
        log.push(IterateRecord { iteration: it, energy: ju, residual: cerami, step });
        u = next.unwrap();
        ju = jv;
        iterations = it + 1;
    }
    let whole = q_mask.count() == ctx.len();
    if !converged {
        if let Some((v, steps, res)) = subspace_newton(ctx, &sub, &u, cfg) {
            diagnostics.push(format!("finished by {steps} Newton steps"));
            u = v;
            iterations += steps;
            converged = true;
            cerami = res;
        }
    }
    let mut report = SolutionReport::unconstrained(ctx, "nehari", u, provenance);
    report.cerami_residual = if converged { cerami } else { ctx.cerami_residual_in(&sub, &report.u) };
    report.converged = converged;
    report.iterations = iterations;
    report.log = log;
    report.diagnostics = diagnostics;
    if q_mask == &ctx.k_active() {
        report.level_bracket.q_ray_level = Some(report.energy);
    } else if whole {
        let k = ctx.k_active();
        if k.any() {
            let seed = torsion_seed(ctx, &k)?;
            report.level_bracket.q_ray_level = Some(ctx.ray_max(&(&seed / ctx.norm(&seed)))?.energy);
        }
    }
    report.bracket_with_sphere(ctx, cfg, &[start]);
    Ok(report)
}

/// Connected components of `{u > 0}` and `{u < 0}` on the stencil graph.
pub fn sign_components(adjacency: &[Vec<usize>], u: &GridFunction) -> Vec<Vec<usize>> {
    let sign = |i: usize| u[i].partial_cmp(&0.0).map_or(0, |o| o as i8);
    let mut seen = vec![false; u.len()];
    let mut components = Vec::new();
    for start in 0..u.len() {
        if seen[start] || sign(start) == 0 {
            continue;
        }
        let s = sign(start);
        let mut stack = vec![start];
        let mut comp = Vec::new();
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for &j in &adjacency[i] {
                if !seen[j] && sign(j) == s {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Keep the `parts` sign components of `u` with the largest norm and scale
/// each to its own ray maximizer; the rest is dropped. Returns the
/// projection and the number of components that had a ray maximizer.
fn nodal_project(ctx: &ProblemContext, adjacency: &[Vec<usize>], u: &GridFunction, parts: usize) -> (GridFunction, usize) {
    let mut pieces: Vec<(f64, GridFunction)> = sign_components(adjacency, u)
        .into_iter()
        .map(|comp| {
            let mut part = DVector::zeros(u.len());
            for &i in &comp {
                part[i] = u[i];
            }
            (ctx.norm(&part), part)
        })
        .collect();
    pieces.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = DVector::zeros(u.len());
    let mut kept = 0;
    for (_, part) in pieces.into_iter().take(parts) {
        if let Ok(p) = ray_project(ctx, &part) {
            out += p;
            kept += 1;
        }
    }
    (out, kept)
}

/// Descent on the nodal Nehari set with a fixed number of sign components,
/// stepping along the gradient within `sub`.
fn nodal_descent(
    ctx: &ProblemContext,
    cfg: &SolverConfig,
    sub: &Subspace,
    seed: &GridFunction,
    parts: usize,
    log: &mut Vec<IterateRecord>,
) -> Result<GridFunction> {
    let adjacency = ctx.ops().stiffness_form().neighbors();
    let (mut u, kept) = nodal_project(ctx, &adjacency, seed, parts);
    if kept != parts {
        return Err(Error::Range(format!("seed has {kept} usable sign components, expected {parts}")));
    }
    let mut ju = ctx.energy(&u);
    for it in 0..cfg.max_iterations.min(2000) {
        let r = ctx.residual(&u);
        let g = ctx.riesz_in(sub, &r);
        let g2 = g.dot(&r).max(0.0);
        let cerami = (1.0 + ctx.norm(&u)) * g2.sqrt();
        if cerami < NEWTON_SWITCH * (1.0 + ju.abs()) {
            break;
        }
        let mut next = None;
        let mut trial = |s: f64| {
            let (v, k) = nodal_project(ctx, &adjacency, &(&u - &g * s), parts);
            if k != parts || sign_components(&adjacency, &v).len() != parts {
                return None;
            }
            let jv = ctx.energy(&v);
            next = Some(v);
            Some(jv)
        };
        // the projection bends the path, so fall back to plain decrease
        let accepted = cfg.backtrack(ju, g2, &mut trial).or_else(|| cfg.backtrack(ju, 0.0, &mut trial));
        let Some((step, jv)) = accepted else { break };
        log.push(IterateRecord { iteration: log.len(), energy: ju, residual: cerami, step });
        let decrease = ju - jv;
        u = next.unwrap();
        ju = jv;
        if decrease <= 1e-13 * (1.0 + ju.abs()) && it > 10 {
            break;
        }
    }
    Ok(u)
}

/// Multiple of the ray maximizer at which the far energy is sampled.
const FAR_FACTOR: f64 = 10.0;

/// Sampled checks of the variational geometry used by the multiplicity
/// argument.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    /// Radius and sampled infimum of `𝒥` on a small sphere.
    pub sphere_radius: f64,
    pub sphere_inf: f64,
    /// Every `K`-supported sample ray has an interior maximum.
    pub rays_peak: bool,
    /// Largest value of the ray inequality at the sampled Nehari points.
    pub ray_inequality_max: f64,
    /// Largest energy at `FAR_FACTOR` times the ray maximizer, over
    /// sampled rays in the span of the seeds.
    pub far_energy_max: f64,
}

impl GeometryReport {
    pub fn holds(&self) -> bool {
        self.sphere_inf > 0.0 && self.rays_peak && self.ray_inequality_max <= 1e-10 && self.far_energy_max < 0.0
    }
}

/// Check positivity on a small sphere, peaked rays in `K`, the ray
/// inequality, and negativity far out on the span of `dim_span` disjoint
/// `K`-supported bumps.
pub fn check_geometry(ctx: &ProblemContext, cfg: &SolverConfig, dim_span: usize) -> Result<GeometryReport> {
    let k = ctx.k_active();
    if !k.any() {
        return Err(Error::Range("K contains no node".into()));
    }
    let bumps = disjoint_bumps(ctx, &k, dim_span.max(1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples: Vec<GridFunction> = bumps.clone();
    for _ in 0..8 {
        let combo = bumps
            .iter()
            .fold(DVector::zeros(ctx.len()), |acc, b| acc + b * (rng.random::<f64>() * 2.0 - 1.0));
        if ctx.norm(&combo) > 0.0 {
            samples.push(combo);
        }
    }
    let mut rays_peak = true;
    let mut ray_inequality_max = f64::NEG_INFINITY;
    let mut far_energy_max = f64::NEG_INFINITY;
    let mut nehari_norm = 0.0f64;
    for s in &samples {
        let dir = s / ctx.norm(s);
        match ctx.ray_max(&dir) {
            Ok(prof) => {
                let v = &dir * prof.t_star;
                nehari_norm = nehari_norm.max(prof.t_star);
                for j in 0..61 {
                    let t = 0.1 * 100f64.powf(j as f64 / 60.0);
                    ray_inequality_max = ray_inequality_max.max(ctx.ray_inequality(&v, t));
                }
                far_energy_max = far_energy_max.max(ctx.energy(&(&dir * (FAR_FACTOR * prof.t_star))));
            }
            Err(_) => rays_peak = false,
        }
    }
    let mut dirs = ctx.random_directions(cfg.sphere_directions, cfg.seed, &NodeMask::all(ctx.len()));
    dirs.extend(samples);
    let level = ctx.sphere_level(&dirs, nehari_norm.max(1e-6));
    Ok(GeometryReport {
        sphere_radius: level.radius,
        sphere_inf: level.infimum,
        rays_peak,
        ray_inequality_max,
        far_energy_max,
    })
}

/// `count` distinct solutions of an odd problem, energies ascending.
///
/// The first is the Nehari ground state on the whole space. Solution `j`
/// starts from `j + 1` alternating `K`-supported bumps, descends on the set
/// of functions whose `j + 1` sign components each lie on their own Nehari
/// ray (first inside the `K`-supported subspace, then on the whole space),
/// and is polished by Newton's method deflated against the earlier
/// solutions and their negatives. A run that does not converge, or lands
/// within the separation tolerance of an earlier solution, is kept with
/// `converged = false` and a diagnostic.
pub fn multi_solve(ctx: &ProblemContext, cfg: &SolverConfig, count: usize) -> Result<Vec<SolutionReport>> {
    cfg.validate()?;
    require_odd(ctx)?;
    require_nonnegative_lambda(ctx)?;
    if count == 0 {
        return Err(Error::Precondition("count must be at least 1".into()));
    }
    let geometry = check_geometry(ctx, cfg, count)?;
    if !geometry.holds() {
        return Err(Error::violated("geometry", format!("sampled variational geometry fails: {geometry:?}")));
    }
    let k = ctx.k_active();
    let whole = ctx.subspace(&NodeMask::all(ctx.len()))?;
    let mut found: Vec<GridFunction> = Vec::new();
    let mut reports = Vec::new();
    for j in 0..count {
        let mut report = if j == 0 {
            nehari_solve(ctx, cfg, &NodeMask::all(ctx.len()), None)?
        } else {
            let seed = oscillating_seed(ctx, &k, j)?;
            let mut log = Vec::new();
            let staged = ctx
                .subspace(&k)
                .and_then(|sub_k| nodal_descent(ctx, cfg, &sub_k, &seed, j + 1, &mut log))
                .and_then(|v| nodal_descent(ctx, cfg, &whole, &v, j + 1, &mut log));
            match staged {
                Ok(start) => {
                    let newton = deflated_newton(ctx, &start, &found, cfg);
                    let mut rep = SolutionReport::unconstrained(
                        ctx,
                        "nodal_nehari+deflated_newton",
                        newton.u,
                        format!("{} alternating bumps in K", j + 1),
                    );
                    rep.cerami_residual = rep.full_cerami_residual;
                    rep.converged = newton.converged;
                    rep.iterations = log.len() + newton.iterations;
                    rep.log = log;
                    if !newton.converged {
                        rep.diagnostics.push(format!("Newton polish stalled at residual {:.3e}", newton.residual));
                    }
                    rep.bracket_with_sphere(ctx, cfg, &[seed]);
                    rep
                }
                Err(e) => {
                    let mut rep = SolutionReport::unconstrained(ctx, "nodal_nehari", seed, format!("{} alternating bumps in K", j + 1));
                    rep.cerami_residual = rep.full_cerami_residual;
                    rep.diagnostics.push(format!("nodal descent failed: {e}"));
                    rep
                }
            }
        };
        let mut all: Vec<GridFunction> = found.clone();
        all.push(report.u.clone());
        let sep = separation_tol(ctx, cfg, &all);
        let gap = distance_to_set(ctx, &report.u, &found);
        if gap <= sep {
            report.converged = false;
            report.diagnostics.push(format!("coincides with an earlier solution (distance {gap:.3e})"));
        }
        if report.converged {
            found.push(report.u.clone());
        }
        reports.push(report);
    }
    reports.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(reports)
}
