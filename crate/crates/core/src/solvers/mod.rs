//! Critical-point searches: mountain-pass path deformation, Nehari descent,
//! multiple solutions for odd nonlinearities, and the mass-constrained
//! problem.

mod deflation;
mod mountain_pass;
mod nehari;
mod normalized;
mod seeds;

use serde::{Deserialize, Serialize};

use crate::assembly::GridFunction;
use crate::error::{Error, Result};
use crate::functional::ProblemContext;
use crate::geometry::NodeMask;

pub use deflation::{deflated_newton, deflation_factor, NewtonOutcome};
pub use mountain_pass::mountain_pass;
pub use nehari::{check_geometry, multi_solve, nehari_solve, sign_components, GeometryReport};
pub use normalized::{normalized_multi, normalized_solve};
pub use seeds::{disjoint_bumps, oscillating_seed, torsion_seed};

/// Iteration budgets, step rule and tolerances shared by the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    /// Stopping tolerance on the Cerami (or tangent-gradient) residual.
    pub tol: f64,
    pub path_nodes: usize,
    /// Minimal `B`-distance between distinct solutions and their negatives;
    /// defaults to `1e-3 · max ‖u_i‖`.
    pub separation_tol: Option<f64>,
    pub seed: u64,
    /// Iterates above this norm abort the run.
    pub norm_cap: f64,
    /// Random directions sampled for the sphere infimum.
    pub sphere_directions: usize,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 5000,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            tol: 1e-7,
            path_nodes: 21,
            separation_tol: None,
            seed: 7,
            norm_cap: 1e6,
            sphere_directions: 16,
            max_newton: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("solver: {what}")));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return bad("sufficient_decrease must lie in (0, 1)");
        }
        if self.path_nodes < 11 {
            return bad("path_nodes must be at least 11");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.norm_cap > 0.0) {
            return bad("norm_cap must be positive");
        }
        if matches!(self.separation_tol, Some(s) if !(s > 0.0)) {
            return bad("separation_tol must be positive");
        }
        Ok(())
    }

    /// Backtracking from `initial_step`: the first step `s` with
    /// `phi(s) <= phi0 - c s slope`, or `None` below `1e-12`.
    pub(crate) fn backtrack(&self, phi0: f64, slope: f64, mut phi: impl FnMut(f64) -> Option<f64>) -> Option<(f64, f64)> {
        let mut s = self.initial_step;
        while s >= 1e-12 {
            if let Some(value) = phi(s) {
                if value <= phi0 - self.sufficient_decrease * s * slope {
                    return Some((s, value));
                }
            }
            s *= self.shrink;
        }
        None
    }
}

/// One line of the iterate log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterateRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
    pub step: f64,
}

/// Computable brackets of the mountain-pass level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LevelBracket {
    /// Radius of the sampled sphere.
    pub sphere_radius: Option<f64>,
    /// Smallest sampled energy on that sphere.
    pub sphere_inf: Option<f64>,
    /// Ray level over the `K`-supported subspace.
    pub q_ray_level: Option<f64>,
}

impl LevelBracket {
    /// Whether the available members satisfy `sphere_inf <= level <= q_ray_level`.
    pub fn ordered(&self, level: f64) -> bool {
        let slack = 1e-9 * (1.0 + level.abs());
        self.sphere_inf.is_none_or(|s| s <= level + slack) && self.q_ray_level.is_none_or(|q| level <= q + slack)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionReport {
    #[serde(skip)]
    pub u: GridFunction,
    pub method: &'static str,
    pub energy: f64,
    /// Stopping metric: Cerami residual (restricted to the search subspace
    /// for Nehari runs) or `B₀`-norm of the tangent gradient for
    /// normalized runs.
    pub cerami_residual: f64,
    /// Cerami residual of `𝒥` on the whole space.
    pub full_cerami_residual: f64,
    /// `𝒥'(u)(u)` (or `𝒥₀'(u)(u) + λρ` for normalized runs).
    pub nehari_residual: f64,
    pub norm: f64,
    pub level_bracket: LevelBracket,
    pub multiplier: Option<f64>,
    pub mass: Option<f64>,
    /// Largest relative mass drift over the iterates of a normalized run.
    pub mass_drift: Option<f64>,
    pub stationarity_residual: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// How the starting point was built.
    pub seed: String,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub log: Vec<IterateRecord>,
}

impl SolutionReport {
    pub(crate) fn unconstrained(ctx: &ProblemContext, method: &'static str, u: GridFunction, seed: String) -> Self {
        SolutionReport {
            method,
            energy: ctx.energy(&u),
            cerami_residual: f64::NAN,
            full_cerami_residual: ctx.cerami_residual(&u),
            nehari_residual: ctx.nehari_residual(&u),
            norm: ctx.norm(&u),
            level_bracket: LevelBracket::default(),
            multiplier: None,
            mass: None,
            mass_drift: None,
            stationarity_residual: None,
            iterations: 0,
            converged: false,
            seed,
            diagnostics: Vec::new(),
            log: Vec::new(),
            u,
        }
    }

    /// Attach the sampled sphere infimum, with the solution direction among
    /// the samples.
    pub(crate) fn bracket_with_sphere(&mut self, ctx: &ProblemContext, cfg: &SolverConfig, extra: &[GridFunction]) {
        let mut dirs = ctx.random_directions(cfg.sphere_directions, cfg.seed, &NodeMask::all(ctx.len()));
        dirs.push(self.u.clone());
        dirs.extend(extra.iter().cloned());
        let level = ctx.sphere_level(&dirs, self.norm.max(1e-12));
        self.level_bracket.sphere_radius = Some(level.radius);
        self.level_bracket.sphere_inf = Some(level.infimum);
        if !self.level_bracket.ordered(self.energy) {
            self.diagnostics.push("level bracket out of order".into());
        }
    }
}

/// Minimal separation between distinct solutions.
pub fn separation_tol(ctx: &ProblemContext, cfg: &SolverConfig, solutions: &[GridFunction]) -> f64 {
    cfg.separation_tol
        .unwrap_or_else(|| 1e-3 * solutions.iter().map(|u| ctx.norm(u)).fold(0.0, f64::max))
}

/// `min_j min(‖u - u_j‖, ‖u + u_j‖)` in the `B` norm.
pub fn distance_to_set(ctx: &ProblemContext, u: &GridFunction, others: &[GridFunction]) -> f64 {
    others
        .iter()
        .map(|v| ctx.norm(&(u - v)).min(ctx.norm(&(u + v))))
        .fold(f64::INFINITY, f64::min)
}

/// The unconstrained theorems need `λ >= 0`.
fn require_nonnegative_lambda(ctx: &ProblemContext) -> Result<()> {
    let lambda = ctx.potentials().lambda;
    if lambda < 0.0 {
        return Err(Error::violated("lambda", format!("lambda = {lambda} < 0")));
    }
    Ok(())
}

fn require_odd(ctx: &ProblemContext) -> Result<()> {
    if !ctx.spec().odd {
        return Err(Error::violated("odd", "multiplicity search needs an odd nonlinearity"));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::assembly::{assemble, Potentials};
    use crate::functional::ProblemContext;
    use crate::geometry::{build_grid, k_mask, DomainSpec, RegionK};
    use crate::nonlinearity::NonlinearitySpec;

    pub fn ball(m: usize, spec: NonlinearitySpec, potentials: Potentials, region: RegionK) -> ProblemContext {
        let grid = build_grid(&DomainSpec::ball(1.0, 3).unwrap(), m).unwrap();
        let mask = k_mask(&grid, &region).unwrap();
        ProblemContext::new(assemble(&grid), spec, potentials, mask).unwrap()
    }

    pub fn cubic(m: usize, potentials: Potentials) -> ProblemContext {
        ball(m, NonlinearitySpec::pure_power(1.0, 4.0), potentials, RegionK::Whole)
    }
}
