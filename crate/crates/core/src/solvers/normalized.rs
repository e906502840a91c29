//! Projected gradient flow on the mass sphere `∫u² = ρ`.

use nalgebra::{DMatrix, DVector};

use crate::assembly::GridFunction;
use crate::error::{Error, Result};
use crate::functional::{gn_exponents, ProblemContext};
use crate::geometry::NodeMask;
use crate::linalg::{add_diagonal, csr_from_triplets, mat_vec, solve_general};
use crate::solvers::deflation::deflation_factor;
use crate::solvers::seeds::{disjoint_bumps, torsion_seed};
use crate::solvers::{distance_to_set, require_odd, separation_tol, IterateRecord, SolutionReport, SolverConfig};

fn require_mass_subcritical(ctx: &ProblemContext) -> Result<()> {
    if let Some(p) = ctx.spec().growth_exponent() {
        let gn = gn_exponents(p, ctx.ops().dim());
        if !gn.subcritical {
            return Err(Error::violated(
                "mass-subcritical",
                format!("p = {p} is not below 2 + 4/N = {:.6}", gn.mass_critical),
            ));
        }
    }
    Ok(())
}

fn rescale(ctx: &ProblemContext, u: &GridFunction, rho: f64) -> Result<GridFunction> {
    let m = ctx.mass_of(u);
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Domain("cannot rescale a function of zero mass".into()));
    }
    Ok(u * (rho / m).sqrt())
}

/// `M`-orthonormal basis (scaled to mass 1) of the span of `vectors`.
fn mass_orthonormal(ctx: &ProblemContext, vectors: &[GridFunction]) -> Vec<GridFunction> {
    let mut basis: Vec<GridFunction> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for q in &basis {
            let c = w.component_mul(ctx.mass()).dot(q);
            w -= q * c;
        }
        let m = ctx.mass_of(&w);
        if m > 1e-24 * ctx.mass_of(v).max(1e-300) {
            basis.push(w / m.sqrt());
        }
    }
    basis
}

/// Tangent gradient of `𝒥₀` at `u`, also `M`-orthogonal to `basis`,
/// projected in the `B₀` metric.
fn constrained_gradient(ctx: &ProblemContext, u: &GridFunction, basis: &[GridFunction]) -> GridFunction {
    if basis.is_empty() {
        return ctx.tangent_gradient_j0(u);
    }
    let g = ctx.gradient_j0(u);
    let normals: Vec<GridFunction> = std::iter::once(u).chain(basis).map(|v| v.component_mul(ctx.mass())).collect();
    let riesz: Vec<GridFunction> = normals.iter().map(|n| ctx.riesz_j0(n)).collect();
    let k = normals.len();
    let gram = DMatrix::from_fn(k, k, |i, j| normals[i].dot(&riesz[j]));
    let rhs = DVector::from_iterator(k, normals.iter().map(|n| n.dot(&g)));
    let Some(coef) = gram.lu().solve(&rhs) else {
        return g;
    };
    riesz.iter().zip(coef.iter()).fold(g, |acc, (z, c)| acc - z * *c)
}

/// Backtracked descent of `𝒥₀` on the sphere, orthogonal in `L²` to
/// `basis`. Returns the final iterate, whether the tangent gradient fell
/// below tolerance, and the iteration count.
fn sphere_descent(
    ctx: &ProblemContext,
    cfg: &SolverConfig,
    rho: f64,
    start: &GridFunction,
    basis: &[GridFunction],
    log: &mut Vec<IterateRecord>,
    max_drift: &mut f64,
) -> Result<(GridFunction, bool, usize)> {
    let project = |v: &GridFunction| -> Result<GridFunction> {
        let mut w = v.clone();
        for q in basis {
            let c = w.component_mul(ctx.mass()).dot(q);
            w -= q * c;
        }
        rescale(ctx, &w, rho)
    };
    let mut u = project(start)?;
    let mut ju = ctx.energy_j0(&u);
    for it in 0..cfg.max_iterations {
        *max_drift = max_drift.max((ctx.mass_of(&u) - rho).abs() / rho);
        let g = constrained_gradient(ctx, &u, basis);
        let g2 = ctx.inner_j0(&g, &g).max(0.0);
        let residual = g2.sqrt();
        if residual < cfg.tol {
            log.push(IterateRecord { iteration: it, energy: ju, residual, step: 0.0 });
            return Ok((u, true, it));
        }
        let mut next = None;
        let accepted = cfg.backtrack(ju, g2, |s| {
            let v = project(&(&u - &g * s)).ok()?;
            let jv = ctx.energy_j0(&v);
            next = Some(v);
            Some(jv)
        });
        let Some((step, jv)) = accepted else {
            log.push(IterateRecord { iteration: it, energy: ju, residual, step: 0.0 });
            return Ok((u, false, it));
        };
        log.push(IterateRecord { iteration: it, energy: ju, residual, step });
        u = next.unwrap();
        ju = jv;
    }
    Ok((u, false, cfg.max_iterations))
}

fn normalized_report(ctx: &ProblemContext, u: GridFunction, method: &'static str, seed: String) -> Result<SolutionReport> {
    let lambda = ctx.lagrange_lambda(&u)?;
    let tangent = ctx.tangent_gradient_j0(&u);
    let stationarity = ctx.stationarity_residual(&u, lambda);
    Ok(SolutionReport {
        method,
        energy: ctx.energy_j0(&u),
        cerami_residual: ctx.inner_j0(&tangent, &tangent).max(0.0).sqrt(),
        full_cerami_residual: stationarity,
        nehari_residual: ctx.residual_j0(&u).dot(&u),
        norm: ctx.norm_j0(&u),
        level_bracket: Default::default(),
        multiplier: Some(lambda),
        mass: Some(ctx.mass_of(&u)),
        mass_drift: None,
        stationarity_residual: Some(stationarity),
        iterations: 0,
        converged: false,
        seed,
        diagnostics: Vec::new(),
        log: Vec::new(),
        u,
    })
}

/// Minimize `𝒥₀` on `{∫u² = ρ}` by projected gradient descent.
///
/// Steps follow the tangent gradient in the `B₀` metric with backtracking,
/// then rescale exactly to mass `ρ`. The multiplier is
/// `λ = -𝒥₀'(u)(u)/ρ`.
pub fn normalized_solve(ctx: &ProblemContext, cfg: &SolverConfig, rho: f64, seed: Option<&GridFunction>) -> Result<SolutionReport> {
    cfg.validate()?;
    require_mass_subcritical(ctx)?;
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {rho}")));
    }
    let (start, provenance) = match seed {
        Some(s) => (s.clone(), "user seed".to_string()),
        None => (torsion_seed(ctx, &NodeMask::all(ctx.len()))?, "torsion function".to_string()),
    };
    let mut log = Vec::new();
    let mut drift = 0.0;
    let (u, converged, iterations) = sphere_descent(ctx, cfg, rho, &start, &[], &mut log, &mut drift)?;
    let mut report = normalized_report(ctx, u, "projected_gradient", provenance)?;
    report.converged = converged;
    report.iterations = iterations;
    report.log = log;
    report.mass_drift = Some(drift.max((ctx.mass_of(&report.u) - rho).abs() / rho));
    Ok(report)
}

/// Newton's method on `(u, λ)` for `𝒥₀'(u) + λ M u = 0`, `∫u² = ρ`,
/// deflated against `±found`, with each iterate rescaled to mass `ρ`.
fn augmented_newton(
    ctx: &ProblemContext,
    cfg: &SolverConfig,
    rho: f64,
    start: &GridFunction,
    found: &[GridFunction],
) -> Result<(GridFunction, bool, usize, f64)> {
    let n = ctx.len();
    let mut drift = 0.0f64;
    let apply = |x: &GridFunction| mat_vec(ctx.b0_matrix(), x);
    let stationarity = |v: &GridFunction| -> f64 {
        ctx.lagrange_lambda(v).map_or(f64::INFINITY, |l| ctx.stationarity_residual(v, l))
    };
    let merit = |v: &GridFunction| deflation_factor(&apply, v, found).0 * stationarity(v);
    let mut u = rescale(ctx, start, rho)?;
    for it in 0..cfg.max_newton {
        let lambda = ctx.lagrange_lambda(&u)?;
        drift = drift.max((ctx.mass_of(&u) - rho).abs() / rho);
        if ctx.stationarity_residual(&u, lambda) < cfg.tol {
            return Ok((u, true, it, drift));
        }
        let mu = u.component_mul(ctx.mass());
        let block = add_diagonal(
            ctx.b0_matrix(),
            &(ctx.mass() * lambda - ctx.df_values(&u).component_mul(ctx.mass())),
        );
        let entries = block
            .triplet_iter()
            .map(|(i, j, &v)| (i, j, v))
            .chain(mu.iter().enumerate().flat_map(|(i, &v)| [(i, n, v), (n, i, v)]));
        let bordered = csr_from_triplets(n + 1, entries);
        let r1 = ctx.residual_j0(&u) + &mu * lambda;
        let r2 = 0.5 * (ctx.mass_of(&u) - rho);
        let rhs = DVector::from_iterator(n + 1, r1.iter().copied().chain(std::iter::once(r2)));
        let precond = |x: &DVector<f64>| {
            let head = ctx.riesz_j0(&DVector::from_column_slice(&x.as_slice()[..n]));
            DVector::from_iterator(n + 1, head.iter().copied().chain(std::iter::once(x[n])))
        };
        let Ok(sol) = solve_general(&bordered, &rhs, Some(&precond)) else {
            return Ok((u, false, it, drift));
        };
        let delta = -DVector::from_column_slice(&sol.as_slice()[..n]);
        let (m, gm) = deflation_factor(&apply, &u, found);
        let denom = 1.0 + gm.dot(&delta) / m;
        let step = if denom.abs() > 1e-12 { delta / denom } else { delta };
        let m0 = merit(&u);
        let mut s = 1.0;
        let mut next = rescale(ctx, &(&u + &step * s), rho)?;
        while s > 1e-6 && merit(&next) > (1.0 - 1e-4 * s) * m0 {
            s *= 0.5;
            next = rescale(ctx, &(&u + &step * s), rho)?;
        }
        u = next;
    }
    let lambda = ctx.lagrange_lambda(&u)?;
    let ok = ctx.stationarity_residual(&u, lambda) < cfg.tol;
    drift = drift.max((ctx.mass_of(&u) - rho).abs() / rho);
    Ok((u, ok, cfg.max_newton, drift))
}

/// `count` distinct normalized solutions of an odd, mass-subcritical
/// problem, energies ascending.
///
/// Seeds are alternating sums of bumps with pairwise disjoint supports.
/// Run `j` descends on the sphere in the `L²`-orthogonal complement of the
/// earlier solutions, then a deflated Newton iteration on `(u, λ)` removes
/// the orthogonality constraint.
pub fn normalized_multi(ctx: &ProblemContext, cfg: &SolverConfig, rho: f64, count: usize) -> Result<Vec<SolutionReport>> {
    cfg.validate()?;
    require_odd(ctx)?;
    require_mass_subcritical(ctx)?;
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {rho}")));
    }
    if count == 0 {
        return Err(Error::Precondition("count must be at least 1".into()));
    }
    let bumps: Vec<GridFunction> = disjoint_bumps(ctx, &NodeMask::all(ctx.len()), count)?
        .iter()
        .map(|b| rescale(ctx, b, rho))
        .collect::<Result<_>>()?;
    let mut found: Vec<GridFunction> = Vec::new();
    let mut reports = Vec::new();
    for j in 0..count {
        let seed = bumps
            .iter()
            .take(j + 1)
            .enumerate()
            .fold(DVector::zeros(ctx.len()), |acc, (i, w)| if i % 2 == 0 { acc + w } else { acc - w });
        let provenance = format!("{} alternating disjoint bumps", j + 1);
        let mut log = Vec::new();
        let mut drift = 0.0;
        let basis = mass_orthonormal(ctx, &found);
        let (u, _, descent_its) = sphere_descent(ctx, cfg, rho, &seed, &basis, &mut log, &mut drift)?;
        let (u, converged, newton_its, newton_drift) = augmented_newton(ctx, cfg, rho, &u, &found)?;
        let mut report = normalized_report(ctx, u, "orthogonal_descent+augmented_newton", provenance)?;
        report.converged = converged;
        report.iterations = descent_its + newton_its;
        report.mass_drift = Some(drift.max(newton_drift));
        report.log = log;
        let mut all = found.clone();
        all.push(report.u.clone());
        let gap = distance_to_set(ctx, &report.u, &found);
        if gap <= separation_tol(ctx, cfg, &all) {
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
