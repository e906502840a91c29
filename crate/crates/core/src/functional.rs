//! Energy functionals, their Riesz gradients, Nehari and Cerami residuals,
//! ray profiles and the quantities of the mass-constrained problem.

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{GridFunction, OperatorSet, Potentials};
use crate::error::{Error, Result};
use crate::geometry::{check_condition_n, NodeMask};
use crate::linalg::{add_diagonal, mat_vec, random_vector, solve_general, weighted_dot, SpdSolver};
use crate::nonlinearity::{NodeLaw, NonlinearitySpec};

/// Log-spaced samples of a ray scan.
pub const RAY_SAMPLES: usize = 61;
pub const RAY_RANGE: (f64, f64) = (1e-3, 1e3);

/// A ray plateau narrower than this fraction of `t*` is treated as a point.
const PLATEAU_WIDTH: f64 = 1e-3;

/// Everything needed to evaluate the functionals of one problem.
#[derive(Debug)]
pub struct ProblemContext {
    ops: OperatorSet,
    spec: NonlinearitySpec,
    potentials: Potentials,
    k_mask: NodeMask,
    laws: Vec<NodeLaw>,
    margin: f64,
    b: CsrMatrix<f64>,
    b_solver: SpdSolver,
    b0: CsrMatrix<f64>,
    b0_solver: SpdSolver,
}

impl ProblemContext {
    /// `ops` are the operators on the active nodes, `k_mask` flags the grid
    /// nodes inside `K`.
    pub fn new(ops: OperatorSet, spec: NonlinearitySpec, potentials: Potentials, k_mask: NodeMask) -> Result<Self> {
        let margin = check_condition_n(potentials.mu, potentials.nu, ops.dim())?;
        if margin <= 0.0 {
            return Err(Error::violated(
                "N",
                format!("mu/(N-2)^2 + nu = {:.6} >= 1/4", 0.25 - margin),
            ));
        }
        if k_mask.len() != ops.grid().len() {
            return Err(Error::Config(format!(
                "K mask has {} entries for {} grid nodes",
                k_mask.len(),
                ops.grid().len()
            )));
        }
        if potentials.mu > 0.0 && ops.origin_potential().iter().any(|v| !v.is_finite()) {
            return Err(Error::Resolution("a grid node sits at the origin; use an even resolution".into()));
        }
        spec.validate(ops.dim(), ops.grid().len())?;
        let laws = spec.field(ops.nodes(), &k_mask);
        let b = ops.b_matrix(&potentials);
        let b_solver = SpdSolver::new(&b).map_err(|_| {
            Error::Coercivity(format!(
                "the form B is not positive definite at lambda = {}",
                potentials.lambda
            ))
        })?;
        let b0 = ops.b_matrix(&potentials.with_lambda(0.0));
        let b0_solver = SpdSolver::new(&b0)?;
        Ok(ProblemContext {
            ops,
            spec,
            potentials,
            k_mask,
            laws,
            margin,
            b,
            b_solver,
            b0,
            b0_solver,
        })
    }

    pub fn ops(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn potentials(&self) -> &Potentials {
        &self.potentials
    }

    pub fn k_mask(&self) -> &NodeMask {
        &self.k_mask
    }

    /// Condition (N) margin `1/4 - mu/(N-2)^2 - nu`.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn mass(&self) -> &DVector<f64> {
        self.ops.mass()
    }

    pub fn b_matrix(&self) -> &CsrMatrix<f64> {
        &self.b
    }

    /// Matrix of the form with `λ = 0`.
    pub fn b0_matrix(&self) -> &CsrMatrix<f64> {
        &self.b0
    }

    /// Active-node mask of `K` (positions in the active numbering).
    pub fn k_active(&self) -> NodeMask {
        NodeMask(self.ops.nodes().iter().map(|&i| self.k_mask.get(i)).collect())
    }

    /// `B(u, v)`.
    pub fn inner(&self, u: &GridFunction, v: &GridFunction) -> f64 {
        mat_vec(&self.b, u).dot(v)
    }

    /// `‖u‖ = sqrt(B(u, u))`.
    pub fn norm(&self, u: &GridFunction) -> f64 {
        self.ops.quadratic(&self.potentials, u).max(0.0).sqrt()
    }

    /// Nodal values `f(x_i, u_i)`.
    pub fn f_values(&self, u: &GridFunction) -> GridFunction {
        DVector::from_iterator(u.len(), self.laws.iter().zip(u.iter()).map(|(l, &x)| l.f(x)))
    }

    /// `𝓘(u) = ∫ F(x, u)`.
    pub fn nonlinear_energy(&self, u: &GridFunction) -> f64 {
        self.laws
            .iter()
            .zip(u.iter())
            .zip(self.mass().iter())
            .map(|((l, &x), w)| w * l.antiderivative(x))
            .sum()
    }

    /// `𝓘'(u)(v) = ∫ f(x, u) v`.
    pub fn nonlinear_derivative(&self, u: &GridFunction, v: &GridFunction) -> f64 {
        weighted_dot(self.mass(), &self.f_values(u), v)
    }

    /// `𝒥(u) = ½ B(u, u) - ∫ F(x, u)`.
    pub fn energy(&self, u: &GridFunction) -> f64 {
        0.5 * self.ops.quadratic(&self.potentials, u) - self.nonlinear_energy(u)
    }

    /// `𝒥'(u)(v) = B(u, v) - ∫ f(x, u) v`.
    pub fn derivative_along(&self, u: &GridFunction, v: &GridFunction) -> f64 {
        self.residual(u).dot(v)
    }

    /// The vector representing `𝒥'(u)` in the Euclidean pairing:
    /// `B u - M f(u)`.
    pub fn residual(&self, u: &GridFunction) -> GridFunction {
        mat_vec(&self.b, u) - self.f_values(u).component_mul(self.mass())
    }

    /// Riesz representative of `𝒥'(u)` in the `B` inner product.
    pub fn gradient_b(&self, u: &GridFunction) -> GridFunction {
        self.b_solver.solve(&self.residual(u))
    }

    /// Solve `B₀ x = r`.
    pub fn riesz_j0(&self, r: &GridFunction) -> GridFunction {
        self.b0_solver.solve(r)
    }

    /// Solve `B x = r`.
    pub fn riesz(&self, r: &GridFunction) -> GridFunction {
        self.b_solver.solve(r)
    }

    /// `(1 + ‖u‖) ‖𝒥'(u)‖`.
    pub fn cerami_residual(&self, u: &GridFunction) -> f64 {
        let r = self.residual(u);
        let g = self.b_solver.solve(&r);
        (1.0 + self.norm(u)) * g.dot(&r).max(0.0).sqrt()
    }

    /// `𝒥'(u)(u)`, zero on the Nehari set.
    pub fn nehari_residual(&self, u: &GridFunction) -> f64 {
        self.derivative_along(u, u)
    }

    /// Nodal values `∂f/∂u(x_i, u_i)`.
    pub fn df_values(&self, u: &GridFunction) -> GridFunction {
        DVector::from_iterator(u.len(), self.laws.iter().zip(u.iter()).map(|(l, &x)| l.df(x)))
    }

    /// Jacobian `B - M f_u(u)` of the residual.
    pub fn jacobian(&self, u: &GridFunction) -> CsrMatrix<f64> {
        add_diagonal(&self.b, &-self.df_values(u).component_mul(self.mass()))
    }

    /// Solve `J(u) x = r` with the Jacobian at `u`, preconditioned by `B`
    /// on large grids.
    pub fn newton_solve(&self, u: &GridFunction, r: &GridFunction) -> Result<GridFunction> {
        let precond = |x: &DVector<f64>| self.b_solver.solve(x);
        solve_general(&self.jacobian(u), r, Some(&precond))
    }

    /// `φ(t) = (t²-1)/2 𝓘'(u)(u) - 𝓘(tu) + 𝓘(u)`, nonpositive under the
    /// monotonicity condition on `f(u)/|u|`.
    pub fn ray_inequality(&self, u: &GridFunction, t: f64) -> f64 {
        0.5 * (t * t - 1.0) * self.nonlinear_derivative(u, u) - self.nonlinear_energy(&(u * t)) + self.nonlinear_energy(u)
    }

    /// Profile of `t ↦ 𝒥(tu)` with its maximizer.
    pub fn ray_max(&self, u: &GridFunction) -> Result<RayProfile> {
        if u.iter().all(|&x| x == 0.0) {
            return Err(Error::Precondition("ray through the zero function".into()));
        }
        let (lo, hi) = (RAY_RANGE.0.ln(), RAY_RANGE.1.ln());
        let t: Vec<f64> = (0..RAY_SAMPLES)
            .map(|j| (lo + (hi - lo) * j as f64 / (RAY_SAMPLES - 1) as f64).exp())
            .collect();
        let along = |s: f64| self.energy(&(u * s));
        let values: Vec<f64> = t.iter().map(|&s| along(s)).collect();
        let best = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        if best == 0 || best + 1 == values.len() || values[best] <= 0.0 {
            return Err(Error::Range(format!(
                "t -> J(tu) has no interior maximum on [{:e}, {:e}]",
                RAY_RANGE.0, RAY_RANGE.1
            )));
        }
        // the derivative along the ray changes sign across the sampled peak
        let slope = |s: f64| self.derivative_along(&(u * s), u);
        let (mut a, mut b) = (t[best - 1], t[best + 1]);
        let mut t_star = if slope(a) > 0.0 && slope(b) < 0.0 {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if slope(m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        } else {
            golden_max(&along, a, b, 200)
        };
        let peak = along(t_star);
        let tol = 1e-10 * (1.0 + peak.abs());
        let level = |s: f64| along(s) - (peak - tol);
        let left = (0..best).rev().find(|&j| level(t[j]) < 0.0).map_or(t[0], |j| bisect(&level, t[j], t_star));
        let right = (best + 1..t.len()).find(|&j| level(t[j]) < 0.0).map_or(t[t.len() - 1], |j| bisect(&level, t_star, t[j]));
        let plateau_detected = right - left > PLATEAU_WIDTH * t_star;
        if plateau_detected {
            t_star = 0.5 * (left + right);
        }
        Ok(RayProfile {
            energy: along(t_star),
            t,
            values,
            t_star,
            plateau: [left, right],
            plateau_detected,
        })
    }

    /// `𝒥₀(u) = ½ B₀(u, u) - ∫ F(x, u)`, the functional with `λ = 0`.
    pub fn energy_j0(&self, u: &GridFunction) -> f64 {
        0.5 * self.ops.quadratic(&self.potentials.with_lambda(0.0), u) - self.nonlinear_energy(u)
    }

    /// `B₀ u - M f(u)`.
    pub fn residual_j0(&self, u: &GridFunction) -> GridFunction {
        mat_vec(&self.b0, u) - self.f_values(u).component_mul(self.mass())
    }

    /// `B₀`-Riesz representative of `𝒥₀'(u)`.
    pub fn gradient_j0(&self, u: &GridFunction) -> GridFunction {
        self.b0_solver.solve(&self.residual_j0(u))
    }

    /// `B₀(u, v)`.
    pub fn inner_j0(&self, u: &GridFunction, v: &GridFunction) -> f64 {
        mat_vec(&self.b0, u).dot(v)
    }

    /// Gradient of `𝒥₀` on the sphere `uᵀMu = ρ`: the `B₀`-Riesz gradient
    /// projected, in the `B₀` metric, onto the tangent space `{v : vᵀMu = 0}`.
    pub fn tangent_gradient_j0(&self, u: &GridFunction) -> GridFunction {
        let g = self.gradient_j0(u);
        let mu = u.component_mul(self.mass());
        let z = self.b0_solver.solve(&mu);
        let denom = z.dot(&mu);
        if denom <= 0.0 {
            return g;
        }
        let coef = g.dot(&mu) / denom;
        g - z * coef
    }

    /// `B₀` norm of a function.
    pub fn norm_j0(&self, u: &GridFunction) -> f64 {
        self.ops.quadratic(&self.potentials.with_lambda(0.0), u).max(0.0).sqrt()
    }

    /// Mass `∫ u²`.
    pub fn mass_of(&self, u: &GridFunction) -> f64 {
        weighted_dot(self.mass(), u, u)
    }

    /// Multiplier `λ = -𝒥₀'(u)(u) / ∫u²`.
    pub fn lagrange_lambda(&self, u: &GridFunction) -> Result<f64> {
        let rho = self.mass_of(u);
        if !(rho > 0.0) {
            return Err(Error::Domain("the multiplier needs a function of positive mass".into()));
        }
        Ok(-self.residual_j0(u).dot(u) / rho)
    }

    /// `‖𝒥₀'(u) + λ M u‖` in the dual `B₀` norm.
    pub fn stationarity_residual(&self, u: &GridFunction, lambda: f64) -> f64 {
        let r = self.residual_j0(u) + u.component_mul(self.mass()) * lambda;
        self.b0_solver.solve(&r).dot(&r).max(0.0).sqrt()
    }

    /// Restriction of the problem to the nodes flagged in `mask` (active
    /// numbering); functions stay full length with zeros off the mask.
    pub fn subspace(&self, mask: &NodeMask) -> Result<Subspace> {
        if mask.len() != self.len() {
            return Err(Error::Config("subspace mask length".into()));
        }
        let nodes = mask.indices();
        if nodes.is_empty() {
            return Err(Error::Precondition("the subspace has no nodes".into()));
        }
        if nodes.len() == self.len() {
            return Ok(Subspace { mask: mask.clone(), nodes, solver: None });
        }
        let mut index = vec![usize::MAX; self.len()];
        for (k, &i) in nodes.iter().enumerate() {
            index[i] = k;
        }
        let entries = self.b.triplet_iter().filter_map(|(i, j, &v)| {
            let (a, b) = (index[i], index[j]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b, v))
        });
        let sub = crate::linalg::csr_from_triplets(nodes.len(), entries);
        Ok(Subspace {
            mask: mask.clone(),
            nodes,
            solver: Some(SpdSolver::new(&sub)?),
        })
    }

    /// Solve `B_S x = r_S` on the subspace, zero elsewhere.
    pub fn riesz_in(&self, sub: &Subspace, r: &GridFunction) -> GridFunction {
        match &sub.solver {
            None => self.b_solver.solve(r),
            Some(s) => {
                let local = DVector::from_iterator(sub.nodes.len(), sub.nodes.iter().map(|&i| r[i]));
                let x = s.solve(&local);
                let mut g = DVector::zeros(self.len());
                for (k, &i) in sub.nodes.iter().enumerate() {
                    g[i] = x[k];
                }
                g
            }
        }
    }

    /// Riesz gradient of `𝒥` restricted to `sub`.
    pub fn gradient_in(&self, sub: &Subspace, u: &GridFunction) -> GridFunction {
        self.riesz_in(sub, &self.residual(u))
    }

    /// Solve the Jacobian system at `u` restricted to `sub`; the result
    /// vanishes off the subspace.
    pub fn newton_solve_in(&self, sub: &Subspace, u: &GridFunction, r: &GridFunction) -> Result<GridFunction> {
        if sub.solver.is_none() {
            return self.newton_solve(u, r);
        }
        let mut index = vec![usize::MAX; self.len()];
        for (k, &i) in sub.nodes.iter().enumerate() {
            index[i] = k;
        }
        let jac = self.jacobian(u);
        let entries = jac.triplet_iter().filter_map(|(i, j, &v)| {
            let (a, b) = (index[i], index[j]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b, v))
        });
        let local = crate::linalg::csr_from_triplets(sub.nodes.len(), entries);
        let rhs = DVector::from_iterator(sub.nodes.len(), sub.nodes.iter().map(|&i| r[i]));
        let solver = sub.solver.as_ref().unwrap();
        let precond = |x: &DVector<f64>| solver.solve(x);
        let x = solve_general(&local, &rhs, Some(&precond))?;
        let mut out = DVector::zeros(self.len());
        for (k, &i) in sub.nodes.iter().enumerate() {
            out[i] = x[k];
        }
        Ok(out)
    }

    /// Cerami residual of `𝒥` restricted to `sub`.
    pub fn cerami_residual_in(&self, sub: &Subspace, u: &GridFunction) -> f64 {
        let g = self.gradient_in(sub, u);
        (1.0 + self.norm(u)) * g.dot(&self.residual(u)).max(0.0).sqrt()
    }

    /// Smooth pseudo-random directions `B⁻¹ M x`, restricted to `mask`.
    pub fn random_directions(&self, count: usize, seed: u64, mask: &NodeMask) -> Vec<GridFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x = random_vector(self.len(), &mut rng);
                let mut y = self.b_solver.solve(&x.component_mul(self.mass()));
                for (i, v) in y.iter_mut().enumerate() {
                    if !mask.get(i) {
                        *v = 0.0;
                    }
                }
                y
            })
            .collect()
    }

    /// `min_j 𝒥(r d_j/‖d_j‖)` over sampled directions.
    pub fn sphere_infimum(&self, directions: &[GridFunction], r: f64) -> f64 {
        directions
            .iter()
            .filter_map(|d| {
                let n = self.norm(d);
                (n > 0.0).then(|| self.energy(&(d * (r / n))))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Best sampled sphere level over radii `scale · 2^{-j}`, `j = 1..=12`.
    pub fn sphere_level(&self, directions: &[GridFunction], scale: f64) -> SphereLevel {
        (1..=12)
            .map(|j| {
                let radius = scale * 0.5f64.powi(j);
                SphereLevel {
                    radius,
                    infimum: self.sphere_infimum(directions, radius),
                }
            })
            .max_by(|a, b| a.infimum.total_cmp(&b.infimum))
            .unwrap()
    }
}

/// A coordinate subspace of grid functions, with its own factorization.
#[derive(Debug)]
pub struct Subspace {
    mask: NodeMask,
    nodes: Vec<usize>,
    solver: Option<SpdSolver>,
}

impl Subspace {
    pub fn mask(&self) -> &NodeMask {
        &self.mask
    }

    pub fn contains(&self, u: &GridFunction) -> bool {
        u.iter().enumerate().all(|(i, &x)| x == 0.0 || self.mask.get(i))
    }

    /// Zero the components off the subspace.
    pub fn project(&self, u: &GridFunction) -> GridFunction {
        DVector::from_iterator(u.len(), u.iter().enumerate().map(|(i, &x)| if self.mask.get(i) { x } else { 0.0 }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RayProfile {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub t_star: f64,
    /// `𝒥(t* u)`.
    pub energy: f64,
    /// Maximal interval around `t*` where `𝒥(tu)` is within the plateau
    /// tolerance of the maximum.
    pub plateau: [f64; 2],
    pub plateau_detected: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SphereLevel {
    pub radius: f64,
    pub infimum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnExponents {
    pub delta_p: f64,
    pub delta_p_times_p: f64,
    pub mass_critical: f64,
    pub subcritical: bool,
}

/// Gagliardo–Nirenberg exponents `δ_p = N(1/2 - 1/p)`, `δ_p p`, and the
/// mass-critical exponent `2 + 4/N`.
pub fn gn_exponents(p: f64, dim: usize) -> GnExponents {
    let n = dim as f64;
    let delta_p = n * (0.5 - 1.0 / p);
    let mass_critical = 2.0 + 4.0 / n;
    GnExponents {
        delta_p,
        delta_p_times_p: n * (0.5 * p - 1.0),
        mass_critical,
        subcritical: p < mass_critical,
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Maximizer of `f` on `[a, b]` by golden-section search.
pub fn golden_section_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    golden_max(f, a, b, 200)
}

/// Root of `f` on `[a, b]` where `f(a)` and `f(b)` differ in sign.
fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa_neg = f(a) < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        if (f(m) < 0.0) == fa_neg {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::geometry::{build_grid, k_mask, DomainSpec, RegionK};
    use crate::linalg::dense_pencil_eigen;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ball_ctx(m: usize, spec: NonlinearitySpec, pot: Potentials, region: RegionK) -> ProblemContext {
        let grid = build_grid(&DomainSpec::ball(1.0, 3).unwrap(), m).unwrap();
        let mask = k_mask(&grid, &region).unwrap();
        ProblemContext::new(assemble(&grid), spec, pot, mask).unwrap()
    }

    fn saturating_ctx(m: usize) -> ProblemContext {
        ball_ctx(
            m,
            NonlinearitySpec::saturating(1.0, 4.0),
            Potentials::new(1.0, 0.1, 0.1),
            RegionK::Annulus { inner: 0.3, outer: 0.6 },
        )
    }

    fn power_ctx(m: usize, pot: Potentials) -> ProblemContext {
        ball_ctx(m, NonlinearitySpec::pure_power(1.0, 4.0), pot, RegionK::Whole)
    }

    fn bump(ctx: &ProblemContext, a: f64, b: f64) -> GridFunction {
        DVector::from_iterator(
            ctx.len(),
            ctx.ops().grid().dist_origin().iter().map(|&r| {
                if r > a && r < b {
                    (std::f64::consts::PI * (r - a) / (b - a)).sin().powi(2)
                } else {
                    0.0
                }
            }),
        )
    }

    #[test]
    fn context_rejects_violated_n() {
        let grid = build_grid(&DomainSpec::ball(1.0, 3).unwrap(), 20).unwrap();
        let mask = NodeMask::none(grid.len());
        let err = ProblemContext::new(
            assemble(&grid),
            NonlinearitySpec::zero(),
            Potentials::new(0.0, 0.3, 0.0),
            mask,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConditionViolated { condition: "N", .. }));
    }

    #[test]
    fn energy_examples() {
        let ctx = saturating_ctx(50);
        assert_eq!(ctx.energy(&DVector::zeros(ctx.len())), 0.0);
        let lin = ball_ctx(50, NonlinearitySpec::zero(), Potentials::none(), RegionK::Empty);
        let u = bump(&lin, 0.1, 0.9);
        let quad = 0.5 * mat_vec(lin.ops().stiffness(), &u).dot(&u);
        assert_relative_eq!(lin.energy(&u), quad, max_relative = 1e-12);
        assert_relative_eq!(lin.derivative_along(&u, &u), 2.0 * quad, max_relative = 1e-12);
        assert_relative_eq!((lin.gradient_b(&u) - &u).amax(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn small_sphere_energy_bound() {
        let ctx = saturating_ctx(100);
        let dirs = ctx.random_directions(8, 3, &NodeMask::all(ctx.len()));
        let r = 1e-2;
        for d in &dirs {
            let u = d * (r / ctx.norm(d));
            assert!(ctx.energy(&u) >= r * r / 4.0);
        }
    }

    #[test]
    fn descent_direction() {
        let ctx = saturating_ctx(60);
        let u = bump(&ctx, 0.2, 0.7) * 3.0;
        let g = ctx.gradient_b(&u);
        let j = ctx.energy(&u);
        assert!(ctx.energy(&(&u - &g * 1e-3)) < j);
    }

    #[test]
    fn zero_has_zero_cerami_residual() {
        let ctx = saturating_ctx(30);
        assert_eq!(ctx.cerami_residual(&DVector::zeros(ctx.len())), 0.0);
    }

    #[test]
    fn ray_max_pure_power_closed_form() {
        let ctx = power_ctx(80, Potentials::none());
        let u = bump(&ctx, 0.0, 1.0) + bump(&ctx, 0.3, 0.8);
        let closed = (ctx.norm(&u).powi(2) / (4.0 * ctx.nonlinear_energy(&u))).sqrt();
        let prof = ctx.ray_max(&u).unwrap();
        assert_relative_eq!(prof.t_star, closed, max_relative = 1e-10);
        assert!(prof.values.iter().all(|&v| v <= prof.energy));
        assert!(!prof.plateau_detected);
        // normalized so that ‖u‖² = ∫|u|⁴ = 1 gives t* = 1
        let a = ctx.norm(&u).powi(2);
        let b = 4.0 * ctx.nonlinear_energy(&u);
        let v = &u * (a / b).sqrt();
        let v = &v * (1.0 / ctx.norm(&v));
        let c = 4.0 * ctx.nonlinear_energy(&v);
        let scaled = ball_ctx(
            80,
            NonlinearitySpec::pure_power(1.0 / c, 4.0),
            Potentials::none(),
            RegionK::Whole,
        );
        assert_relative_eq!(scaled.ray_max(&v).unwrap().t_star, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn ray_max_without_superlinearity_is_a_range_error() {
        let ctx = ball_ctx(40, NonlinearitySpec::zero(), Potentials::none(), RegionK::Empty);
        let u = bump(&ctx, 0.1, 0.9);
        assert!(matches!(ctx.ray_max(&u), Err(Error::Range(_))));
    }

    #[test]
    fn ray_inequality_at_nehari_points() {
        let ctx = saturating_ctx(60);
        for (a, b) in [(0.3, 0.6), (0.1, 0.9), (0.0, 0.7)] {
            let u = bump(&ctx, a, b);
            let prof = ctx.ray_max(&u).unwrap();
            let n = &u * prof.t_star;
            assert!(ctx.nehari_residual(&n).abs() <= 1e-8 * (1.0 + ctx.norm(&n).powi(2)));
            for j in 0..61 {
                let t = 0.1 * 100f64.powf(j as f64 / 60.0);
                assert!(ctx.ray_inequality(&n, t) <= 1e-10);
            }
        }
    }

    #[test]
    fn linear_ray_plateau() {
        // f = Θu everywhere gives J(tu) = t²(B(u,u) - Θ|u|²)/2: no interior
        // maximum, so the scan reports a range error
        let mut spec = NonlinearitySpec::saturating(1.0, 4.0);
        spec.off_k = crate::nonlinearity::OffKPart::Saturating {
            theta: crate::nonlinearity::Coefficient::Constant(0.5),
            threshold: 1e-3,
        };
        let ctx = ball_ctx(40, spec, Potentials::none(), RegionK::Empty);
        let u = bump(&ctx, 0.1, 0.9);
        assert!(ctx.ray_max(&u).is_err());
    }

    #[test]
    fn j0_examples() {
        let ctx = saturating_ctx(60);
        let u = bump(&ctx, 0.2, 0.8);
        assert_eq!(ctx.energy_j0(&DVector::zeros(ctx.len())), 0.0);
        let at_zero = ball_ctx(
            60,
            NonlinearitySpec::saturating(1.0, 4.0),
            Potentials::new(0.0, 0.1, 0.1),
            RegionK::Annulus { inner: 0.3, outer: 0.6 },
        );
        assert_relative_eq!(ctx.energy_j0(&u), at_zero.energy(&u), max_relative = 1e-13);
    }

    #[test]
    fn tangent_gradient_is_tangent() {
        let ctx = saturating_ctx(60);
        let u = bump(&ctx, 0.1, 0.8) * 2.0;
        let g = ctx.tangent_gradient_j0(&u);
        let mu = u.component_mul(ctx.mass());
        assert!(g.dot(&mu).abs() <= 1e-12 * g.norm() * mu.norm());
    }

    #[test]
    fn linear_multiplier_and_tangent_gradient() {
        let ctx = ball_ctx(100, NonlinearitySpec::zero(), Potentials::none(), RegionK::Empty);
        let pairs = dense_pencil_eigen(ctx.ops().stiffness(), ctx.mass(), 1);
        let lambda1 = pairs.values[0];
        for rho in [1.0f64, 4.0] {
            let u = &pairs.vectors[0] * rho.sqrt();
            let lam = ctx.lagrange_lambda(&u).unwrap();
            assert_relative_eq!(lam, -lambda1, max_relative = 1e-10);
            assert!(ctx.tangent_gradient_j0(&u).amax() < 1e-9);
            assert!(ctx.stationarity_residual(&u, lam) < 1e-9);
        }
        // independent oracle: λ₁ = π² on the unit ball
        assert_relative_eq!(lambda1, std::f64::consts::PI.powi(2), max_relative = 0.01);
        assert!(matches!(ctx.lagrange_lambda(&DVector::zeros(ctx.len())), Err(Error::Domain(_))));
    }

    #[test]
    fn gn_examples() {
        let e = gn_exponents(3.0, 3);
        assert_relative_eq!(e.delta_p, 0.5);
        assert_relative_eq!(e.delta_p_times_p, 1.5);
        assert_relative_eq!(e.mass_critical, 10.0 / 3.0);
        assert!(e.subcritical);
        let e = gn_exponents(10.0 / 3.0, 3);
        assert_relative_eq!(e.delta_p_times_p, 2.0, max_relative = 1e-15);
        assert!(!e.subcritical);
        assert_relative_eq!(gn_exponents(4.0, 3).delta_p_times_p, 3.0);
    }

    #[test]
    fn j0_coercive_on_the_sphere() {
        // at fixed mass, 𝒥₀ ≥ ½ c_N |∇u|² - C₁ - C |∇u|^{δ_p p} with δ_p p < 2,
        // so 𝒥₀ grows like the Dirichlet energy along oscillating sequences
        let ctx = ball_ctx(
            200,
            NonlinearitySpec::saturating(1.0, 3.0),
            Potentials::new(0.0, 0.1, 0.1),
            RegionK::Annulus { inner: 0.2, outer: 0.7 },
        );
        let factor = crate::geometry::coercivity_factor(0.1, 0.1, 3);
        let r = ctx.ops().grid().dist_origin().to_vec();
        let mut ratios = Vec::new();
        for k in [1usize, 2, 4, 8, 16] {
            let u = DVector::from_iterator(r.len(), r.iter().map(|&x| (k as f64 * std::f64::consts::PI * x).sin() / x));
            let u = &u * (1.0 / ctx.mass_of(&u).sqrt());
            let grad2 = ctx.ops().stiffness_form().energy(&u);
            ratios.push(ctx.energy_j0(&u) / (0.5 * factor * grad2));
        }
        assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
        assert!(*ratios.last().unwrap() > 0.9, "{ratios:?}");
    }

    #[test]
    fn subspace_gradient_stays_inside() {
        let ctx = saturating_ctx(60);
        let q = ctx.subspace(&ctx.k_active()).unwrap();
        let u = bump(&ctx, 0.3, 0.6);
        assert!(q.contains(&u));
        let g = ctx.gradient_in(&q, &u);
        assert!(q.contains(&g));
        // restricted Riesz map: B(g, v) = J'(u)(v) for v in the subspace
        let v = q.project(&bump(&ctx, 0.35, 0.55));
        assert_relative_eq!(ctx.inner(&g, &v), ctx.derivative_along(&u, &v), max_relative = 1e-9);
    }

    #[test]
    fn sphere_level_positive() {
        let ctx = saturating_ctx(60);
        let dirs = ctx.random_directions(10, 5, &NodeMask::all(ctx.len()));
        let s = ctx.sphere_level(&dirs, 10.0);
        assert!(s.infimum > 0.0 && s.radius > 0.0);
    }

    fn random_pair(ctx: &ProblemContext, seed: u64) -> (GridFunction, GridFunction) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vector(ctx.len(), &mut rng) * 4.0;
        let v = random_vector(ctx.len(), &mut rng);
        (u, v)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn derivative_matches_central_difference(seed in 0u64..1000) {
            let ctx = saturating_ctx(40);
            let (u, v) = random_pair(&ctx, seed);
            let h = 1e-5;
            let fd = (ctx.energy(&(&u + &v * h)) - ctx.energy(&(&u - &v * h))) / (2.0 * h);
            let d = ctx.derivative_along(&u, &v);
            prop_assert!((d - fd).abs() <= 1e-6 * d.abs().max(1e-3 * ctx.norm(&v)));
        }

        #[test]
        fn energy_is_even(seed in 0u64..1000) {
            let ctx = saturating_ctx(30);
            let (u, _) = random_pair(&ctx, seed);
            prop_assert_eq!(ctx.energy(&u), ctx.energy(&(-&u)));
        }

        #[test]
        fn derivative_is_linear(seed in 0u64..1000, a in -3.0f64..3.0) {
            let ctx = saturating_ctx(30);
            let (u, v) = random_pair(&ctx, seed);
            let w = bump(&ctx, 0.1, 0.5);
            let lhs = ctx.derivative_along(&u, &(&v * a + &w));
            let rhs = a * ctx.derivative_along(&u, &v) + ctx.derivative_along(&u, &w);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
