//! Generalized symmetric eigenproblems: discrete Hardy constants, the
//! spectrum of the singular Schrödinger operator on `Ω∖K`, and the
//! non-resonance check on `λ`.

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use serde::Serialize;

use crate::assembly::{GridFunction, OperatorSet};
use crate::error::{Error, Result};
use crate::geometry::check_condition_n;
use crate::linalg::{add_diagonal, dense_pencil_eigen, lanczos_smallest, residuals_of, weighted_dot, Eigenpairs, DENSE_LIMIT};

/// Default relative residual tolerance for eigenpairs.
pub const DEFAULT_TOL: f64 = 1e-8;

const LANCZOS_SEED: u64 = 0x5eed_2024;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// The `k` smallest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<GridFunction>,
    /// `||A v - λ M v|| / ||M v||` per pair.
    pub residuals: Vec<f64>,
    /// `max |Θ|` over the nodes of the operator (0 for pure pencils).
    pub theta_sup: f64,
    /// Distance of `-λ` to the computed spectrum, once checked.
    pub condition_a_margin: Option<f64>,
}

impl SpectrumReport {
    fn from_pairs(pairs: Eigenpairs, residuals: Vec<f64>) -> Self {
        SpectrumReport {
            eigenvalues: pairs.values,
            eigenvectors: pairs.vectors,
            residuals,
            theta_sup: 0.0,
            condition_a_margin: None,
        }
    }

    pub fn lowest(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Dimension of the discrete problem the report was computed on.
    pub fn problem_dim(&self) -> usize {
        self.eigenvectors.first().map_or(0, |v| v.len())
    }
}

/// The `k` smallest eigenpairs of `A v = λ diag(m) v`.
///
/// Dense up to [`DENSE_LIMIT`] unknowns, shift-invert Lanczos with a fixed
/// seed above. A pair is accepted when its residual is at most
/// `tol * (1 + |λ|)`.
pub fn smallest_eigenpairs(a: &CsrMatrix<f64>, m: &DVector<f64>, k: usize, tol: f64) -> Result<SpectrumReport> {
    let n = a.nrows();
    if a.ncols() != n || m.len() != n {
        return Err(Error::Precondition(format!(
            "pencil dimensions {}x{} and {} disagree",
            a.nrows(),
            a.ncols(),
            m.len()
        )));
    }
    if k == 0 || n == 0 {
        return Err(Error::Precondition("need k >= 1 and a nonempty pencil".into()));
    }
    if m.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Precondition("mass diagonal must be positive and finite".into()));
    }
    let pairs = if n <= DENSE_LIMIT {
        dense_pencil_eigen(a, m, k)
    } else {
        lanczos_smallest(a, m, k, tol, LANCZOS_SEED, 0.0)?
    };
    let residuals = residuals_of(a, m, &pairs);
    check_residuals(&pairs.values, &residuals, tol)?;
    Ok(SpectrumReport::from_pairs(pairs, residuals))
}

fn check_residuals(values: &[f64], residuals: &[f64], tol: f64) -> Result<()> {
    if values.iter().zip(residuals).any(|(l, r)| !(*r <= tol * (1.0 + l.abs()))) {
        return Err(Error::Eigensolver {
            message: format!("residuals above tolerance {tol:e}"),
            residuals: residuals.to_vec(),
        });
    }
    Ok(())
}

/// Smallest eigenvalue of `(L, P_origin)`, the discrete Hardy constant for
/// the distance to the origin.
pub fn hardy_constant_origin(ops: &OperatorSet) -> Result<f64> {
    let p = ops.origin_potential();
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Resolution("a grid node sits at the origin".into()));
    }
    Ok(smallest_eigenpairs(ops.stiffness(), p, 1, DEFAULT_TOL)?.lowest())
}

/// Smallest eigenvalue of `(L, P_boundary)`.
pub fn hardy_constant_boundary(ops: &OperatorSet) -> Result<f64> {
    Ok(smallest_eigenpairs(ops.stiffness(), ops.boundary_potential(), 1, DEFAULT_TOL)?.lowest())
}

/// Diagonal of `-μ P_origin - ν P_boundary - diag(w Θ)`.
fn singular_diagonal(ops: &OperatorSet, mu: f64, nu: f64, theta: &[f64]) -> DVector<f64> {
    let mut d = -(ops.origin_potential() * mu) - ops.boundary_potential() * nu - ops.theta_diagonal(theta);
    // zero strengths must not turn an infinite origin weight into NaN
    for (i, v) in d.iter_mut().enumerate() {
        if v.is_nan() {
            *v = -ops.mass()[i] * theta[i];
        }
    }
    d
}

/// Matrix of `-Δ - μ/|x|² - ν/d² - Θ` on the active nodes of `ops`.
pub fn operator_a(ops: &OperatorSet, mu: f64, nu: f64, theta: &[f64]) -> CsrMatrix<f64> {
    add_diagonal(ops.stiffness(), &singular_diagonal(ops, mu, nu, theta))
}

/// The `k` smallest eigenvalues of the discrete singular operator on the
/// active nodes of `ops` (normally already restricted to `Ω∖K`).
///
/// Eigenvalues are refined by the Rayleigh quotient with the Dirichlet
/// energy summed edge by edge, so that a constant shift of `Θ` moves the
/// whole spectrum by exactly that constant up to round-off.
pub fn spectrum_a(ops: &OperatorSet, mu: f64, nu: f64, theta: &[f64], k: usize) -> Result<SpectrumReport> {
    let margin = check_condition_n(mu, nu, ops.dim())?;
    if margin <= 0.0 {
        return Err(Error::violated("N", format!("mu/(N-2)^2 + nu = {} >= 1/4", 0.25 - margin)));
    }
    if theta.len() != ops.len() {
        return Err(Error::Precondition(format!(
            "Θ table has {} values for {} nodes",
            theta.len(),
            ops.len()
        )));
    }
    if mu > 0.0 && ops.origin_potential().iter().any(|v| !v.is_finite()) {
        return Err(Error::Resolution("a grid node sits at the origin".into()));
    }
    let diag = singular_diagonal(ops, mu, nu, theta);
    let a = add_diagonal(ops.stiffness(), &diag);
    let mut pairs = if ops.len() <= DENSE_LIMIT {
        dense_pencil_eigen(&a, ops.mass(), k)
    } else {
        lanczos_smallest(&a, ops.mass(), k, DEFAULT_TOL, LANCZOS_SEED, 0.0)?
    };
    for (value, v) in pairs.values.iter_mut().zip(&pairs.vectors) {
        let num = ops.stiffness_form().energy(v) + weighted_dot(&diag, v, v);
        *value = num / weighted_dot(ops.mass(), v, v);
    }
    let residuals = residuals_of(&a, ops.mass(), &pairs);
    check_residuals(&pairs.values, &residuals, DEFAULT_TOL)?;
    let theta_sup = theta.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    let lowest = pairs.values[0];
    if lowest <= -theta_sup - DEFAULT_TOL * (1.0 + theta_sup) {
        return Err(Error::TheoryViolation(format!(
            "lowest eigenvalue {lowest:.10e} is not above -|Θ|∞ = {:.10e}",
            -theta_sup
        )));
    }
    let mut report = SpectrumReport::from_pairs(pairs, residuals);
    report.theta_sup = theta_sup;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionAReport {
    pub lambda: f64,
    /// `min_n |λ_n + λ|` over the computed eigenvalues.
    pub margin: f64,
    pub tol: f64,
    pub satisfied: bool,
    /// `λ >= |Θ|∞`, which implies the condition outright.
    pub sufficient: bool,
}

/// Default non-resonance tolerance `1e-3 (1 + |λ|)`.
pub fn default_condition_a_tol(lambda: f64) -> f64 {
    1e-3 * (1.0 + lambda.abs())
}

/// Check that `-λ` stays away from the computed spectrum.
///
/// If every computed eigenvalue lies below `-λ` and the report does not
/// cover the whole discrete spectrum, the answer is inconclusive.
pub fn check_condition_a(lambda: f64, spectrum: &SpectrumReport, tol: Option<f64>) -> Result<ConditionAReport> {
    let tol = tol.unwrap_or_else(|| default_condition_a_tol(lambda));
    let target = -lambda;
    let complete = spectrum.eigenvalues.len() >= spectrum.problem_dim();
    let top = *spectrum.eigenvalues.last().ok_or_else(|| Error::Precondition("empty spectrum".into()))?;
    if top <= target && !complete {
        return Err(Error::Inconclusive(format!(
            "all {} computed eigenvalues lie below -λ = {target}; increase k",
            spectrum.eigenvalues.len()
        )));
    }
    let margin = spectrum.eigenvalues.iter().map(|l| (l - target).abs()).fold(f64::INFINITY, f64::min);
    Ok(ConditionAReport {
        lambda,
        margin,
        tol,
        satisfied: margin > tol,
        sufficient: lambda >= spectrum.theta_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::geometry::{build_grid, k_mask, DomainSpec, NodeMask, RegionK};
    use crate::linalg::{csr_from_triplets, diagonal_csr};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ball(m: usize, dim: usize) -> OperatorSet {
        assemble(&build_grid(&DomainSpec::ball(1.0, dim).unwrap(), m).unwrap())
    }

    fn off_annulus(m: usize, inner: f64, outer: f64) -> OperatorSet {
        let ops = ball(m, 3);
        let mask = k_mask(ops.grid(), &RegionK::Annulus { inner, outer }).unwrap();
        ops.restrict_to_complement(&mask).unwrap()
    }

    #[test]
    fn radial_laplacian_matches_sine_modes() {
        // radial Dirichlet eigenfunctions on the unit ball are sin(nπr)/r
        let ops = ball(200, 3);
        let rep = smallest_eigenpairs(ops.stiffness(), ops.mass(), 3, DEFAULT_TOL).unwrap();
        for (n, l) in rep.eigenvalues.iter().enumerate() {
            let exact = ((n + 1) as f64 * PI).powi(2);
            assert_relative_eq!(*l, exact, max_relative = 0.01);
        }
        assert!(rep.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn identity_and_diagonal_pencils() {
        let m = DVector::from_vec(vec![1.0, 2.0, 5.0, 0.5]);
        let rep = smallest_eigenpairs(&diagonal_csr(&m), &m, 4, DEFAULT_TOL).unwrap();
        for l in rep.eigenvalues {
            assert_relative_eq!(l, 1.0, epsilon = 1e-14);
        }
        let a = csr_from_triplets(3, [(0, 0, 3.0), (1, 1, 1.0), (2, 2, 2.0)]);
        let rep = smallest_eigenpairs(&a, &DVector::from_element(3, 1.0), 2, DEFAULT_TOL).unwrap();
        assert_relative_eq!(rep.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(rep.eigenvalues[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = DVector::from_element(3, 1.0);
        let a = diagonal_csr(&m);
        assert!(matches!(smallest_eigenpairs(&a, &m, 0, DEFAULT_TOL), Err(Error::Precondition(_))));
        let short = DVector::from_element(2, 1.0);
        assert!(matches!(smallest_eigenpairs(&a, &short, 1, DEFAULT_TOL), Err(Error::Precondition(_))));
    }

    #[test]
    fn hardy_origin_bounds() {
        assert!(hardy_constant_origin(&ball(100, 3)).unwrap() >= 0.25);
        assert!(hardy_constant_origin(&ball(100, 5)).unwrap() >= 2.25);
        let seq: Vec<f64> = [50, 100, 200].iter().map(|&m| hardy_constant_origin(&ball(m, 3)).unwrap()).collect();
        assert!(seq[0] > seq[1] && seq[1] > seq[2] && seq[2] >= 0.25, "{seq:?}");
    }

    #[test]
    fn hardy_boundary_bounds() {
        let seq: Vec<f64> = [50, 100, 200].iter().map(|&m| hardy_constant_boundary(&ball(m, 3)).unwrap()).collect();
        assert!(seq[0] > seq[1] && seq[1] > seq[2] && seq[2] >= 0.25, "{seq:?}");
        let cube = assemble(&build_grid(&DomainSpec::cube(1.0).unwrap(), 6).unwrap());
        assert!(hardy_constant_boundary(&cube).unwrap() >= 0.25);
    }

    #[test]
    fn origin_node_is_a_resolution_error() {
        let cube = assemble(&build_grid(&DomainSpec::cube(1.0).unwrap(), 5).unwrap());
        assert!(matches!(hardy_constant_origin(&cube), Err(Error::Resolution(_))));
    }

    #[test]
    fn spectrum_a_examples() {
        let ops = off_annulus(80, 0.4, 0.6);
        let zero = vec![0.0; ops.len()];
        assert!(spectrum_a(&ops, 0.0, 0.0, &zero, 2).unwrap().lowest() > 0.0);
        let half = vec![0.5; ops.len()];
        let rep = spectrum_a(&ops, 0.1, 0.1, &half, 2).unwrap();
        assert!(rep.lowest() > -0.5);
        assert_eq!(rep.theta_sup, 0.5);
    }

    #[test]
    fn constant_shift_is_exact() {
        let ops = off_annulus(120, 0.3, 0.5);
        let base: Vec<f64> = (0..ops.len()).map(|i| 0.3 * (i as f64 * 0.37).sin()).collect();
        let shifted: Vec<f64> = base.iter().map(|t| t + 2.5).collect();
        let a = spectrum_a(&ops, 0.1, 0.05, &base, 4).unwrap();
        let b = spectrum_a(&ops, 0.1, 0.05, &shifted, 4).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - 2.5 - y).abs() <= 1e-12, "{x} {y}");
        }
    }

    #[test]
    fn spectrum_a_rejects_violated_n() {
        let ops = off_annulus(40, 0.4, 0.6);
        let zero = vec![0.0; ops.len()];
        assert!(matches!(
            spectrum_a(&ops, 0.3, 0.0, &zero, 1),
            Err(Error::ConditionViolated { condition: "N", .. })
        ));
    }

    #[test]
    fn condition_a_examples() {
        let ops = off_annulus(60, 0.4, 0.6);
        let theta = vec![0.5; ops.len()];
        let rep = spectrum_a(&ops, 0.0, 0.0, &theta, 3).unwrap();
        let ok = check_condition_a(1.5, &rep, None).unwrap();
        assert!(ok.satisfied && ok.sufficient);
        let resonant = check_condition_a(-rep.lowest(), &rep, None).unwrap();
        assert!(!resonant.satisfied);
        assert!(resonant.margin.abs() < 1e-12);

        let zero = vec![0.0; ops.len()];
        let rep = spectrum_a(&ops, 0.0, 0.0, &zero, 3).unwrap();
        let c = check_condition_a(0.0, &rep, None).unwrap();
        assert!(c.satisfied);
        assert_relative_eq!(c.margin, rep.lowest(), max_relative = 1e-14);

        // -λ far above the computed eigenvalues
        assert!(matches!(check_condition_a(-1e6, &rep, None), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn lanczos_path_above_dense_limit() {
        let ops = assemble(&build_grid(&DomainSpec::cube(1.0).unwrap(), 14).unwrap());
        assert!(ops.len() > DENSE_LIMIT);
        let rep = smallest_eigenpairs(ops.stiffness(), ops.mass(), 2, DEFAULT_TOL).unwrap();
        // the cube [-1,1]^3 has λ1 = 3π²/4; the 7-point stencil sits below it
        assert_relative_eq!(rep.eigenvalues[0], 3.0 * PI * PI / 4.0, max_relative = 0.02);
        assert!(rep.residuals.iter().all(|r| *r < 1e-6));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn enlarging_k_never_lowers_lambda1(inner in 0.1f64..0.5, width in 0.1f64..0.3, grow in 0.0f64..0.15) {
            let ops = ball(60, 3);
            let small = RegionK::Annulus { inner, outer: inner + width };
            let large = RegionK::Annulus { inner: (inner - grow).max(0.05), outer: inner + width + grow };
            let lambda1 = |region: &RegionK| {
                let mask = k_mask(ops.grid(), region).unwrap();
                let sub = ops.restrict_to_complement(&mask).unwrap();
                let theta = vec![0.2; sub.len()];
                spectrum_a(&sub, 0.1, 0.1, &theta, 1).unwrap().lowest()
            };
            prop_assert!(lambda1(&large) >= lambda1(&small) - 1e-10);
        }
    }

    #[test]
    fn empty_region_keeps_every_node() {
        let ops = ball(20, 3);
        let sub = ops.restrict_to_complement(&NodeMask::none(ops.len())).unwrap();
        assert_eq!(sub.len(), ops.len());
    }
}
