//! Domains, the superlinearity region `K`, and cell-centered grids.
//!
//! Two convex domains are supported: a ball in `R^N` (`N >= 3`), handled in
//! the radially symmetric subspace as a 1-D grid of shells, and an
//! axis-aligned box in `R^3`, handled as a tensor grid. Nodes sit at cell
//! centers, so no node coincides with the origin or with the boundary and
//! both singular potentials stay finite on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted resolution (cells per radius or per axis).
pub const MIN_RESOLUTION: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// Ball of the given radius centered at the origin of `R^dim`.
    Ball { radius: f64, dim: usize },
    /// Box `[a_0,b_0] x [a_1,b_1] x [a_2,b_2]` in `R^3` with `a_i < 0 < b_i`.
    Box { bounds: [[f64; 2]; 3] },
}

impl DomainSpec {
    pub fn ball(radius: f64, dim: usize) -> Result<Self> {
        let spec = DomainSpec::Ball { radius, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cuboid(bounds: [[f64; 2]; 3]) -> Result<Self> {
        let spec = DomainSpec::Box { bounds };
        spec.validate()?;
        Ok(spec)
    }

    /// Symmetric cube `[-half, half]^3`.
    pub fn cube(half: f64) -> Result<Self> {
        Self::cuboid([[-half, half]; 3])
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainSpec::Ball { radius, dim } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
                }
                if dim < 3 {
                    return Err(Error::Config(format!("dimension must be at least 3, got {dim}")));
                }
            }
            DomainSpec::Box { bounds } => {
                for (axis, [a, b]) in bounds.iter().copied().enumerate() {
                    if !(a < 0.0 && 0.0 < b) || !a.is_finite() || !b.is_finite() {
                        return Err(Error::Config(format!(
                            "box axis {axis}: need a < 0 < b so the origin is interior, got [{a}, {b}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match *self {
            DomainSpec::Ball { dim, .. } => dim,
            DomainSpec::Box { .. } => 3,
        }
    }

    /// Lebesgue measure of the domain.
    pub fn volume(&self) -> f64 {
        match *self {
            DomainSpec::Ball { radius, dim } => sphere_area(dim) * radius.powi(dim as i32) / dim as f64,
            DomainSpec::Box { bounds } => bounds.iter().map(|[a, b]| b - a).product(),
        }
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::Domain(format!(
                "point has {} coordinates, domain dimension is {}",
                point.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Surface area of the unit sphere in `R^dim`.
pub fn sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    // omega_1 = 2, omega_2 = 2 pi, omega_{n+2} = 2 pi omega_n / n
    let (mut n, mut area) = if dim % 2 == 1 { (1, 2.0) } else { (2, 2.0 * PI) };
    while n < dim {
        area *= 2.0 * PI / n as f64;
        n += 2;
    }
    area
}

fn norm(point: &[f64]) -> f64 {
    point.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Distance from `point` to the complement of the domain.
///
/// Closed form for both variants: `R - |x|` for the ball and the distance to
/// the nearest face for the box.
pub fn distance_to_boundary(domain: &DomainSpec, point: &[f64]) -> Result<f64> {
    domain.check_point(point)?;
    let d = match *domain {
        DomainSpec::Ball { radius, .. } => radius - norm(point),
        DomainSpec::Box { bounds } => bounds
            .iter()
            .zip(point)
            .map(|([a, b], &x)| (x - a).min(b - x))
            .fold(f64::INFINITY, f64::min),
    };
    if d < 0.0 {
        return Err(Error::Domain(format!("point {point:?} lies outside the domain")));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub reason: String,
}

/// Superharmonicity of the boundary distance, `-Δd >= 0`.
///
/// Every shipped domain is convex, and on convex domains `d` is concave,
/// hence superharmonic.
pub fn check_condition_c(domain: &DomainSpec) -> ConditionReport {
    let shape = match domain {
        DomainSpec::Ball { .. } => "ball",
        DomainSpec::Box { .. } => "box",
    };
    ConditionReport {
        holds: true,
        reason: format!("the {shape} is convex, so the boundary distance is concave and -Δd >= 0"),
    }
}

/// Margin `1/4 - mu/(N-2)^2 - nu` of the smallness condition on the
/// potential strengths.
///
/// The condition holds iff the returned margin is strictly positive. Sign
/// and dimension clauses are reported as errors.
pub fn check_condition_n(mu: f64, nu: f64, dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(Error::violated("N", format!("dimension N = {dim} < 3")));
    }
    if mu < 0.0 {
        return Err(Error::violated("N", format!("mu = {mu} < 0")));
    }
    if nu < 0.0 {
        return Err(Error::violated("N", format!("nu = {nu} < 0")));
    }
    let n2 = (dim as f64 - 2.0).powi(2);
    Ok(0.25 - mu / n2 - nu)
}

/// Coercivity factor `1 - 4 mu/(N-2)^2 - 4 nu`, i.e. four times the margin.
pub fn coercivity_factor(mu: f64, nu: f64, dim: usize) -> f64 {
    let n2 = (dim as f64 - 2.0).powi(2);
    1.0 - 4.0 * mu / n2 - 4.0 * nu
}

/// Closed region where the nonlinearity is superlinear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionK {
    Empty,
    /// The closure of the whole domain.
    Whole,
    /// Spherical shell `inner <= |x| <= outer`.
    Annulus { inner: f64, outer: f64 },
    /// Axis-aligned box.
    SubBox { bounds: [[f64; 2]; 3] },
}

impl RegionK {
    pub fn has_interior(&self) -> bool {
        match *self {
            RegionK::Empty => false,
            RegionK::Whole => true,
            RegionK::Annulus { inner, outer } => inner < outer,
            RegionK::SubBox { bounds } => bounds.iter().all(|[a, b]| a < b),
        }
    }

    /// Membership of the open interior of the region.
    pub fn interior_contains(&self, point: &[f64]) -> bool {
        match *self {
            RegionK::Empty => false,
            RegionK::Whole => true,
            RegionK::Annulus { inner, outer } => {
                let r = norm(point);
                inner < r && r < outer
            }
            RegionK::SubBox { bounds } => {
                point.len() == 3 && bounds.iter().zip(point).all(|([a, b], &x)| *a < x && x < *b)
            }
        }
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        match (self, domain) {
            (RegionK::Empty | RegionK::Whole, _) => Ok(()),
            (RegionK::Annulus { inner, outer }, _) => {
                if *inner < 0.0 || inner > outer {
                    return Err(Error::Config(format!("annulus needs 0 <= inner <= outer, got ({inner}, {outer})")));
                }
                if let DomainSpec::Ball { radius, .. } = domain {
                    if *outer > *radius {
                        return Err(Error::Config(format!("annulus outer radius {outer} exceeds the ball radius {radius}")));
                    }
                }
                Ok(())
            }
            (RegionK::SubBox { .. }, DomainSpec::Ball { .. }) => Err(Error::Config(
                "a sub-box region needs a box domain; use an annulus on the ball".into(),
            )),
            (RegionK::SubBox { bounds }, DomainSpec::Box { bounds: outer }) => {
                for axis in 0..3 {
                    let [a, b] = bounds[axis];
                    let [lo, hi] = outer[axis];
                    if a > b || a < lo || b > hi {
                        return Err(Error::Config(format!(
                            "sub-box axis {axis} [{a}, {b}] is not inside the domain [{lo}, {hi}]"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Boolean flag per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMask(pub Vec<bool>);

impl NodeMask {
    pub fn all(len: usize) -> Self {
        NodeMask(vec![true; len])
    }

    pub fn none(len: usize) -> Self {
        NodeMask(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn complement(&self) -> NodeMask {
        NodeMask(self.0.iter().map(|b| !b).collect())
    }

    /// Indices of the set nodes, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    /// Keep only the entries at `keep` positions.
    pub fn select(&self, keep: &[usize]) -> NodeMask {
        NodeMask(keep.iter().map(|&i| self.0[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridLayout {
    /// Shells `r_i = (i + 1/2) h`, `i = 0..M`.
    Radial { spacing: f64 },
    /// Tensor grid, x index fastest.
    Tensor {
        cells: [usize; 3],
        spacing: [f64; 3],
        lower: [f64; 3],
    },
}

/// Cell-centered discretization of a domain.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: DomainSpec,
    resolution: usize,
    layout: GridLayout,
    coords: Vec<f64>,
    weights: Vec<f64>,
    dist_origin: Vec<f64>,
    dist_boundary: Vec<f64>,
}

impl Grid {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Spatial dimension `N` of the problem (not the coordinate count).
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Number of stored coordinates per node: 1 on radial grids, 3 on boxes.
    pub fn coord_len(&self) -> usize {
        match self.layout {
            GridLayout::Radial { .. } => 1,
            GridLayout::Tensor { .. } => 3,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.layout, GridLayout::Radial { .. })
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let c = self.coord_len();
        &self.coords[i * c..(i + 1) * c]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dist_origin(&self) -> &[f64] {
        &self.dist_origin
    }

    pub fn dist_boundary(&self) -> &[f64] {
        &self.dist_boundary
    }

    /// Largest cell width.
    pub fn spacing(&self) -> f64 {
        match self.layout {
            GridLayout::Radial { spacing } => spacing,
            GridLayout::Tensor { spacing, .. } => spacing.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Quadrature of a node function, `sum_i w_i g_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Build the cell-centered grid with `resolution` cells per radius (ball) or
/// per axis (box).
pub fn build_grid(domain: &DomainSpec, resolution: usize) -> Result<Grid> {
    domain.validate()?;
    if resolution < MIN_RESOLUTION {
        return Err(Error::Config(format!(
            "resolution {resolution} is below the minimum of {MIN_RESOLUTION}"
        )));
    }
    let grid = match *domain {
        DomainSpec::Ball { radius, dim } => {
            let h = radius / resolution as f64;
            let omega = sphere_area(dim);
            let coords: Vec<f64> = (0..resolution).map(|i| (i as f64 + 0.5) * radius / resolution as f64).collect();
            let weights = coords.iter().map(|r| omega * r.powi(dim as i32 - 1) * h).collect();
            let dist_boundary = coords.iter().map(|r| radius - r).collect();
            Grid {
                domain: domain.clone(),
                resolution,
                layout: GridLayout::Radial { spacing: h },
                dist_origin: coords.clone(),
                coords,
                weights,
                dist_boundary,
            }
        }
        DomainSpec::Box { bounds } => {
            let m = resolution;
            let lower = [bounds[0][0], bounds[1][0], bounds[2][0]];
            let spacing = [0, 1, 2].map(|a| (bounds[a][1] - bounds[a][0]) / m as f64);
            let n = m * m * m;
            let cell_volume: f64 = spacing.iter().product();
            let mut coords = Vec::with_capacity(3 * n);
            let mut dist_origin = Vec::with_capacity(n);
            let mut dist_boundary = Vec::with_capacity(n);
            for k in 0..m {
                for j in 0..m {
                    for i in 0..m {
                        let x = [i, j, k]
                            .iter()
                            .enumerate()
                            .map(|(a, &idx)| lower[a] + (idx as f64 + 0.5) * spacing[a])
                            .collect::<Vec<_>>();
                        dist_origin.push(norm(&x));
                        dist_boundary.push(distance_to_boundary(domain, &x)?);
                        coords.extend_from_slice(&x);
                    }
                }
            }
            Grid {
                domain: domain.clone(),
                resolution,
                layout: GridLayout::Tensor { cells: [m; 3], spacing, lower },
                coords,
                weights: vec![cell_volume; n],
                dist_origin,
                dist_boundary,
            }
        }
    };
    Ok(grid)
}

/// Nodes lying in the open interior of `region`.
///
/// A region with nonempty interior that captures no node is a resolution
/// error: the discrete `H^1_0(int K)` would be trivial.
pub fn k_mask(grid: &Grid, region: &RegionK) -> Result<NodeMask> {
    region.validate(grid.domain())?;
    let mask = NodeMask((0..grid.len()).map(|i| region.interior_contains(grid.point(i))).collect());
    if region.has_interior() && !mask.any() {
        return Err(Error::Resolution(format!(
            "region {region:?} contains no node at resolution {}",
            grid.resolution()
        )));
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn boundary_distance_examples() {
        let ball = DomainSpec::ball(1.0, 3).unwrap();
        assert_relative_eq!(distance_to_boundary(&ball, &[0.3, 0.0, 0.0]).unwrap(), 0.7, epsilon = 1e-15);
        let cube = DomainSpec::cube(1.0).unwrap();
        assert_eq!(distance_to_boundary(&cube, &[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(distance_to_boundary(&cube, &[0.9, 0.0, 0.0]).unwrap(), 0.1, epsilon = 1e-15);
        assert!(matches!(distance_to_boundary(&cube, &[1.5, 0.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(distance_to_boundary(&ball, &[0.5, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn condition_c_holds_on_convex_domains() {
        for d in [
            DomainSpec::ball(1.0, 3).unwrap(),
            DomainSpec::cube(1.0).unwrap(),
            DomainSpec::cuboid([[-1.0, 2.0], [-1.0, 1.0], [-1.0, 1.0]]).unwrap(),
        ] {
            let report = check_condition_c(&d);
            assert!(report.holds);
            assert!(report.reason.contains("convex"));
        }
    }

    #[test]
    fn condition_n_margins() {
        assert_relative_eq!(check_condition_n(0.1, 0.1, 3).unwrap(), 0.05, epsilon = 1e-15);
        assert_eq!(check_condition_n(0.0, 0.0, 3).unwrap(), 0.25);
        assert_eq!(check_condition_n(0.25, 0.0, 3).unwrap(), 0.0);
        assert!(check_condition_n(0.3, 0.0, 3).unwrap() < 0.0);
        for (mu, nu, n) in [(0.1, 0.0, 2), (-0.1, 0.0, 3), (0.0, -0.1, 3)] {
            assert!(matches!(
                check_condition_n(mu, nu, n),
                Err(Error::ConditionViolated { condition: "N", .. })
            ));
        }
        assert_relative_eq!(coercivity_factor(0.1, 0.1, 3), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(DomainSpec::ball(0.0, 3).is_err());
        assert!(DomainSpec::ball(1.0, 2).is_err());
        assert!(DomainSpec::cuboid([[0.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]]).is_err());
    }

    #[test]
    fn radial_grid_nodes_and_volume() {
        let ball = DomainSpec::ball(1.0, 3).unwrap();
        let g = build_grid(&ball, 4).unwrap();
        let radii: Vec<f64> = (0..4).map(|i| g.point(i)[0]).collect();
        assert_eq!(radii, vec![0.125, 0.375, 0.625, 0.875]);

        let g = build_grid(&ball, 200).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 4.0 * PI / 3.0).abs() / (4.0 * PI / 3.0) < 0.005);
        let h = g.spacing();
        assert!(g.dist_origin().iter().all(|&d| d >= h / 2.0 - 1e-15));
        assert!(g.dist_boundary().iter().all(|&d| d >= h / 2.0 - 1e-15));

        assert!(matches!(build_grid(&ball, 3), Err(Error::Config(_))));
    }

    #[test]
    fn box_grid_nodes() {
        let cube = DomainSpec::cube(1.0).unwrap();
        let g = build_grid(&cube, 8).unwrap();
        assert_eq!(g.len(), 512);
        assert!(g.dist_boundary().iter().all(|&d| d >= 0.125 - 1e-15));
        assert!(g.dist_origin().iter().all(|&d| d > 0.0));
        assert_relative_eq!(g.weights().iter().sum::<f64>(), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_first_order_convergence() {
        for dim in [3, 4, 5] {
            let ball = DomainSpec::ball(1.0, dim).unwrap();
            for m in [8, 16, 64] {
                let g = build_grid(&ball, m).unwrap();
                let rel = (g.weights().iter().sum::<f64>() - ball.volume()).abs() / ball.volume();
                assert!(rel <= 1.0 / m as f64, "dim {dim} m {m}: {rel}");
            }
        }
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn masks() {
        let ball = DomainSpec::ball(1.0, 3).unwrap();
        let g = build_grid(&ball, 10).unwrap();
        let m = k_mask(&g, &RegionK::Annulus { inner: 0.2, outer: 0.5 }).unwrap();
        let r: Vec<f64> = m.indices().iter().map(|&i| g.point(i)[0]).collect();
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([0.25, 0.35, 0.45]) {
            assert_relative_eq!(*got, want, epsilon = 1e-14);
        }
        assert!(!k_mask(&g, &RegionK::Empty).unwrap().any());
        assert_eq!(k_mask(&g, &RegionK::Whole).unwrap().count(), g.len());
        assert!(matches!(
            k_mask(&g, &RegionK::Annulus { inner: 0.4, outer: 0.45 }),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            k_mask(&g, &RegionK::SubBox { bounds: [[-0.1, 0.1]; 3] }),
            Err(Error::Config(_))
        ));
    }

    fn ball_point() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(-0.57f64..0.57)
    }

    proptest! {
        #[test]
        fn boundary_distance_is_lipschitz(x in ball_point(), y in ball_point()) {
            for d in [DomainSpec::ball(1.0, 3).unwrap(), DomainSpec::cube(1.0).unwrap()] {
                let dx = distance_to_boundary(&d, &x).unwrap();
                let dy = distance_to_boundary(&d, &y).unwrap();
                let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!((dx - dy).abs() <= dist + 1e-14);
            }
        }

        #[test]
        fn boundary_distance_is_concave(x in ball_point(), y in ball_point(), a in 0.0f64..1.0) {
            for d in [
                DomainSpec::ball(1.0, 3).unwrap(),
                DomainSpec::cuboid([[-0.6, 2.0], [-1.0, 1.0], [-0.7, 0.9]]).unwrap(),
            ] {
                let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + (1.0 - a) * q).collect();
                let dz = distance_to_boundary(&d, &z).unwrap();
                let mix = a * distance_to_boundary(&d, &x).unwrap() + (1.0 - a) * distance_to_boundary(&d, &y).unwrap();
                prop_assert!(dz >= mix - 1e-14);
            }
        }
    }
}
