//! Discrete operators: stiffness (`-Δ` with Dirichlet elimination), mass,
//! the two singular potentials, and the quadratic form
//! `B(u,v) = ∫∇u·∇v + λuv - μ uv/|x|^2 - ν uv/d(x)^2`.
//!
//! The stiffness matrix is stored twice: as a CSR matrix for products and
//! solves, and as an edge list `u^T L u = Σ c_e (u_i - u_j)^2 + Σ d_i u_i^2`,
//! which evaluates the Dirichlet energy as a sum of nonnegative terms.

use std::sync::Arc;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sphere_area, Grid, GridLayout, NodeMask};
use crate::linalg::{add_diagonal, csr_from_triplets, mat_vec, weighted_dot};

/// Real value per active node; Dirichlet zero is implied elsewhere.
pub type GridFunction = DVector<f64>;

/// Strengths of the zeroth-order terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Potentials {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub nu: f64,
}

impl Potentials {
    pub fn new(lambda: f64, mu: f64, nu: f64) -> Self {
        Potentials { lambda, mu, nu }
    }

    pub fn none() -> Self {
        Potentials::new(0.0, 0.0, 0.0)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Potentials { lambda, ..self }
    }
}

/// Graph-Laplacian form of the stiffness matrix.
#[derive(Debug, Clone)]
pub struct StiffnessForm {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    dirichlet: Vec<f64>,
}

impl StiffnessForm {
    /// `u^T L u`.
    pub fn energy(&self, u: &DVector<f64>) -> f64 {
        let interior: f64 = self.edges.iter().map(|&(i, j, c)| c * (u[i] - u[j]).powi(2)).sum();
        let boundary: f64 = self.dirichlet.iter().zip(u.iter()).map(|(d, x)| d * x * x).sum();
        interior + boundary
    }

    pub fn to_csr(&self) -> CsrMatrix<f64> {
        let entries = self
            .edges
            .iter()
            .flat_map(|&(i, j, c)| [(i, i, c), (j, j, c), (i, j, -c), (j, i, -c)])
            .chain(self.dirichlet.iter().enumerate().map(|(i, &d)| (i, i, d)));
        csr_from_triplets(self.n, entries)
    }

    /// Keep the nodes at positions `keep` (ascending); edges to dropped
    /// nodes become zero-Dirichlet terms.
    fn restrict(&self, keep: &[usize]) -> StiffnessForm {
        let mut new_index = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            new_index[i] = k;
        }
        let mut dirichlet: Vec<f64> = keep.iter().map(|&i| self.dirichlet[i]).collect();
        let mut edges = Vec::new();
        for &(i, j, c) in &self.edges {
            match (new_index[i], new_index[j]) {
                (usize::MAX, usize::MAX) => {}
                (a, usize::MAX) => dirichlet[a] += c,
                (usize::MAX, b) => dirichlet[b] += c,
                (a, b) => edges.push((a, b, c)),
            }
        }
        StiffnessForm {
            n: keep.len(),
            edges,
            dirichlet,
        }
    }

    /// Adjacency lists of the stencil graph.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }
}

/// Assembled operators on a set of active grid nodes.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    grid: Arc<Grid>,
    nodes: Vec<usize>,
    form: StiffnessForm,
    stiffness: CsrMatrix<f64>,
    mass: DVector<f64>,
    origin: DVector<f64>,
    boundary: DVector<f64>,
}

/// Assemble the discrete operators of a grid.
///
/// Radial grids use the flux form `-(r^{N-1} u')' / r^{N-1}` with zero flux
/// through `r = 0` and a half-cell Dirichlet face at `r = R`; boxes use the
/// 7-point stencil with half-cell Dirichlet faces.
pub fn assemble(grid: &Grid) -> OperatorSet {
    let n = grid.len();
    let mut edges = Vec::new();
    let mut dirichlet = vec![0.0; n];
    match *grid.layout() {
        GridLayout::Radial { spacing: h } => {
            let dim = grid.dim() as i32;
            let omega = sphere_area(grid.dim());
            for i in 0..n - 1 {
                let face = (i + 1) as f64 * h;
                edges.push((i, i + 1, omega * face.powi(dim - 1) / h));
            }
            let radius = n as f64 * h;
            dirichlet[n - 1] = omega * radius.powi(dim - 1) / (0.5 * h);
        }
        GridLayout::Tensor { cells, spacing, .. } => {
            let cell_volume: f64 = spacing.iter().product();
            let index = |i: usize, j: usize, k: usize| i + cells[0] * (j + cells[1] * k);
            for k in 0..cells[2] {
                for j in 0..cells[1] {
                    for i in 0..cells[0] {
                        let here = index(i, j, k);
                        let pos = [i, j, k];
                        for axis in 0..3 {
                            let c = cell_volume / (spacing[axis] * spacing[axis]);
                            if pos[axis] == 0 {
                                dirichlet[here] += 2.0 * c;
                            }
                            if pos[axis] + 1 == cells[axis] {
                                dirichlet[here] += 2.0 * c;
                            } else {
                                let mut next = pos;
                                next[axis] += 1;
                                edges.push((here, index(next[0], next[1], next[2]), c));
                            }
                        }
                    }
                }
            }
        }
    }
    let form = StiffnessForm { n, edges, dirichlet };
    let weights = DVector::from_column_slice(grid.weights());
    let origin = DVector::from_iterator(n, grid.weights().iter().zip(grid.dist_origin()).map(|(w, r)| w / (r * r)));
    let boundary = DVector::from_iterator(n, grid.weights().iter().zip(grid.dist_boundary()).map(|(w, d)| w / (d * d)));
    OperatorSet {
        grid: Arc::new(grid.clone()),
        nodes: (0..n).collect(),
        stiffness: form.to_csr(),
        form,
        mass: weights,
        origin,
        boundary,
    }
}

impl OperatorSet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Grid indices of the active nodes, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    pub fn stiffness_form(&self) -> &StiffnessForm {
        &self.form
    }

    /// Quadrature weights (diagonal of the mass matrix).
    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    /// Diagonal `w_i / |x_i|^2`.
    pub fn origin_potential(&self) -> &DVector<f64> {
        &self.origin
    }

    /// Diagonal `w_i / d(x_i)^2`.
    pub fn boundary_potential(&self) -> &DVector<f64> {
        &self.boundary
    }

    /// Diagonal `w_i Θ(x_i)` for node values `theta` on the active nodes.
    pub fn theta_diagonal(&self, theta: &[f64]) -> DVector<f64> {
        assert_eq!(theta.len(), self.len(), "theta table length");
        DVector::from_iterator(self.len(), self.mass.iter().zip(theta).map(|(w, t)| w * t))
    }

    /// Diagonal of `λM - μP_origin - νP_boundary`.
    pub fn potential_diagonal(&self, pot: &Potentials) -> DVector<f64> {
        &self.mass * pot.lambda - &self.origin * pot.mu - &self.boundary * pot.nu
    }

    /// Matrix of the form `B`.
    pub fn b_matrix(&self, pot: &Potentials) -> CsrMatrix<f64> {
        add_diagonal(&self.stiffness, &self.potential_diagonal(pot))
    }

    /// `B(u, v)`.
    pub fn bilinear(&self, pot: &Potentials, u: &GridFunction, v: &GridFunction) -> f64 {
        let lu = mat_vec(&self.stiffness, u);
        lu.dot(v) + weighted_dot(&self.potential_diagonal(pot), u, v)
    }

    /// `B(u, u)`, with the Dirichlet energy summed edge by edge.
    pub fn quadratic(&self, pot: &Potentials, u: &GridFunction) -> f64 {
        self.form.energy(u) + weighted_dot(&self.potential_diagonal(pot), u, u)
    }

    /// `sqrt(B(u, u))`; a negative value of the form is a coercivity error.
    pub fn norm_b(&self, pot: &Potentials, u: &GridFunction) -> Result<f64> {
        let q = self.quadratic(pot, u);
        let scale = self.form.energy(u) + weighted_dot(&self.mass, u, u) * pot.lambda.abs();
        if q < -1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Coercivity(format!(
                "B(u,u) = {q:.6e} < 0; check condition (N) and lambda"
            )));
        }
        Ok(q.max(0.0).sqrt())
    }

    /// Drop the nodes flagged in `mask` (zero-Dirichlet elimination).
    pub fn restrict_to_complement(&self, mask: &NodeMask) -> Result<OperatorSet> {
        if mask.len() != self.len() {
            return Err(Error::Config(format!(
                "mask has {} entries for {} active nodes",
                mask.len(),
                self.len()
            )));
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| !mask.get(i)).collect();
        if keep.is_empty() {
            return Err(Error::EmptyProblem("the mask covers every node".into()));
        }
        Ok(self.restrict(&keep))
    }

    /// Keep only the nodes flagged in `mask`.
    pub fn restrict_to(&self, mask: &NodeMask) -> Result<OperatorSet> {
        self.restrict_to_complement(&mask.complement())
    }

    fn restrict(&self, keep: &[usize]) -> OperatorSet {
        let form = self.form.restrict(keep);
        let pick = |d: &DVector<f64>| DVector::from_iterator(keep.len(), keep.iter().map(|&i| d[i]));
        OperatorSet {
            grid: Arc::clone(&self.grid),
            nodes: keep.iter().map(|&i| self.nodes[i]).collect(),
            stiffness: form.to_csr(),
            form,
            mass: pick(&self.mass),
            origin: pick(&self.origin),
            boundary: pick(&self.boundary),
        }
    }

    /// Embed a function on the active nodes into a full-grid vector.
    pub fn extend_to_grid(&self, u: &GridFunction) -> DVector<f64> {
        let mut full = DVector::zeros(self.grid.len());
        for (k, &i) in self.nodes.iter().enumerate() {
            full[i] = u[k];
        }
        full
    }

    /// Restrict a full-grid vector to the active nodes.
    pub fn restrict_from_grid(&self, full: &DVector<f64>) -> GridFunction {
        DVector::from_iterator(self.len(), self.nodes.iter().map(|&i| full[i]))
    }
}
