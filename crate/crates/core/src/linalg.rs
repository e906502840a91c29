//! Sparse/dense linear-algebra helpers shared by the discrete operators,
//! the eigensolvers and the Newton polish.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dimension up to which dense factorizations and eigensolves are used.
pub const DENSE_LIMIT: usize = 1000;

pub fn csr_from_triplets(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for (i, j, v) in entries {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

pub fn diagonal_csr(d: &DVector<f64>) -> CsrMatrix<f64> {
    csr_from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
}

/// `a + diag(d)`.
pub fn add_diagonal(a: &CsrMatrix<f64>, d: &DVector<f64>) -> CsrMatrix<f64> {
    let entries = a
        .triplet_iter()
        .map(|(i, j, &v)| (i, j, v))
        .chain(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
    csr_from_triplets(a.nrows(), entries)
}

pub fn mat_vec(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        y[i] = row.col_indices().iter().zip(row.values()).map(|(&j, v)| v * x[j]).sum();
    }
    y
}

pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, &v) in a.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

/// Largest entry of `|A - A^T|`.
pub fn asymmetry(a: &CsrMatrix<f64>) -> f64 {
    let d = to_dense(a);
    (&d - d.transpose()).amax()
}

/// `sum_i d_i x_i y_i`.
pub fn weighted_dot(d: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    d.iter().zip(x.iter()).zip(y.iter()).map(|((d, x), y)| d * x * y).sum()
}

/// Cholesky factorization of a sparse symmetric positive-definite matrix.
pub struct SpdSolver {
    chol: CscCholesky<f64>,
    n: usize,
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdSolver").field("n", &self.n).finish()
    }
}

impl SpdSolver {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        let csc = CscMatrix::from(a);
        let chol = CscCholesky::factor(&csc)
            .map_err(|e| Error::Coercivity(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(SpdSolver { chol, n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let rhs = DMatrix::from_column_slice(self.n, 1, b.as_slice());
        let x = self.chol.solve(&rhs);
        DVector::from_column_slice(x.as_slice())
    }
}

/// Eigenpairs of the pencil `(A, diag(m))`, ascending, with `m > 0`.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

/// All eigenpairs through the symmetric scaling `D^{-1/2} A D^{-1/2}`.
pub fn dense_pencil_eigen(a: &CsrMatrix<f64>, m: &DVector<f64>, k: usize) -> Eigenpairs {
    let n = a.nrows();
    let s: DVector<f64> = m.map(|v| 1.0 / v.sqrt());
    let mut c = DMatrix::zeros(n, n);
    for (i, j, &v) in a.triplet_iter() {
        c[(i, j)] += s[i] * v * s[j];
    }
    // symmetrize against round-off in assembly
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let take = k.min(n);
    let values = order[..take].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order[..take]
        .iter()
        .map(|&i| {
            let y = eig.eigenvectors.column(i);
            let x = DVector::from_iterator(n, y.iter().zip(s.iter()).map(|(y, s)| y * s));
            m_normalize(x, m)
        })
        .collect();
    Eigenpairs { values, vectors }
}

fn m_normalize(x: DVector<f64>, m: &DVector<f64>) -> DVector<f64> {
    let nrm = weighted_dot(m, &x, &x).sqrt();
    // fix the sign so results are reproducible
    let pivot = x.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
    let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
    x * (sign / nrm)
}

/// Smallest eigenpairs of `(A, diag(m))` by shift-invert Lanczos in the
/// `m`-inner product, with full reorthogonalization.
///
/// The shift is lowered from `shift` until `A - shift*M` admits a Cholesky
/// factorization, so the returned pairs are the lowest ones.
pub fn lanczos_smallest(
    a: &CsrMatrix<f64>,
    m: &DVector<f64>,
    k: usize,
    tol: f64,
    seed: u64,
    shift: f64,
) -> Result<Eigenpairs> {
    let n = a.nrows();
    let (sigma, solver) = shifted_factorization(a, m, shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let mut steps = (2 * k + 20).max(40).min(n);
    let last_residuals = loop {
        let pairs = lanczos_run(&solver, m, &start, steps, k, sigma);
        let residuals = residuals_of(a, m, &pairs);
        let ok = pairs.values.len() >= k.min(n)
            && residuals.iter().zip(&pairs.values).all(|(r, l)| *r <= tol * (1.0 + l.abs()));
        if ok {
            return Ok(pairs);
        }
        if steps >= n || steps >= 800 {
            break residuals;
        }
        steps = (2 * steps).min(n);
    };
    Err(Error::Eigensolver {
        message: format!("shift-invert Lanczos did not converge for k = {k}"),
        residuals: last_residuals,
    })
}

fn shifted_factorization(a: &CsrMatrix<f64>, m: &DVector<f64>, shift: f64) -> Result<(f64, SpdSolver)> {
    let mut sigma = shift;
    for _ in 0..60 {
        let shifted = add_diagonal(a, &m.map(|v| -sigma * v));
        if let Ok(s) = SpdSolver::new(&shifted) {
            return Ok((sigma, s));
        }
        sigma = 2.0 * sigma - 1.0;
    }
    Err(Error::Eigensolver {
        message: "no shift makes the pencil positive definite".into(),
        residuals: vec![],
    })
}

fn lanczos_run(
    solver: &SpdSolver,
    m: &DVector<f64>,
    start: &DVector<f64>,
    steps: usize,
    k: usize,
    sigma: f64,
) -> Eigenpairs {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    basis.push(m_normalize(start.clone(), m));
    for j in 0..steps {
        let q = &basis[j];
        let mut w = solver.solve(&q.component_mul(m));
        let a = weighted_dot(m, q, &w);
        alpha.push(a);
        for _ in 0..2 {
            for qi in &basis {
                let c = weighted_dot(m, qi, &w);
                w.axpy(-c, qi, 1.0);
            }
        }
        let b = weighted_dot(m, &w, &w).sqrt();
        if j + 1 == steps || b <= 1e-14 * a.abs().max(1e-300) {
            break;
        }
        beta.push(b);
        basis.push(w / b);
    }
    let dim = alpha.len();
    let mut t = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        t[(i, i)] = alpha[i];
        if i + 1 < dim {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    // largest theta of the inverse operator = smallest eigenvalue of the pencil
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let take = k.min(order.len());
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    for &i in &order[..take] {
        values.push(sigma + 1.0 / eig.eigenvalues[i]);
        let y = eig.eigenvectors.column(i);
        let mut x = DVector::zeros(m.len());
        for (c, q) in y.iter().zip(&basis) {
            x.axpy(*c, q, 1.0);
        }
        vectors.push(m_normalize(x, m));
    }
    Eigenpairs { values, vectors }
}

/// Relative residuals `||A v - lambda M v|| / ||M v||`.
pub fn residuals_of(a: &CsrMatrix<f64>, m: &DVector<f64>, pairs: &Eigenpairs) -> Vec<f64> {
    pairs
        .values
        .iter()
        .zip(&pairs.vectors)
        .map(|(&l, v)| {
            let mv = v.component_mul(m);
            let r = mat_vec(a, v) - &mv * l;
            r.norm() / mv.norm()
        })
        .collect()
}

/// Solve a general (possibly indefinite) sparse system.
///
/// Dense LU up to [`DENSE_LIMIT`]; above it, restarted GMRES right
/// preconditioned with `precond`.
pub fn solve_general(
    a: &CsrMatrix<f64>,
    b: &DVector<f64>,
    precond: Option<&dyn Fn(&DVector<f64>) -> DVector<f64>>,
) -> Result<DVector<f64>> {
    if a.nrows() <= DENSE_LIMIT || precond.is_none() {
        return to_dense(a)
            .lu()
            .solve(b)
            .ok_or_else(|| Error::Coercivity("singular Jacobian".into()));
    }
    let apply = |x: &DVector<f64>| mat_vec(a, x);
    gmres(&apply, b, precond.unwrap(), 1e-12, 60, 40)
}

/// Restarted GMRES with right preconditioning.
pub fn gmres(
    apply: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    precond: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    tol: f64,
    restart: usize,
    max_restarts: usize,
) -> Result<DVector<f64>> {
    let n = b.len();
    let bnorm = b.norm().max(1e-300);
    let mut x = DVector::zeros(n);
    for _ in 0..max_restarts {
        let r = b - apply(&x);
        let beta = r.norm();
        if beta <= tol * bnorm {
            return Ok(x);
        }
        let mut v: Vec<DVector<f64>> = vec![r / beta];
        let mut z: Vec<DVector<f64>> = Vec::new();
        let mut h = DMatrix::<f64>::zeros(restart + 1, restart);
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = DVector::<f64>::zeros(restart + 1);
        g[0] = beta;
        let mut used = 0;
        for j in 0..restart {
            let zj = precond(&v[j]);
            let mut w = apply(&zj);
            z.push(zj);
            for (i, vi) in v.iter().enumerate() {
                h[(i, j)] = vi.dot(&w);
                w.axpy(-h[(i, j)], vi, 1.0);
            }
            let wnorm = w.norm();
            h[(j + 1, j)] = wnorm;
            for i in 0..j {
                let t = cs[i] * h[(i, j)] + sn[i] * h[(i + 1, j)];
                h[(i + 1, j)] = -sn[i] * h[(i, j)] + cs[i] * h[(i + 1, j)];
                h[(i, j)] = t;
            }
            let denom = h[(j, j)].hypot(h[(j + 1, j)]);
            cs[j] = h[(j, j)] / denom;
            sn[j] = h[(j + 1, j)] / denom;
            h[(j, j)] = denom;
            h[(j + 1, j)] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            if g[j + 1].abs() <= tol * bnorm || wnorm == 0.0 {
                break;
            }
            v.push(w / wnorm);
        }
        let mut y = DVector::zeros(used);
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|c| h[(i, c)] * y[c]).sum();
            y[i] = (g[i] - s) / h[(i, i)];
        }
        for (c, zi) in y.iter().zip(&z) {
            x.axpy(*c, zi, 1.0);
        }
    }
    let r = (b - apply(&x)).norm();
    if r <= 1e3 * tol * bnorm {
        Ok(x)
    } else {
        Err(Error::Coercivity(format!("GMRES stalled at relative residual {:.3e}", r / bnorm)))
    }
}

/// Deterministic random vector with entries in `[-1/2, 1/2)`.
pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
        csr_from_triplets(
            n,
            (0..n).flat_map(|i| {
                let mut v = vec![(i, i, 2.0)];
                if i > 0 {
                    v.push((i, i - 1, -1.0));
                }
                if i + 1 < n {
                    v.push((i, i + 1, -1.0));
                }
                v
            }),
        )
    }

    #[test]
    fn diagonal_pencils() {
        let a = diagonal_csr(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let m = DVector::from_element(3, 1.0);
        let e = dense_pencil_eigen(&a, &m, 2);
        assert_eq!(e.values.len(), 2);
        assert_relative_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 300;
        let a = laplacian_1d(n);
        let m = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.1).sin());
        let dense = dense_pencil_eigen(&a, &m, 4);
        let it = lanczos_smallest(&a, &m, 4, 1e-10, 7, 0.0).unwrap();
        for (x, y) in dense.values.iter().zip(&it.values) {
            assert_relative_eq!(x, y, max_relative = 1e-9);
        }
    }

    #[test]
    fn lanczos_lowers_shift_for_indefinite() {
        let n = 50;
        let a = add_diagonal(&laplacian_1d(n), &DVector::from_element(n, -1.5));
        let m = DVector::from_element(n, 1.0);
        let dense = dense_pencil_eigen(&a, &m, 2);
        assert!(dense.values[0] < 0.0);
        let it = lanczos_smallest(&a, &m, 2, 1e-10, 1, 0.0).unwrap();
        assert_relative_eq!(dense.values[0], it.values[0], max_relative = 1e-9);
    }

    #[test]
    fn gmres_solves_indefinite_system() {
        let n = 80;
        let a = add_diagonal(&laplacian_1d(n), &DVector::from_element(n, -0.05));
        let b = DVector::from_fn(n, |i, _| (i as f64).cos());
        let lap = SpdSolver::new(&laplacian_1d(n)).unwrap();
        let pre = |x: &DVector<f64>| lap.solve(x);
        let apply = |x: &DVector<f64>| mat_vec(&a, x);
        let x = gmres(&apply, &b, &pre, 1e-12, 30, 20).unwrap();
        assert!((mat_vec(&a, &x) - &b).norm() < 1e-9 * b.norm());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = diagonal_csr(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(SpdSolver::new(&a), Err(Error::Coercivity(_))));
    }
}
