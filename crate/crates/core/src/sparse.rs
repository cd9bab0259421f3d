//! Compressed-row matrices and preconditioned conjugate gradients.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("conjugate gradients stalled after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("non-positive diagonal entry in row {0}")]
    BadDiagonal(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Rows below this size are multiplied sequentially.
const PARALLEL_ROWS: usize = 4096;

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        if self.n >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }

    /// `|A| |x|`, componentwise.
    pub fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| (self.vals[k] * x[self.cols[k]]).abs()).sum())
            .collect()
    }

    /// `xᵀ A x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row_dot(i, x)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `∥b − Ax∥ / ∥b∥` of the returned iterate.
    pub residual: f64,
}

/// Residual replacements tolerated before the iteration is declared stalled.
const MAX_RESTARTS: usize = 20;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Jacobi-preconditioned conjugate gradients to relative residual `tol`.
///
/// The residual cannot drop below the rounding level of `b − Ax`, estimated
/// as `64 u ∥|A||x|∥ / ∥b∥`; on ill-conditioned systems that level replaces
/// `tol` as the convergence criterion.
///
/// With `deflate_constants` the iteration runs in the complement of the
/// constant vector, which must span the kernel of `a`; the right-hand side is
/// projected accordingly.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    deflate_constants: bool,
) -> Result<CgOutcome, SolverError> {
    let n = a.size();
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(SolverError::BadDiagonal(i));
    }
    let mut rhs = b.to_vec();
    if deflate_constants && n > 0 {
        remove_mean(&mut rhs);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = vec![0.0; n];
    if n == 0 || bnorm == 0.0 {
        return Ok(CgOutcome { solution: x, iterations: 0, residual: 0.0 });
    }
    let precondition = |r: &[f64], z: &mut [f64]| {
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        if deflate_constants {
            remove_mean(z);
        }
    };
    let mut r = rhs.clone();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut residual = 1.0;
    let mut floor = 0.0;
    let mut restarts = 0;
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if deflate_constants {
            remove_mean(&mut r);
        }
        residual = dot(&r, &r).sqrt() / bnorm;
        if residual <= tol.max(floor) {
            // confirm with the true residual to guard against drift
            let mut ax = vec![0.0; n];
            a.mul_vec(&x, &mut ax);
            let mut true_r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
            if deflate_constants {
                remove_mean(&mut true_r);
            }
            let true_res = dot(&true_r, &true_r).sqrt() / bnorm;
            let ax_abs = a.abs_mul_vec(&x);
            floor = 64.0 * f64::EPSILON * dot(&ax_abs, &ax_abs).sqrt() / bnorm;
            if true_res <= tol.max(floor) {
                return Ok(CgOutcome { solution: x, iterations: it, residual: true_res });
            }
            restarts += 1;
            if restarts > MAX_RESTARTS {
                return Err(SolverError::NotConverged { iterations: it, residual: true_res });
            }
            r = true_r;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NotConverged { iterations: max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, neumann: bool) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            let deg = if neumann && (i == 0 || i == n - 1) { 1.0 } else { 2.0 };
            t.push((i, i, deg));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0), (1, 0, 1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.diagonal(), vec![4.0, 2.0]);
        let mut y = vec![0.0; 2];
        a.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![4.0, 3.0]);
    }

    #[test]
    fn solves_dirichlet_chain() {
        let n = 50;
        let a = laplace_1d(n, false);
        let b = vec![1.0; n];
        let out = pcg(&a, &b, 1e-12, 1000, false).unwrap();
        // exact solution of the discrete problem: x_i = (i+1)(n−i)/2
        for (i, x) in out.solution.iter().enumerate() {
            let e = ((i + 1) * (n - i)) as f64 / 2.0;
            assert!((x - e).abs() < 1e-8 * e);
        }
    }

    #[test]
    fn singular_neumann_chain_in_complement() {
        let n = 30;
        let a = laplace_1d(n, true);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let out = pcg(&a, &b, 1e-12, 1000, true).unwrap();
        let mean: f64 = out.solution.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-10);
        let mut ax = vec![0.0; n];
        a.mul_vec(&out.solution, &mut ax);
        let bm = b.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            assert!((ax[i] - (b[i] - bm)).abs() < 1e-9);
        }
    }

    #[test]
    fn ill_conditioned_system_stops_at_rounding_level() {
        // diagonal spread of 1e14 puts the attainable residual far above 1e-15
        let n = 40;
        let t: Vec<_> = (0..n).map(|i| (i, i, 10f64.powf(14.0 * i as f64 / (n - 1) as f64))).collect();
        let mut t2 = t.clone();
        for i in 0..n - 1 {
            let c = 0.1 * (t[i].2 * t[i + 1].2).sqrt();
            t2.push((i, i + 1, c));
            t2.push((i + 1, i, c));
        }
        let a = CsrMatrix::from_triplets(n, t2);
        let out = pcg(&a, &vec![1.0; n], 1e-17, 10_000, false).unwrap();
        assert!(out.residual < 1e-6);
    }

    #[test]
    fn reports_stalling() {
        let a = laplace_1d(100, false);
        let err = pcg(&a, &vec![1.0; 100], 1e-14, 3, false).unwrap_err();
        assert!(matches!(err, SolverError::NotConverged { iterations: 3, .. }));
    }
}
