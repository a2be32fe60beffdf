//! Sparse matrices and the linear solvers used by the implicit schemes.

use crate::error::{Error, Result};
use rayon::prelude::*;

const PARALLEL_ROWS: usize = 20_000;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Row-by-row builder; entries within a row may repeat and are summed.
#[derive(Debug, Default)]
pub struct CsrBuilder {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrBuilder {
    pub fn with_capacity(rows: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        Self { row_ptr, cols: Vec::with_capacity(nnz), vals: Vec::with_capacity(nnz) }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        let start = *self.row_ptr.last().unwrap_or(&0);
        if let Some(k) = self.cols[start..].iter().position(|&c| c == col) {
            self.vals[start + k] += val;
        } else {
            self.cols.push(col);
            self.vals.push(val);
        }
    }

    pub fn end_row(&mut self) {
        self.row_ptr.push(self.cols.len());
    }

    pub fn build(mut self) -> CsrMatrix {
        if self.row_ptr.is_empty() {
            self.row_ptr.push(0);
        }
        let n = self.row_ptr.len() - 1;
        CsrMatrix { n, row_ptr: self.row_ptr, cols: self.cols, vals: self.vals }
    }
}

impl CsrMatrix {
    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v)).collect()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(c, v)| v * x[c]).sum()
    }

    /// `y = A x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        if self.n >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }
}

/// Iteration count and final relative residual of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

const DOT_CHUNK: usize = 4096;

/// Dot product summed over fixed-size chunks; the result does not depend on
/// the thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() >= PARALLEL_ROWS {
        let partial: Vec<f64> = a
            .par_chunks(DOT_CHUNK)
            .zip(b.par_chunks(DOT_CHUNK))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
            .collect();
        partial.iter().sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB for `A x = b`, starting from the contents
/// of `x`, until `‖b − A x‖ ≤ tol ‖b‖`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.rows();
    if b.len() != n || x.len() != n {
        return Err(Error::Argument(format!("system size {n} does not match vectors {} / {}", b.len(), x.len())));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64], out: &mut [f64]| {
        for ((o, vi), di) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = vi * di;
        }
    };

    let mut r = a.mul(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rel = norm(&r) / b_norm;
    if rel <= tol {
        return Ok(SolveStats { iterations: 0, residual: rel });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut p_hat);
        a.mul_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / b_norm <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(SolveStats { iterations: it, residual: true_residual(a, b, x, b_norm) });
        }
        precond(&s, &mut s_hat);
        a.mul_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / b_norm;
        if rel <= tol {
            return Ok(SolveStats { iterations: it, residual: true_residual(a, b, x, b_norm) });
        }
    }
    Err(Error::Numeric(format!("BiCGSTAB stagnated at relative residual {rel:e} after {max_iter} iterations")))
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], b_norm: f64) -> f64 {
    let ax = a.mul(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, yi)| bi - yi).collect();
    norm(&r) / b_norm
}

/// Thomas algorithm for a tridiagonal system: `lower[i] x[i−1] + diag[i] x[i]
/// + upper[i] x[i+1] = rhs[i]` (`lower[0]` and `upper[n−1]` are ignored).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::Argument("tridiagonal bands must have equal length".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    for i in 0..n {
        if i > 0 {
            denom = diag[i] - lower[i] * c[i - 1];
        }
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Numeric(format!("zero pivot in tridiagonal solve at row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { lower[i] * d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut b = CsrBuilder::with_capacity(n, 3 * n);
        for i in 0..n {
            if i > 0 {
                b.push(i - 1, -1.0);
            }
            b.push(i, 2.0 + shift);
            if i + 1 < n {
                b.push(i + 1, -1.0);
            }
            b.end_row();
        }
        b.build()
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = CsrBuilder::with_capacity(1, 2);
        b.push(0, 1.0);
        b.push(0, 2.5);
        b.end_row();
        let m = b.build();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.diagonal(), vec![3.5]);
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let n = 200;
        let mut b = CsrBuilder::with_capacity(n, 3 * n);
        for i in 0..n {
            if i > 0 {
                b.push(i - 1, -1.3);
            }
            b.push(i, 3.0);
            if i + 1 < n {
                b.push(i + 1, -0.7);
            }
            b.end_row();
        }
        let a = b.build();
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let rhs = a.mul(&exact);
        let mut x = vec![0.0; n];
        let stats = bicgstab(&a, &rhs, &mut x, 1e-12, 1000).unwrap();
        assert!(stats.residual <= 1e-12);
        for (xi, ei) in x.iter().zip(&exact) {
            assert_relative_eq!(xi, ei, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplacian_1d(10, 0.0);
        let mut x = vec![1.0; 10];
        let stats = bicgstab(&a, &[0.0; 10], &mut x, 1e-10, 10).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn thomas_matches_bicgstab() {
        let n = 50;
        let a = laplacian_1d(n, 0.1);
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let lower: Vec<f64> = (0..n).map(|i| if i > 0 { -1.0 } else { 0.0 }).collect();
        let upper: Vec<f64> = (0..n).map(|i| if i + 1 < n { -1.0 } else { 0.0 }).collect();
        let direct = solve_tridiagonal(&lower, &vec![2.1; n], &upper, &rhs).unwrap();
        let mut x = vec![0.0; n];
        bicgstab(&a, &rhs, &mut x, 1e-13, 500).unwrap();
        for (d, i) in direct.iter().zip(&x) {
            assert_relative_eq!(d, i, max_relative = 1e-9);
        }
        assert!(solve_tridiagonal(&[0.0], &[0.0], &[0.0], &[1.0]).is_err());
    }
}
