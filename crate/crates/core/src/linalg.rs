//! Sparse storage and the linear solvers behind the Newton step.
//!
//! Unknowns are ordered layer by layer in time, so the linearised operator
//! is block tridiagonal with `N^d × N^d` blocks. The direct path factors
//! that structure exactly (block LU, partial pivoting inside each diagonal
//! block). Large 2D layers go to BiCGSTAB with a Jacobi preconditioner.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("diagonal block {block} is numerically singular")]
    Singular { block: usize },
    #[error("iterative solve stalled after {iters} iterations (relative residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let nrows = rows.len();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < ncols);
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].binary_search(&c).ok().map(|i| self.values[span.start + i])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// Every stored `(r, c)` has a stored `(c, r)`.
    pub fn pattern_is_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|r| self.row(r).all(|(c, _)| self.get(c, r).is_some()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.get(r, r).unwrap_or(0.0)).collect()
    }

    /// All entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }
}

/// How to solve the Newton system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Block LU when layers are small enough, BiCGSTAB otherwise or when
    /// a diagonal block turns out singular.
    #[default]
    Auto,
    Direct,
    Iterative,
}

/// Largest layer size the direct path is used for under [`LinearSolver::Auto`].
pub const DIRECT_LAYER_LIMIT: usize = 400;

pub fn solve(matrix: &CsrMatrix, rhs: &[f64], block: usize, method: LinearSolver) -> Result<Vec<f64>, LinalgError> {
    match method {
        LinearSolver::Direct => block_tridiagonal_solve(matrix, rhs, block),
        LinearSolver::Iterative => bicgstab(matrix, rhs, 1e-13, 20 * matrix.nrows().max(50)),
        LinearSolver::Auto => {
            if block <= DIRECT_LAYER_LIMIT {
                match block_tridiagonal_solve(matrix, rhs, block) {
                    Err(LinalgError::Singular { block: b }) => {
                        log::warn!("block {b} singular, falling back to BiCGSTAB");
                        bicgstab(matrix, rhs, 1e-13, 20 * matrix.nrows().max(50))
                    }
                    other => other,
                }
            } else {
                bicgstab(matrix, rhs, 1e-13, 20 * matrix.nrows().max(50))
            }
        }
    }
}

/// Block LU for a block-tridiagonal matrix with square blocks of size `m`.
pub fn block_tridiagonal_solve(matrix: &CsrMatrix, rhs: &[f64], m: usize) -> Result<Vec<f64>, LinalgError> {
    let n = matrix.nrows();
    assert_eq!(n % m, 0, "row count must be a multiple of the block size");
    assert_eq!(rhs.len(), n);
    let blocks = n / m;

    // off-diagonal couplings stay sparse: (local row, local col, value)
    let mut lower: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); blocks];
    let mut upper: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); blocks];
    let mut diag: Vec<DMatrix<f64>> = Vec::with_capacity(blocks);
    for p in 0..blocks {
        let mut d = DMatrix::<f64>::zeros(m, m);
        for lr in 0..m {
            for (c, v) in matrix.row(p * m + lr) {
                let q = c / m;
                let lc = c % m;
                if q == p {
                    d[(lr, lc)] += v;
                } else if q + 1 == p {
                    lower[p].push((lr, lc, v));
                } else if q == p + 1 {
                    upper[p].push((lr, lc, v));
                } else {
                    panic!("entry ({}, {c}) outside the block tridiagonal band", p * m + lr);
                }
            }
        }
        diag.push(d);
    }

    let mut factors = Vec::with_capacity(blocks);
    // w[p] = D_p^{-1} U_p
    let mut w: Vec<DMatrix<f64>> = Vec::with_capacity(blocks);
    let mut g: Vec<DVector<f64>> = Vec::with_capacity(blocks);
    for p in 0..blocks {
        let mut d = std::mem::replace(&mut diag[p], DMatrix::zeros(0, 0));
        let mut b = DVector::from_column_slice(&rhs[p * m..(p + 1) * m]);
        if p > 0 {
            let prev_w = &w[p - 1];
            let prev_g: &DVector<f64> = &g[p - 1];
            for &(lr, lc, v) in &lower[p] {
                for j in 0..m {
                    d[(lr, j)] -= v * prev_w[(lc, j)];
                }
                b[lr] -= v * prev_g[lc];
            }
        }
        let lu = d.lu();
        if !well_conditioned(&lu) {
            return Err(LinalgError::Singular { block: p });
        }
        let gp = lu.solve(&b).ok_or(LinalgError::Singular { block: p })?;
        if p + 1 < blocks {
            let mut up = DMatrix::<f64>::zeros(m, m);
            for &(lr, lc, v) in &upper[p] {
                up[(lr, lc)] += v;
            }
            lu.solve_mut(&mut up);
            w.push(up);
        }
        g.push(gp);
        factors.push(lu);
    }

    let mut x = vec![0.0; n];
    let mut next: Option<DVector<f64>> = None;
    for p in (0..blocks).rev() {
        let mut xp = g[p].clone();
        if let Some(xn) = &next {
            xp -= &w[p] * xn;
        }
        x[p * m..(p + 1) * m].copy_from_slice(xp.as_slice());
        next = Some(xp);
    }
    Ok(x)
}

fn well_conditioned(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    lo.is_finite() && hi > 0.0 && lo > 1e-14 * hi
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB; stops at `‖r‖ ≤ rel_tol·‖b‖`.
pub fn bicgstab(matrix: &CsrMatrix, rhs: &[f64], rel_tol: f64, max_iters: usize) -> Result<Vec<f64>, LinalgError> {
    let n = rhs.len();
    let inv_diag: Vec<f64> =
        matrix.diagonal().iter().map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(a, b)| a * b).collect() };
    let b_norm = norm(rhs);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut best = 1.0;
    for iter in 0..max_iters {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(LinalgError::NoConvergence { iters: iter, residual: norm(&r) / b_norm });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        v = matrix.mul_vec(&p_hat);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) <= rel_tol * b_norm {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(x);
        }
        let s_hat = precond(&s);
        let t = matrix.mul_vec(&s_hat);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm(&r) / b_norm;
        best = rel.min(best);
        if rel <= rel_tol {
            return Ok(x);
        }
        if !rel.is_finite() || omega == 0.0 {
            return Err(LinalgError::NoConvergence { iters: iter + 1, residual: rel });
        }
    }
    Err(LinalgError::NoConvergence { iters: max_iters, residual: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block_tridiagonal(blocks: usize, m: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = blocks * m;
        let rows = (0..n)
            .map(|r| {
                let p = r / m;
                let mut row = vec![(r, 8.0 + rng.random::<f64>())];
                for c in p.saturating_sub(1) * m..((p + 2) * m).min(n) {
                    if c != r && rng.random::<f64>() < 0.3 {
                        row.push((c, rng.random::<f64>() - 0.5));
                    }
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        a.mul_vec(x).iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn block_lu_matches_dense_lu() {
        let a = random_block_tridiagonal(6, 5, 7);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = block_tridiagonal_solve(&a, &b, 5).unwrap();
        let mut dense = DMatrix::<f64>::zeros(30, 30);
        for (r, c, v) in a.triplets() {
            dense[(r, c)] = v;
        }
        let xd = dense.lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for (p, q) in x.iter().zip(xd.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
        assert!(residual(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn bicgstab_solves_diagonally_dominant_system() {
        let a = random_block_tridiagonal(8, 6, 11);
        let b: Vec<f64> = (0..48).map(|i| 1.0 + (i as f64).cos()).collect();
        let x = bicgstab(&a, &b, 1e-13, 1000).unwrap();
        assert!(residual(&a, &x, &b) < 1e-10);
    }

    #[test]
    fn singular_block_is_reported() {
        let rows = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)], vec![(2, 1.0)], vec![(3, 1.0)]];
        let a = CsrMatrix::from_rows(4, rows);
        assert_eq!(block_tridiagonal_solve(&a, &[1.0; 4], 2), Err(LinalgError::Singular { block: 0 }));
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_rows(2, vec![vec![(1, 1.0), (0, 2.0), (1, 0.5)], vec![(1, 1.0)]]);
        assert_eq!(a.get(0, 1), Some(1.5));
        assert_eq!(a.nnz(), 3);
        assert!(!a.pattern_is_symmetric());
    }
}
