//! Compressed sparse rows and preconditioned conjugate gradients.
//!
//! Reductions are sequential so results do not depend on the thread count;
//! only row-wise products run in parallel.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows below this size are multiplied serially; the rayon split costs more
/// than it saves on small systems.
const PAR_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// columns within a row are sorted.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(
                r < rows && c < cols,
                "triplet ({r}, {c}) outside {rows}x{cols}"
            );
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            s += self.values[k] * x[self.col_idx[k]];
        }
        s
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        if self.rows >= PAR_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(r, yr)| *yr = self.row_dot(r, x));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = self.row_dot(r, x);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `Aᵀ x` without forming the transpose.
    pub fn transpose_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (r, xr) in x.iter().enumerate() {
            if *xr != 0.0 {
                for (c, v) in self.row(r) {
                    y[c] += v * xr;
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.cols, self.rows, t)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).map(|(_, v)| v).sum())
            .collect()
    }

    /// Largest absolute row sum (the induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            out.extend(self.row(r).map(|(c, v)| (r, c, v)));
        }
        out
    }

    /// One `row col value` line per stored entry, in row-major order.
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::new();
        for (r, c, v) in self.triplets() {
            writeln!(s, "{r} {c} {v:e}").unwrap();
        }
        s
    }
}

/// Symmetric linear operator for [`pcg`].
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgParams {
    /// Relative tolerance on `max|r| / max|b|`.
    pub tol: f64,
    /// Absolute floor on `max|r|`, for right-hand sides that are mostly roundoff.
    pub abs_tol: f64,
    pub max_iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final `max|b - A x| / max|b|` from an explicit residual evaluation.
    pub residual: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Removes the component of `x` along `v`.
pub fn project_out(x: &mut [f64], v: &[f64]) {
    let vv = dot(v, v);
    if vv > 0.0 {
        let c = dot(x, v) / vv;
        x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= c * vi);
    }
}

/// Preconditioner `z = P⁻¹ r` for [`pcg_with`]; must be symmetric positive definite.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Inverse of the diagonal; zero or negative entries act as one.
#[derive(Clone, Debug)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv_diag: diag
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Reverse Cuthill-McKee ordering of a structurally symmetric matrix:
/// `perm[k]` is the original index placed at position `k`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.rows;
    let degree: Vec<usize> = (0..n).map(|r| a.row_ptr[r + 1] - a.row_ptr[r]).collect();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&r| (degree[r], r));
    let mut neighbours = Vec::new();
    for s in starts {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut head = order.len();
        order.push(s);
        while head < order.len() {
            let r = order[head];
            head += 1;
            neighbours.clear();
            neighbours.extend(a.row(r).map(|(c, _)| c).filter(|&c| !seen[c]));
            neighbours.sort_by_key(|&c| (degree[c], c));
            for &c in &neighbours {
                seen[c] = true;
                order.push(c);
            }
        }
    }
    order.reverse();
    order
}

/// Sparse Cholesky factor of `A + ε diag(A)` in reverse Cuthill-McKee order.
///
/// Used as a preconditioner for semidefinite systems whose consistent
/// right-hand sides make the shift harmless: CG removes its effect in a few
/// iterations while the factor absorbs the clustered small eigenvalues.
#[derive(Debug)]
pub struct ShiftedCholesky {
    perm: Vec<usize>,
    factor: nalgebra_sparse::factorization::CscCholesky<f64>,
}

impl ShiftedCholesky {
    pub fn new(a: &SparseMatrix, shift: f64) -> Result<Self> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (k, &r) in perm.iter().enumerate() {
            inv[r] = k;
        }
        let mut t = Vec::with_capacity(a.nnz() + n);
        for r in 0..n {
            for (c, v) in a.row(r) {
                t.push((inv[r], inv[c], v));
            }
            let d = a.get(r, r);
            // empty rows become identity rows
            t.push((inv[r], inv[r], if d > 0.0 { shift * d } else { 1.0 }));
        }
        let m = SparseMatrix::from_triplets(n, n, t);
        // symmetric, so the CSR arrays are also its CSC arrays
        let csc =
            nalgebra_sparse::CscMatrix::try_from_csc_data(n, n, m.row_ptr, m.col_idx, m.values)
                .map_err(|e| Error::Validation(format!("sparse factor input: {e}")))?;
        let factor = nalgebra_sparse::factorization::CscCholesky::factor(&csc).map_err(|_| {
            Error::Indefinite {
                curvature: f64::NAN,
            }
        })?;
        Ok(Self { perm, factor })
    }

    /// Nonzeros in the triangular factor.
    pub fn factor_nnz(&self) -> usize {
        self.factor.l().nnz()
    }
}

impl Preconditioner for ShiftedCholesky {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut y =
            nalgebra::DVector::from_iterator(self.perm.len(), self.perm.iter().map(|&p| r[p]));
        self.factor.solve_mut(&mut y);
        for (k, &p) in self.perm.iter().enumerate() {
            z[p] = y[k];
        }
    }
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// semidefinite operator. `x` holds the initial guess and receives the result.
///
/// With `null_vector` set the right-hand side and every residual are kept
/// orthogonal to it, which solves the consistent part of a singular system.
/// Negative curvature along a search direction is reported as an error.
pub fn pcg<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    diag: &[f64],
    params: CgParams,
    null_vector: Option<&[f64]>,
) -> Result<CgReport> {
    assert_eq!(diag.len(), a.dim());
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    pcg_with(a, b, x, &Jacobi::new(diag), scale, params, null_vector)
}

/// [`pcg`] with any preconditioner. `curvature_scale` (typically the largest
/// diagonal entry) sets the threshold below which curvature counts as negative.
pub fn pcg_with<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    precond: &dyn Preconditioner,
    curvature_scale: f64,
    params: CgParams,
    null_vector: Option<&[f64]>,
) -> Result<CgReport> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);

    let mut rhs = b.to_vec();
    if let Some(v) = null_vector {
        project_out(&mut rhs, v);
    }
    let b_norm = norm_inf(&rhs);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = (params.tol * b_norm).max(params.abs_tol);

    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    let true_residual = |x: &[f64], ax: &mut [f64], r: &mut [f64]| {
        a.apply(x, ax);
        for i in 0..n {
            r[i] = rhs[i] - ax[i];
        }
        if let Some(v) = null_vector {
            project_out(r, v);
        }
    };

    true_residual(x, &mut ax, &mut r);
    let mut iterations = 0;
    loop {
        if norm_inf(&r) <= target {
            break;
        }
        // (re)start from the current residual
        precond.apply(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut converged = false;
        while iterations < params.max_iters {
            iterations += 1;
            a.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            let pp = dot(&p, &p);
            if pap < -1e-12 * pp * curvature_scale {
                return Err(Error::Indefinite {
                    curvature: pap / pp,
                });
            }
            if pap <= 0.0 {
                // search direction in the null space: no further progress
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if let Some(v) = null_vector {
                project_out(&mut r, v);
            }
            if norm_inf(&r) <= target {
                converged = true;
                break;
            }
            precond.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        true_residual(x, &mut ax, &mut r);
        if norm_inf(&r) <= target {
            break;
        }
        if !converged || iterations >= params.max_iters {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm_inf(&r) / b_norm,
            });
        }
    }
    Ok(CgReport {
        iterations,
        residual: norm_inf(&r) / b_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian_1d(n: usize, shift: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (0, 1, 0.5)],
        );
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 2.5);
        assert_eq!(m.triplets(), vec![(0, 1, 2.5), (1, 0, 3.0), (1, 2, 1.0)]);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![2.5, 4.0]);
        let t = m.transpose();
        assert_eq!(t.get(2, 1), 1.0);
        assert_eq!(t.rows(), 3);
        assert_eq!(m.to_triplet_text().lines().count(), 3);
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 200;
        let a = laplacian_1d(n, 0.01);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.mul_vec(&xs);
        let mut x = vec![0.0; n];
        let rep = pcg(
            &a,
            &b,
            &mut x,
            &a.diagonal(),
            CgParams {
                tol: 1e-12,
                abs_tol: 0.0,
                max_iters: 10 * n,
            },
            None,
        )
        .unwrap();
        assert!(rep.residual <= 1e-12);
        let err = x
            .iter()
            .zip(&xs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn cg_handles_consistent_singular_system() {
        // pure Neumann Laplacian: constants are the null space
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([
                (i, i, 1.0),
                (i + 1, i + 1, 1.0),
                (i, i + 1, -1.0),
                (i + 1, i, -1.0),
            ]);
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let ones = vec![1.0; n];
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos() + 3.0).collect();
        let mut x = vec![0.0; n];
        let params = CgParams {
            tol: 1e-10,
            abs_tol: 0.0,
            max_iters: 1000,
        };
        let rep = pcg(&a, &b, &mut x, &a.diagonal(), params, Some(&ones)).unwrap();
        assert!(rep.residual <= 1e-10);
    }

    #[test]
    fn cg_reports_indefinite_operator() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        let mut x = vec![0.0; 2];
        let params = CgParams {
            tol: 1e-12,
            abs_tol: 0.0,
            max_iters: 10,
        };
        let err = pcg(&a, &[0.0, 1.0], &mut x, &[1.0, 1.0], params, None).unwrap_err();
        assert!(matches!(err, Error::Indefinite { .. }));
    }

    #[test]
    fn cg_reports_iteration_limit() {
        let a = laplacian_1d(100, 0.0);
        let b = vec![1.0; 100];
        let mut x = vec![0.0; 100];
        let params = CgParams {
            tol: 1e-14,
            abs_tol: 0.0,
            max_iters: 3,
        };
        let err = pcg(&a, &b, &mut x, &a.diagonal(), params, None).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 3, .. }));
    }

    proptest! {
        #[test]
        fn transpose_is_an_involution(entries in prop::collection::vec((0usize..6, 0usize..4, -5.0f64..5.0), 0..30)) {
            let m = SparseMatrix::from_triplets(6, 4, entries);
            prop_assert_eq!(m.transpose().transpose(), m.clone());
            let x = [1.0, -2.0, 0.5, 3.0];
            let y = [0.3, 1.0, -1.0, 2.0, 0.0, 0.7];
            let lhs = dot(&m.mul_vec(&x), &y);
            let rhs = dot(&x, &m.transpose().mul_vec(&y));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn rcm_is_a_permutation_and_narrows_the_band() {
        // 2D Laplacian numbered row-major on a wide strip
        let (nx, ny) = (40, 5);
        let id = |i: usize, j: usize| j * nx + i;
        let mut t = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                t.push((id(i, j), id(i, j), 4.0));
                if i > 0 {
                    t.push((id(i, j), id(i - 1, j), -1.0));
                    t.push((id(i - 1, j), id(i, j), -1.0));
                }
                if j > 0 {
                    t.push((id(i, j), id(i, j - 1), -1.0));
                    t.push((id(i, j - 1), id(i, j), -1.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(nx * ny, nx * ny, t);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..nx * ny).collect::<Vec<_>>());
        let mut pos = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            pos[p] = k;
        }
        let band = a
            .triplets()
            .iter()
            .map(|&(r, c, _)| pos[r].abs_diff(pos[c]))
            .max()
            .unwrap();
        assert!(band <= 2 * ny, "{band}");
    }

    #[test]
    fn shifted_cholesky_solves_semidefinite_systems() {
        // singular 1D Neumann Laplacian: consistent right-hand side
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            let d = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let chol = ShiftedCholesky::new(&a, 1e-10).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let ones = vec![1.0; n];
        let mut x = vec![0.0; n];
        let params = CgParams {
            tol: 1e-12,
            abs_tol: 0.0,
            max_iters: 20,
        };
        let rep = pcg_with(&a, &b, &mut x, &chol, 2.0, params, Some(&ones)).unwrap();
        assert!(rep.iterations <= 5, "{rep:?}");
        let mut r = b.clone();
        project_out(&mut r, &ones);
        let ax = a.mul_vec(&x);
        let res = r
            .iter()
            .zip(&ax)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(res <= 1e-11 * norm_inf(&r));
    }

    #[test]
    fn transpose_mul_matches_transpose() {
        let a = SparseMatrix::from_triplets(
            3,
            4,
            vec![(0, 1, 2.0), (2, 3, -1.0), (1, 0, 0.5), (2, 1, 3.0)],
        );
        let x = [1.0, -2.0, 0.25];
        assert_eq!(a.transpose_mul(&x), a.transpose().mul_vec(&x));
    }
}
