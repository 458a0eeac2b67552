//! Symmetric sparse matrices and SPD linear solves.
//!
//! Matrices store the upper triangle (diagonal included) in CSR form, so
//! symmetry is exact by construction rather than a property to be checked.
//! Problem sizes here are desk scale, which keeps a dense Cholesky behind
//! the solve path robust; iterative refinement pushes residuals to the
//! requested tolerance and a conjugate-gradient fallback covers the rare
//! case where refinement stalls.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Upper-triangle sparsity pattern shared by all matrices on one mesh.
#[derive(Debug)]
pub struct SymPattern {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl SymPattern {
    /// Builds a pattern from (i, j) index pairs; orientation and duplicates
    /// are normalized away and every diagonal entry is kept present.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Arc<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); dim];
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(i);
        }
        for (i, j) in entries {
            assert!(i < dim && j < dim, "pattern index out of range");
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            rows[r].push(c);
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        Arc::new(SymPattern { dim, row_ptr, cols })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let span = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        span.binary_search(&c).ok().map(|k| self.row_ptr[r] + k)
    }
}

/// Symmetric matrix over a shared [`SymPattern`].
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pattern: Arc<SymPattern>,
    values: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(pattern: Arc<SymPattern>) -> Self {
        let n = pattern.nnz();
        SymMatrix {
            pattern,
            values: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim
    }

    pub fn pattern(&self) -> &Arc<SymPattern> {
        &self.pattern
    }

    /// Accumulates `v` at (i, j); the mirrored entry is implied.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let idx = self
            .pattern
            .index(i, j)
            .expect("entry outside sparsity pattern");
        self.values[idx] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.index(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        y.fill(0.0);
        for i in 0..self.dim() {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.cols[k];
                let v = self.values[k];
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.cols[k];
                a[(i, j)] = self.values[k];
                a[(j, i)] = self.values[k];
            }
        }
        a
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        SymMatrix {
            pattern: Arc::clone(&self.pattern),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += alpha * other`; both matrices must share one pattern.
    pub fn axpy(&mut self, alpha: f64, other: &SymMatrix) {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern),
            "axpy requires a shared pattern"
        );
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v += alpha * w;
        }
    }

    pub fn add_diag(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.dim());
        for (i, v) in d.iter().enumerate() {
            self.add(i, i, *v);
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Full (symmetric) row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.cols[k];
                s[i] += self.values[k];
                if j != i {
                    s[j] += self.values[k];
                }
            }
        }
        s
    }

    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        let mut q = 0.0;
        for i in 0..self.dim() {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.cols[k];
                let term = self.values[k] * x[i] * x[j];
                q += if j == i { term } else { 2.0 * term };
            }
        }
        q
    }

    pub fn inf_norm(&self) -> f64 {
        let mut s = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.cols[k];
                s[i] += self.values[k].abs();
                if j != i {
                    s[j] += self.values[k].abs();
                }
            }
        }
        s.into_iter().fold(0.0, f64::max)
    }
}

/// Inner product induced by a symmetric positive definite matrix.
pub fn weighted_inner(m: &SymMatrix, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    m.matvec(x).dot(y)
}

/// Norm induced by a symmetric positive definite matrix.
pub fn weighted_norm(m: &SymMatrix, x: &DVector<f64>) -> f64 {
    m.quad_form(x).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    /// Refinement (and, if triggered, conjugate gradient) iterations.
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
}

/// Cholesky-backed SPD solver with iterative refinement and CG fallback.
pub struct SpdSolver {
    chol: Cholesky<f64, Dyn>,
    matrix: SymMatrix,
    tol: f64,
}

impl SpdSolver {
    pub fn new(matrix: &SymMatrix, tol: f64) -> Result<Self> {
        let chol = Cholesky::new(matrix.to_dense())
            .ok_or_else(|| Error::LinearSolve("matrix is not positive definite".into()))?;
        Ok(SpdSolver {
            chol,
            matrix: matrix.clone(),
            tol,
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<(DVector<f64>, SolveStats)> {
        let bnorm = b.norm();
        let mut x = self.chol.solve(b);
        let mut iterations = 0;
        let mut residual = self.relative_residual(b, &x, bnorm);
        while residual > self.tol && iterations < 4 {
            let r = b - self.matrix.matvec(&x);
            x += self.chol.solve(&r);
            iterations += 1;
            residual = self.relative_residual(b, &x, bnorm);
        }
        if residual > self.tol {
            let (xc, cg_iters, cg_res) =
                conjugate_gradient(&self.matrix, b, &x, self.tol, 20 * self.matrix.dim());
            x = xc;
            iterations += cg_iters;
            residual = cg_res;
        }
        if !residual.is_finite() || residual > self.tol * 10.0 {
            return Err(Error::LinearSolve(format!(
                "relative residual {residual:.3e} above tolerance {:.3e}",
                self.tol
            )));
        }
        Ok((
            x,
            SolveStats {
                iterations,
                residual,
            },
        ))
    }

    fn relative_residual(&self, b: &DVector<f64>, x: &DVector<f64>, bnorm: f64) -> f64 {
        let r = b - self.matrix.matvec(x);
        if bnorm > 0.0 {
            r.norm() / bnorm
        } else {
            r.norm()
        }
    }
}

/// Plain conjugate gradient, warm-started at `x0`.
pub fn conjugate_gradient(
    a: &SymMatrix,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> (DVector<f64>, usize, f64) {
    let bnorm = b.norm().max(f64::MIN_POSITIVE);
    let mut x = x0.clone();
    let mut r = b - a.matvec(&x);
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let mut iters = 0;
    while rs.sqrt() / bnorm > tol && iters < max_iter {
        let ap = a.matvec(&p);
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            break;
        }
        let alpha = rs / denom;
        x += alpha * &p;
        r -= alpha * &ap;
        let rs_next = r.dot(&r);
        p = &r + (rs_next / rs) * p;
        rs = rs_next;
        iters += 1;
    }
    let res = (b - a.matvec(&x)).norm() / bnorm;
    (x, iters, res)
}
