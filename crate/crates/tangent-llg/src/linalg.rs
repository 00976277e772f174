//! Compressed-row sparse matrices, triplet assembly, a GMRES solver with
//! Jacobi preconditioning for the nonsymmetric per-step systems, and a dense
//! LU fallback used as test oracle for small systems.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("triplet ({row},{col}) out of range for {nrows}x{ncols} matrix")]
    TripletOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix (pivot {pivot:e} at column {col})")]
    Singular { col: usize, pivot: f64 },
}

/// CSR matrix. Column indices are strictly increasing within each row;
/// duplicate triplets are summed during construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::TripletOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&i| (triplets[i].0, triplets[i].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            // row_ptr counts entries per row here; prefix-summed below
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Stored value at (r,c); zero if the position is not in the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// y += scale * A x
    pub fn matvec_acc(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] += scale * acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((self.col_idx[k], r, self.values[k]));
            }
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, &triplets).unwrap()
    }

    /// x^T A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        let mut total = 0.0;
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * y[self.col_idx[k]];
            }
            total += x[r] * acc;
        }
        total
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut dense = DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                dense.set(r, self.col_idx[k], self.values[k]);
            }
        }
        dense
    }
}

/// Anything that can act as the operator of an iterative solve. The reduced
/// tangent-space systems implement this without materializing T^T A T.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        assert_eq!(self.nrows, self.ncols);
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.get(r, r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves A x = b with GMRES and Jacobi (diagonal) preconditioning.
///
/// On convergence the true residual satisfies `||Ax-b|| <= tol * ||b||`.
/// Non-convergence after `maxit` iterations is reported, not an error.
pub fn solve(a: &SparseMatrix, b: &[f64], tol: f64, maxit: usize) -> (Vec<f64>, SolveReport) {
    solve_op(a, b, tol, maxit)
}

/// Right-preconditioned GMRES with modified Gram-Schmidt (one
/// reorthogonalization pass) and Givens rotations. Right preconditioning
/// keeps the monitored residual equal to the true residual of the original
/// system. Restarts only when the Krylov basis hits the internal cap.
pub fn solve_op(
    op: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> (Vec<f64>, SolveReport) {
    const GMRES_BASIS_CAP: usize = 500;
    let n = op.dim();
    assert_eq!(b.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return (
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let inv_diag: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let target = tol * b_norm;
    let m_inner = n.clamp(1, GMRES_BASIS_CAP);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut iterations = 0usize;
    let mut scratch = vec![0.0; n];

    let finish = |x: Vec<f64>, res: f64, iterations: usize| {
        let relative_residual = res / b_norm;
        (
            x,
            SolveReport {
                iterations,
                relative_residual,
                converged: res <= target,
            },
        )
    };

    loop {
        let beta = norm(&r);
        if beta <= target {
            return finish(x, beta, iterations);
        }
        if iterations >= maxit {
            return finish(x, beta, iterations);
        }
        // Arnoldi with the preconditioned operator A M^{-1}
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_inner + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h_cols: Vec<Vec<f64>> = Vec::with_capacity(m_inner);
        let mut cs: Vec<f64> = Vec::with_capacity(m_inner);
        let mut sn: Vec<f64> = Vec::with_capacity(m_inner);
        let mut g = vec![beta];
        let mut inner_size = 0;

        while inner_size < m_inner && iterations < maxit {
            let j = inner_size;
            iterations += 1;
            for i in 0..n {
                scratch[i] = inv_diag[i] * basis[j][i];
            }
            let mut w = vec![0.0; n];
            op.apply(&scratch, &mut w);
            let mut h = vec![0.0; j + 2];
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                h[i] = hij;
                for (wv, bv) in w.iter_mut().zip(&basis[i]) {
                    *wv -= hij * bv;
                }
            }
            // one reorthogonalization pass keeps the basis orthonormal at
            // tight tolerances
            for i in 0..=j {
                let corr = dot(&w, &basis[i]);
                h[i] += corr;
                for (wv, bv) in w.iter_mut().zip(&basis[i]) {
                    *wv -= corr * bv;
                }
            }
            let wn = norm(&w);
            h[j + 1] = wn;
            // apply accumulated Givens rotations to the new column
            for i in 0..j {
                let t0 = cs[i] * h[i] + sn[i] * h[i + 1];
                let t1 = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t0;
                h[i + 1] = t1;
            }
            let denom = (h[j] * h[j] + h[j + 1] * h[j + 1]).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (h[j] / denom, h[j + 1] / denom)
            };
            h[j] = denom;
            h[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            let g_next = -s * g[j];
            g[j] *= c;
            g.push(g_next);
            h_cols.push(h);
            inner_size += 1;
            let res_est = g[inner_size].abs();
            let lucky = wn == 0.0;
            if res_est <= 0.9 * target || lucky {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }

        if inner_size == 0 {
            return finish(x, beta, iterations);
        }
        // back substitution on the triangularized Hessenberg system
        let mut y = vec![0.0; inner_size];
        for i in (0..inner_size).rev() {
            let mut acc = g[i];
            for (jj, y_jj) in y.iter().enumerate().take(inner_size).skip(i + 1) {
                acc -= h_cols[jj][i] * y_jj;
            }
            y[i] = acc / h_cols[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += inv_diag[i] * basis[j][i] * yj;
            }
        }
        op.apply(&x, &mut scratch);
        for i in 0..n {
            r[i] = b[i] - scratch[i];
        }
        let res = norm(&r);
        if res <= target || iterations >= maxit {
            return finish(x, res, iterations);
        }
    }
}

/// Row-major dense matrix with LU solve; the direct fallback for systems of
/// a few hundred unknowns and the oracle for the iterative path.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.ncols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.ncols + c] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.ncols + c] += v;
    }

    /// Solves A x = b by LU decomposition with partial pivoting.
    pub fn lu_solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.nrows != self.ncols {
            return Err(LinalgError::DimensionMismatch(format!(
                "dense solve needs a square matrix, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        if b.len() != self.nrows {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs length {} does not match matrix size {}",
                b.len(),
                self.nrows
            )));
        }
        let n = self.nrows;
        let mut lu = self.data.clone();
        let mut x = b.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut piv_val = lu[perm[col] * n + col].abs();
            for r in (col + 1)..n {
                let v = lu[perm[r] * n + col].abs();
                if v > piv_val {
                    piv = r;
                    piv_val = v;
                }
            }
            if piv_val < 1e-300 {
                return Err(LinalgError::Singular {
                    col,
                    pivot: piv_val,
                });
            }
            perm.swap(col, piv);
            let prow = perm[col];
            let d = lu[prow * n + col];
            for r in (col + 1)..n {
                let row = perm[r];
                let f = lu[row * n + col] / d;
                lu[row * n + col] = f;
                for c in (col + 1)..n {
                    lu[row * n + c] -= f * lu[prow * n + c];
                }
            }
        }
        // forward substitution on permuted rows
        let mut y = vec![0.0; n];
        for r in 0..n {
            let row = perm[r];
            let mut acc = x[row];
            for c in 0..r {
                acc -= lu[row * n + c] * y[c];
            }
            y[r] = acc;
        }
        for r in (0..n).rev() {
            let row = perm[r];
            let mut acc = y[r];
            for c in (r + 1)..n {
                acc -= lu[row * n + c] * x[c];
            }
            x[r] = acc / lu[row * n + r];
        }
        Ok(x)
    }
}
