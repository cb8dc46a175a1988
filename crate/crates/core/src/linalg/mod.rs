//! Sparse storage and the direct solvers used by the sampler.
//!
//! Matrices are stored in compressed sparse column form. The structure
//! (column pointers and row indices) lives in a shared [`SparsityPattern`]
//! so that the many matrices built from one constraint system (Jacobians at
//! different points, their normal matrices) can be recognised as sharing a
//! pattern without comparing index arrays.

mod cholesky;
mod gram;
mod lu;
mod ordering;

use std::sync::Arc;

use thiserror::Error;

pub use cholesky::{cholesky, CholeskyFactor, CholeskySymbolic};
pub use gram::{normal_matrix, GramPlan};
pub use lu::{lu, LuFactor, LuSymbolic};
pub use ordering::minimum_degree;

/// Relative pivot floor below which a factorization is declared singular.
pub const PIVOT_FLOOR: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular or not positive definite (pivot {pivot:e} at step {step})")]
    Singular { step: usize, pivot: f64 },
    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be square, got {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("sparsity pattern does not match the symbolic analysis")]
    PatternMismatch,
}

/// Column-compressed structure of a sparse matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Validates and wraps raw CSC structure. Row indices in each column must
    /// be strictly increasing and in range.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
    ) -> Result<Self, LinalgError> {
        if col_ptr.len() != ncols + 1 {
            return Err(LinalgError::InvalidStructure(format!(
                "col_ptr has length {}, expected {}",
                col_ptr.len(),
                ncols + 1
            )));
        }
        if col_ptr[0] != 0 || col_ptr[ncols] != row_idx.len() {
            return Err(LinalgError::InvalidStructure(
                "col_ptr must start at 0 and end at nnz".into(),
            ));
        }
        for j in 0..ncols {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(LinalgError::InvalidStructure(format!(
                    "col_ptr decreases at column {j}"
                )));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            for (k, &r) in rows.iter().enumerate() {
                if r >= nrows {
                    return Err(LinalgError::InvalidStructure(format!(
                        "row index {r} out of range in column {j}"
                    )));
                }
                if k > 0 && rows[k - 1] >= r {
                    return Err(LinalgError::InvalidStructure(format!(
                        "row indices not strictly increasing in column {j}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// Row indices of column `j`.
    pub fn column(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    /// Position of entry `(i, j)` in the value array, if structurally present.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.col_ptr[j];
        self.column(j).binary_search(&i).ok().map(|k| start + k)
    }
}

/// A sparse matrix in compressed column form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_parts(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Result<Self, LinalgError> {
        if values.len() != pattern.nnz() {
            return Err(LinalgError::DimensionMismatch {
                expected: pattern.nnz(),
                got: values.len(),
            });
        }
        Ok(Self { pattern, values })
    }

    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        let pattern = SparsityPattern::new(nrows, ncols, col_ptr, row_idx)?;
        Self::from_parts(Arc::new(pattern), values)
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= nrows || j >= ncols {
                return Err(LinalgError::InvalidStructure(format!(
                    "triplet ({i}, {j}) out of range for {nrows}x{ncols}"
                )));
            }
        }
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("nonempty") += v;
                continue;
            }
            row_idx.push(i);
            values.push(v);
            col_ptr[j + 1] += 1;
            last = Some((i, j));
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Self::new(nrows, ncols, col_ptr, row_idx, values)
    }

    /// Dense row-major input; exact zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(LinalgError::DimensionMismatch {
                    expected: ncols,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }

    pub fn identity(n: usize) -> Self {
        let col_ptr = (0..=n).collect();
        let row_idx = (0..n).collect();
        Self::new(n, n, col_ptr, row_idx, vec![1.0; n]).expect("identity is well formed")
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Row indices and values of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.pattern.col_ptr[j]..self.pattern.col_ptr[j + 1];
        (&self.pattern.row_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |p| self.values[p])
    }

    /// True when both matrices have identical structure.
    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }

    /// `out = A x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.mul_vec_add(x, out);
    }

    /// `out += A x`
    pub fn mul_vec_add(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols(), "mul_vec: x has wrong length");
        assert_eq!(out.len(), self.nrows(), "mul_vec: out has wrong length");
        for j in 0..self.ncols() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out[i] += v * xj;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows()];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = Aᵀ x`
    pub fn tr_mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.nrows(), "tr_mul_vec: x has wrong length");
        assert_eq!(out.len(), self.ncols(), "tr_mul_vec: out has wrong length");
        for (j, o) in out.iter_mut().enumerate() {
            let (rows, vals) = self.column(j);
            *o = rows.iter().zip(vals).map(|(&i, &v)| v * x[i]).sum();
        }
    }

    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols()];
        self.tr_mul_vec_into(x, &mut out);
        out
    }

    /// Largest Euclidean norm over the columns.
    pub fn max_col_norm(&self) -> f64 {
        (0..self.ncols())
            .map(|j| self.column(j).1.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest absolute diagonal entry (square or not).
    pub fn max_abs_diag(&self) -> f64 {
        (0..self.ncols().min(self.nrows()))
            .map(|j| self.get(j, j).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols()]; self.nrows()];
        for j in 0..self.ncols() {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                dense[i][j] = v;
            }
        }
        dense
    }
}
