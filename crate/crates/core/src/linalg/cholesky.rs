//! Up-looking sparse Cholesky factorization with a reusable symbolic phase.
//!
//! The symbolic analysis fixes the fill-reducing permutation, the
//! elimination tree and the complete structure of `L`, including the
//! topological order in which each row of `L` is computed. Numeric
//! factorizations of any matrix with the same pattern then only move values.

use std::sync::Arc;

use super::ordering::{invert, minimum_degree};
use super::{LinalgError, SparseMatrix, SparsityPattern, PIVOT_FLOOR};

const NONE: usize = usize::MAX;

/// Structure shared by every Cholesky factorization of one sparsity pattern.
#[derive(Debug)]
pub struct CholeskySymbolic {
    n: usize,
    input: Arc<SparsityPattern>,
    /// `perm[new] = old`
    perm: Vec<usize>,
    parent: Vec<usize>,
    /// Upper triangle of `P A Pᵀ`: column pointers, row indices and the
    /// position of each entry in the input value array.
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    c_src: Vec<usize>,
    l_col_ptr: Vec<usize>,
    l_row_idx: Vec<usize>,
    /// For row `k` of `L`: columns in topological order and the slot of
    /// `L[k, j]` in the value array.
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    row_slots: Vec<usize>,
}

impl CholeskySymbolic {
    /// Analyses a symmetric pattern (both triangles stored) using a
    /// minimum-degree ordering.
    pub fn analyze(pattern: &Arc<SparsityPattern>) -> Result<Self, LinalgError> {
        let perm = minimum_degree(pattern);
        Self::with_permutation(pattern, perm)
    }

    /// Analyses a symmetric pattern under a caller-supplied ordering
    /// (`perm[new] = old`).
    pub fn with_permutation(
        pattern: &Arc<SparsityPattern>,
        perm: Vec<usize>,
    ) -> Result<Self, LinalgError> {
        let n = pattern.ncols();
        if pattern.nrows() != n {
            return Err(LinalgError::NotSquare {
                nrows: pattern.nrows(),
                ncols: n,
            });
        }
        if perm.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let pinv = invert(&perm);

        // Upper triangle of the permuted matrix.
        let mut entries: Vec<(usize, usize, usize)> = Vec::with_capacity(pattern.nnz() / 2 + n);
        for j in 0..n {
            let start = pattern.col_ptr()[j];
            for (k, &i) in pattern.column(j).iter().enumerate() {
                let (pi, pj) = (pinv[i], pinv[j]);
                if pi <= pj {
                    entries.push((pj, pi, start + k));
                }
            }
        }
        entries.sort_unstable();
        let mut c_col_ptr = vec![0usize; n + 1];
        let mut c_row_idx = Vec::with_capacity(entries.len());
        let mut c_src = Vec::with_capacity(entries.len());
        for &(col, row, src) in &entries {
            c_col_ptr[col + 1] += 1;
            c_row_idx.push(row);
            c_src.push(src);
        }
        for j in 0..n {
            c_col_ptr[j + 1] += c_col_ptr[j];
        }

        // Elimination tree of the permuted matrix.
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &row in &c_row_idx[c_col_ptr[k]..c_col_ptr[k + 1]] {
                let mut i = row;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // Row patterns of L via elimination-tree reaches.
        let mut row_ptr = vec![0usize; n + 1];
        let mut row_cols = Vec::new();
        let mut flag = vec![NONE; n];
        let mut path = Vec::with_capacity(n);
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let reach = ereach(&c_col_ptr, &c_row_idx, k, &parent, &mut flag, &mut path);
            for &j in &reach {
                counts[j] += 1;
            }
            row_cols.extend_from_slice(&reach);
            row_ptr[k + 1] = row_cols.len();
        }
        let mut l_col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            l_col_ptr[j + 1] = l_col_ptr[j] + counts[j];
        }
        let mut l_row_idx = vec![0usize; l_col_ptr[n]];
        let mut next = l_col_ptr[..n].to_vec();
        let mut row_slots = vec![0usize; row_cols.len()];
        for k in 0..n {
            // Rows are appended in increasing k, so the diagonal comes first
            // and each column stays sorted.
            l_row_idx[next[k]] = k;
            next[k] += 1;
            for p in row_ptr[k]..row_ptr[k + 1] {
                let j = row_cols[p];
                l_row_idx[next[j]] = k;
                row_slots[p] = next[j];
                next[j] += 1;
            }
        }

        Ok(Self {
            n,
            input: Arc::clone(pattern),
            perm,
            parent,
            c_col_ptr,
            c_row_idx,
            c_src,
            l_col_ptr,
            l_row_idx,
            row_ptr,
            row_cols,
            row_slots,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Fill-reducing permutation, `perm[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn elimination_tree(&self) -> &[usize] {
        &self.parent
    }

    /// Number of structural nonzeros in `L`.
    pub fn factor_nnz(&self) -> usize {
        self.l_row_idx.len()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.input
    }

    pub fn matches(&self, a: &SparseMatrix) -> bool {
        Arc::ptr_eq(&self.input, a.pattern()) || *self.input == **a.pattern()
    }

    /// Numeric factorization of `a`, which must have the analysed pattern.
    pub fn factorize(self: &Arc<Self>, a: &SparseMatrix) -> Result<CholeskyFactor, LinalgError> {
        if !self.matches(a) {
            return Err(LinalgError::PatternMismatch);
        }
        let n = self.n;
        let av = a.values();
        let max_diag = a.max_abs_diag();
        let floor = PIVOT_FLOOR * max_diag;
        let lp = &self.l_col_ptr;
        let li = &self.l_row_idx;
        let mut lx = vec![0.0; li.len()];
        let mut x = vec![0.0; n];

        for k in 0..n {
            for p in self.c_col_ptr[k]..self.c_col_ptr[k + 1] {
                x[self.c_row_idx[p]] = av[self.c_src[p]];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for p in self.row_ptr[k]..self.row_ptr[k + 1] {
                let j = self.row_cols[p];
                let slot = self.row_slots[p];
                let lkj = x[j] / lx[lp[j]];
                x[j] = 0.0;
                for q in lp[j] + 1..slot {
                    x[li[q]] -= lx[q] * lkj;
                }
                d -= lkj * lkj;
                lx[slot] = lkj;
            }
            if !(d > 0.0) || d <= floor {
                return Err(LinalgError::Singular { step: k, pivot: d });
            }
            lx[lp[k]] = d.sqrt();
        }
        let inv_diag = lp[..n].iter().map(|&p| 1.0 / lx[p]).collect();
        Ok(CholeskyFactor {
            symbolic: Arc::clone(self),
            values: lx,
            inv_diag,
        })
    }
}

/// Pattern of row `k` of `L` in topological order.
fn ereach(
    c_col_ptr: &[usize],
    c_row_idx: &[usize],
    k: usize,
    parent: &[usize],
    flag: &mut [usize],
    path: &mut Vec<usize>,
) -> Vec<usize> {
    let mut stack: Vec<usize> = Vec::new();
    flag[k] = k;
    for &row in &c_row_idx[c_col_ptr[k]..c_col_ptr[k + 1]] {
        if row > k {
            continue;
        }
        let mut i = row;
        path.clear();
        while flag[i] != k {
            path.push(i);
            flag[i] = k;
            i = parent[i];
        }
        // Each path is pushed so that the finished stack, read back to
        // front, lists descendants before ancestors.
        stack.extend(path.iter().rev());
    }
    stack.reverse();
    stack
}

/// `P A Pᵀ = L Lᵀ` for a symmetric positive definite `A`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: Arc<CholeskySymbolic>,
    values: Vec<f64>,
    /// `1 / L[k, k]`, so that solves multiply instead of divide.
    inv_diag: Vec<f64>,
}

impl CholeskyFactor {
    pub fn order(&self) -> usize {
        self.symbolic.n
    }

    pub fn symbolic(&self) -> &Arc<CholeskySymbolic> {
        &self.symbolic
    }

    /// `L[k, k]` for `k` in elimination order.
    pub fn diag(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.symbolic.l_col_ptr[..self.symbolic.n]
            .iter()
            .map(move |&p| self.values[p])
    }

    /// `Σ log L[k, k]`, i.e. half the log-determinant of `A`.
    pub fn log_diag_sum(&self) -> f64 {
        self.diag().map(f64::ln).sum()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let mut work = Vec::new();
        self.solve_with(b, &mut work);
    }

    /// Solves `A x = b` in place, using `work` as scratch space.
    pub fn solve_with(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let sym = &*self.symbolic;
        assert_eq!(b.len(), sym.n, "cholesky solve: rhs has wrong length");
        let lp = &sym.l_col_ptr;
        let li = &sym.l_row_idx;
        let lx = &self.values;
        let inv = &self.inv_diag;
        work.clear();
        work.extend(sym.perm.iter().map(|&old| b[old]));
        let y = &mut work[..];
        for j in 0..sym.n {
            let yj = y[j] * inv[j];
            y[j] = yj;
            let r = lp[j] + 1..lp[j + 1];
            for (&i, &l) in li[r.clone()].iter().zip(&lx[r]) {
                y[i] -= l * yj;
            }
        }
        for j in (0..sym.n).rev() {
            let r = lp[j] + 1..lp[j + 1];
            let s = li[r.clone()].iter().zip(&lx[r]).fold(y[j], |s, (&i, &l)| s - l * y[i]);
            y[j] = s * inv[j];
        }
        for (k, &old) in sym.perm.iter().enumerate() {
            b[old] = y[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Dense copy of `L` (rows and columns in elimination order).
    pub fn l_dense(&self) -> Vec<Vec<f64>> {
        let sym = &*self.symbolic;
        let mut dense = vec![vec![0.0; sym.n]; sym.n];
        for j in 0..sym.n {
            for p in sym.l_col_ptr[j]..sym.l_col_ptr[j + 1] {
                dense[sym.l_row_idx[p]][j] = self.values[p];
            }
        }
        dense
    }

    /// Fill-reducing permutation, `perm[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.symbolic.perm
    }
}

/// Factorizes `a`, reusing `symbolic` when supplied.
pub fn cholesky(
    a: &SparseMatrix,
    symbolic: Option<&Arc<CholeskySymbolic>>,
) -> Result<CholeskyFactor, LinalgError> {
    match symbolic {
        Some(sym) => sym.factorize(a),
        None => Arc::new(CholeskySymbolic::analyze(a.pattern())?).factorize(a),
    }
}
