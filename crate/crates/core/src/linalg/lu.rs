//! Left-looking sparse LU with partial pivoting (Gilbert–Peierls).
//!
//! The symbolic phase only fixes the column ordering; the structure of the
//! factors depends on the pivot sequence and is discovered per factorization
//! by depth-first search over the columns of `L` computed so far.

use std::sync::Arc;

use super::ordering::minimum_degree;
use super::{LinalgError, SparseMatrix, SparsityPattern, PIVOT_FLOOR};

const NONE: usize = usize::MAX;

/// Column ordering shared by LU factorizations of one pattern.
#[derive(Debug, Clone)]
pub struct LuSymbolic {
    n: usize,
    input: Arc<SparsityPattern>,
    /// `col_perm[new] = old`
    col_perm: Vec<usize>,
}

impl LuSymbolic {
    pub fn analyze(pattern: &Arc<SparsityPattern>) -> Result<Self, LinalgError> {
        let n = pattern.ncols();
        if pattern.nrows() != n {
            return Err(LinalgError::NotSquare {
                nrows: pattern.nrows(),
                ncols: n,
            });
        }
        Ok(Self {
            n,
            input: Arc::clone(pattern),
            col_perm: minimum_degree(pattern),
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn column_permutation(&self) -> &[usize] {
        &self.col_perm
    }

    pub fn factorize(&self, a: &SparseMatrix) -> Result<LuFactor, LinalgError> {
        if !(Arc::ptr_eq(&self.input, a.pattern()) || *self.input == **a.pattern()) {
            return Err(LinalgError::PatternMismatch);
        }
        factorize_with_columns(a, &self.col_perm)
    }
}

/// `P_r A P_c = L U` with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    l_col_ptr: Vec<usize>,
    l_row_idx: Vec<usize>,
    l_values: Vec<f64>,
    /// Column `k` of `U` stores its diagonal last.
    u_col_ptr: Vec<usize>,
    u_row_idx: Vec<usize>,
    u_values: Vec<f64>,
    /// `row_perm[new] = old`
    row_perm: Vec<usize>,
    /// `col_perm[new] = old`
    col_perm: Vec<usize>,
}

fn factorize_with_columns(a: &SparseMatrix, col_perm: &[usize]) -> Result<LuFactor, LinalgError> {
    let n = a.ncols();
    let floor = PIVOT_FLOOR * a.max_abs();
    let mut pinv = vec![NONE; n];
    let mut l_col_ptr = Vec::with_capacity(n + 1);
    let mut u_col_ptr = Vec::with_capacity(n + 1);
    let mut l_row_idx: Vec<usize> = Vec::with_capacity(a.nnz() * 2);
    let mut l_values: Vec<f64> = Vec::with_capacity(a.nnz() * 2);
    let mut u_row_idx: Vec<usize> = Vec::with_capacity(a.nnz() * 2);
    let mut u_values: Vec<f64> = Vec::with_capacity(a.nnz() * 2);
    let mut x = vec![0.0; n];
    let mut mark = vec![NONE; n];
    let mut topo: Vec<usize> = Vec::with_capacity(n);
    let mut dfs_stack: Vec<(usize, usize)> = Vec::with_capacity(n);

    for k in 0..n {
        l_col_ptr.push(l_row_idx.len());
        u_col_ptr.push(u_row_idx.len());
        let col = col_perm[k];
        let (rows, vals) = a.column(col);

        // Reach of the column in the graph of L, in topological order.
        topo.clear();
        for &r in rows {
            if mark[r] == k {
                continue;
            }
            mark[r] = k;
            dfs_stack.push((r, 0));
            while let Some(&(node, child)) = dfs_stack.last() {
                let j = pinv[node];
                let mut next_child = None;
                if j != NONE {
                    // Skip the unit diagonal stored first in column j.
                    let start = l_col_ptr[j] + 1;
                    let end = l_col_ptr[j + 1];
                    let mut c = child;
                    while start + c < end {
                        let next = l_row_idx[start + c];
                        c += 1;
                        if mark[next] != k {
                            mark[next] = k;
                            next_child = Some((next, c));
                            break;
                        }
                    }
                }
                match next_child {
                    Some((next, c)) => {
                        dfs_stack.last_mut().expect("nonempty").1 = c;
                        dfs_stack.push((next, 0));
                    }
                    None => {
                        dfs_stack.pop();
                        topo.push(node);
                    }
                }
            }
        }
        topo.reverse();

        for (&r, &v) in rows.iter().zip(vals) {
            x[r] = v;
        }
        for &i in &topo {
            let j = pinv[i];
            if j == NONE {
                continue;
            }
            let xi = x[i];
            for p in l_col_ptr[j] + 1..l_col_ptr[j + 1] {
                x[l_row_idx[p]] -= l_values[p] * xi;
            }
        }

        // Partial pivoting; the diagonal wins ties so symmetric problems keep
        // their ordering.
        let mut pivot_row = NONE;
        let mut best = -1.0;
        for &i in &topo {
            if pinv[i] == NONE {
                let mag = x[i].abs();
                if mag > best {
                    best = mag;
                    pivot_row = i;
                }
            }
        }
        if mark[col] == k && pinv[col] == NONE && x[col].abs() >= best {
            pivot_row = col;
        }
        if pivot_row == NONE {
            return Err(LinalgError::Singular { step: k, pivot: 0.0 });
        }
        let pivot = x[pivot_row];
        if !pivot.is_finite() || pivot.abs() <= floor {
            return Err(LinalgError::Singular { step: k, pivot });
        }

        for &i in &topo {
            let j = pinv[i];
            if j != NONE {
                u_row_idx.push(j);
                u_values.push(x[i]);
            }
        }
        u_row_idx.push(k);
        u_values.push(pivot);

        pinv[pivot_row] = k;
        l_row_idx.push(pivot_row);
        l_values.push(1.0);
        for &i in &topo {
            if pinv[i] == NONE {
                l_row_idx.push(i);
                l_values.push(x[i] / pivot);
            }
        }
        for &i in &topo {
            x[i] = 0.0;
        }
    }
    l_col_ptr.push(l_row_idx.len());
    u_col_ptr.push(u_row_idx.len());

    // Express the rows of L in pivot order.
    for r in &mut l_row_idx {
        *r = pinv[*r];
    }
    let mut row_perm = vec![0; n];
    for (old, &new) in pinv.iter().enumerate() {
        row_perm[new] = old;
    }

    Ok(LuFactor {
        n,
        l_col_ptr,
        l_row_idx,
        l_values,
        u_col_ptr,
        u_row_idx,
        u_values,
        row_perm,
        col_perm: col_perm.to_vec(),
    })
}

/// Factorizes a square matrix with a minimum-degree column ordering.
pub fn lu(a: &SparseMatrix) -> Result<LuFactor, LinalgError> {
    LuSymbolic::analyze(a.pattern())?.factorize(a)
}

impl LuFactor {
    pub fn order(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "lu solve: rhs has wrong length");
        let mut y: Vec<f64> = self.row_perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let yj = y[j];
            for p in self.l_col_ptr[j] + 1..self.l_col_ptr[j + 1] {
                y[self.l_row_idx[p]] -= self.l_values[p] * yj;
            }
        }
        for j in (0..self.n).rev() {
            let diag = self.u_col_ptr[j + 1] - 1;
            y[j] /= self.u_values[diag];
            let yj = y[j];
            for p in self.u_col_ptr[j]..diag {
                y[self.u_row_idx[p]] -= self.u_values[p] * yj;
            }
        }
        for (k, &old) in self.col_perm.iter().enumerate() {
            b[old] = y[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `row_perm[new] = old`
    pub fn row_permutation(&self) -> &[usize] {
        &self.row_perm
    }

    /// `col_perm[new] = old`
    pub fn column_permutation(&self) -> &[usize] {
        &self.col_perm
    }

    pub fn l_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for p in self.l_col_ptr[j]..self.l_col_ptr[j + 1] {
                dense[self.l_row_idx[p]][j] = self.l_values[p];
            }
        }
        dense
    }

    pub fn u_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for p in self.u_col_ptr[j]..self.u_col_ptr[j + 1] {
                dense[self.u_row_idx[p]][j] = self.u_values[p];
            }
        }
        dense
    }
}
