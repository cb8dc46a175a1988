use std::sync::Arc;

use super::{SparseMatrix, SparsityPattern};

/// Precomputed structure of `Aᵀ B` for two matrices sharing one pattern.
///
/// Entry `(i, j)` of the product is the dot product of columns `i` and `j`;
/// the plan stores, for every structural entry, the pairs of value positions
/// whose products sum to it. The output pattern is symmetric and shared by
/// every product built from the plan.
#[derive(Debug)]
pub struct GramPlan {
    input: Arc<SparsityPattern>,
    output: Arc<SparsityPattern>,
    term_ptr: Vec<usize>,
    left_pos: Vec<usize>,
    right_pos: Vec<usize>,
}

impl GramPlan {
    pub fn new(pattern: &Arc<SparsityPattern>) -> Self {
        let nrows = pattern.nrows();
        let ncols = pattern.ncols();

        // Row-wise view: for each row, the (column, value position) pairs.
        let mut row_entries: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nrows];
        for j in 0..ncols {
            let start = pattern.col_ptr()[j];
            for (k, &r) in pattern.column(j).iter().enumerate() {
                row_entries[r].push((j, start + k));
            }
        }

        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::new();
        let mut term_ptr = vec![0usize];
        let mut left_pos = Vec::new();
        let mut right_pos = Vec::new();
        let mut terms: Vec<(usize, usize, usize)> = Vec::new();
        for j in 0..ncols {
            terms.clear();
            let start = pattern.col_ptr()[j];
            for (k, &r) in pattern.column(j).iter().enumerate() {
                for &(i, pos) in &row_entries[r] {
                    terms.push((i, pos, start + k));
                }
            }
            terms.sort_unstable();
            let mut last = None;
            for &(i, lp, rp) in &terms {
                if last != Some(i) {
                    if last.is_some() {
                        term_ptr.push(left_pos.len());
                    }
                    row_idx.push(i);
                    last = Some(i);
                }
                left_pos.push(lp);
                right_pos.push(rp);
            }
            if last.is_some() {
                term_ptr.push(left_pos.len());
            }
            col_ptr[j + 1] = row_idx.len();
        }
        let output = SparsityPattern::new(ncols, ncols, col_ptr, row_idx)
            .expect("gram pattern is well formed");
        Self {
            input: Arc::clone(pattern),
            output: Arc::new(output),
            term_ptr,
            left_pos,
            right_pos,
        }
    }

    /// Pattern of the product, shared by every matrix the plan produces.
    pub fn output_pattern(&self) -> &Arc<SparsityPattern> {
        &self.output
    }

    pub fn input_pattern(&self) -> &Arc<SparsityPattern> {
        &self.input
    }

    /// `leftᵀ right`; both operands must carry the planned pattern.
    pub fn apply(&self, left: &SparseMatrix, right: &SparseMatrix) -> SparseMatrix {
        debug_assert!(*left.pattern().as_ref() == *self.input);
        debug_assert!(*right.pattern().as_ref() == *self.input);
        let lv = left.values();
        let rv = right.values();
        let values = self
            .term_ptr
            .windows(2)
            .map(|w| {
                (w[0]..w[1])
                    .map(|t| lv[self.left_pos[t]] * rv[self.right_pos[t]])
                    .sum()
            })
            .collect();
        SparseMatrix::from_parts(Arc::clone(&self.output), values).expect("value count matches")
    }
}

/// `QᵀQ` with a symmetric sparsity pattern.
pub fn normal_matrix(q: &SparseMatrix) -> SparseMatrix {
    GramPlan::new(q.pattern()).apply(q, q)
}
