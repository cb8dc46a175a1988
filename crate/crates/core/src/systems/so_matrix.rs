//! The special orthogonal group `SO(s)` as a level set of row inner products.

use std::sync::Arc;

use super::{ConstraintSystem, InitialConfiguration, SystemError};
use crate::linalg::SparsityPattern;

/// `A ∈ ℝ^{s×s}` flattened row-major, constrained by `A_i·A_i − 1 = 0` and
/// `A_i·A_j = 0` for `i < j`. Constraints are ordered `(0,0), (0,1), …,
/// (0,s−1), (1,1), …`.
#[derive(Debug, Clone)]
pub struct OrthogonalGroup {
    s: usize,
    pairs: Vec<(usize, usize)>,
    pattern: Arc<SparsityPattern>,
}

impl OrthogonalGroup {
    pub fn new(s: usize) -> Self {
        let mut pairs = Vec::with_capacity(s * (s + 1) / 2);
        for i in 0..s {
            for j in i..s {
                pairs.push((i, j));
            }
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        for &(i, j) in &pairs {
            row_idx.extend(i * s..(i + 1) * s);
            if j != i {
                row_idx.extend(j * s..(j + 1) * s);
            }
            col_ptr.push(row_idx.len());
        }
        let pattern = SparsityPattern::new(s * s, pairs.len(), col_ptr, row_idx)
            .expect("orthogonal-group pattern is well formed");
        Self {
            s,
            pairs,
            pattern: Arc::new(pattern),
        }
    }

    pub fn side(&self) -> usize {
        self.s
    }
}

impl ConstraintSystem for OrthogonalGroup {
    fn n_vars(&self) -> usize {
        self.s * self.s
    }

    fn n_constraints(&self) -> usize {
        self.pairs.len()
    }

    fn eval_constraints(&self, x: &[f64], out: &mut [f64]) {
        let s = self.s;
        for (o, &(i, j)) in out.iter_mut().zip(&self.pairs) {
            let dot: f64 = (0..s).map(|k| x[i * s + k] * x[j * s + k]).sum();
            *o = if i == j { dot - 1.0 } else { dot };
        }
    }

    fn jacobian_pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    fn fill_jacobian(&self, x: &[f64], values: &mut [f64]) {
        let s = self.s;
        let mut p = 0;
        for &(i, j) in &self.pairs {
            if i == j {
                for k in 0..s {
                    values[p + k] = 2.0 * x[i * s + k];
                }
                p += s;
            } else {
                for k in 0..s {
                    values[p + k] = x[j * s + k];
                    values[p + s + k] = x[i * s + k];
                }
                p += 2 * s;
            }
        }
    }
}

/// `n_vars = s²`, `m = (s² + s)/2`, started at the identity.
pub fn build_so_matrix(s: usize) -> Result<(OrthogonalGroup, InitialConfiguration), SystemError> {
    if s < 2 {
        return Err(SystemError::InvalidSize(format!("SO(s) needs s >= 2, got {s}")));
    }
    let group = OrthogonalGroup::new(s);
    let mut x0 = vec![0.0; s * s];
    for i in 0..s {
        x0[i * s + i] = 1.0;
    }
    let init = InitialConfiguration::checked(&group as &dyn ConstraintSystem, x0)?;
    Ok((group, init))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let (g, _) = build_so_matrix(3).unwrap();
        assert_eq!((g.n_vars(), g.n_constraints()), (9, 6));
        let (g, _) = build_so_matrix(2).unwrap();
        assert_eq!((g.n_vars(), g.n_constraints(), g.manifold_dim()), (4, 3, 1));
    }

    #[test]
    fn rotation_is_feasible() {
        let g = OrthogonalGroup::new(2);
        let (c, s) = (0.3_f64.cos(), 0.3_f64.sin());
        let q = g.eval_q(&[c, -s, s, c]);
        assert!(q.iter().all(|v| v.abs() < 1e-15));
    }
}
