//! Constraint systems: the four benchmark families and the analytic
//! manifolds used for distributional checks.

mod analytic;
mod bars;
mod lattice;
mod ngon;
mod polymer;
mod so_matrix;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{SparseMatrix, SparsityPattern};

pub use analytic::{build_analytic, AnalyticKind, AnalyticManifold};
pub use bars::{Bar, BarFramework, DiagonalEnergy, Endpoint};
pub use lattice::{build_lattice, build_lattice_with_target, LatticeTarget, LATTICE_STIFFNESS};
pub use ngon::build_ngon;
pub use polymer::build_polymer;
pub use so_matrix::{build_so_matrix, OrthogonalGroup};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("could not build a full-rank random graph after {0} attempts")]
    RebuildLimit(usize),
    #[error("initial configuration is infeasible: |q|_inf = {0:e}")]
    Infeasible(f64),
}

/// A manifold `{x : q(x) = 0}` together with a log-density `log f`.
///
/// The Jacobian is the `n_vars × m` matrix whose columns are the constraint
/// gradients. Its sparsity pattern must not depend on `x`. Implementations
/// must not hold mutable shared state: several chains may evaluate one system
/// concurrently.
pub trait ConstraintSystem: Send + Sync {
    fn n_vars(&self) -> usize;

    fn n_constraints(&self) -> usize;

    /// Writes `q(x)` into `out` (length `m`).
    fn eval_constraints(&self, x: &[f64], out: &mut [f64]);

    fn jacobian_pattern(&self) -> &Arc<SparsityPattern>;

    /// Writes the Jacobian values at `x`, in the order of
    /// [`jacobian_pattern`](Self::jacobian_pattern).
    fn fill_jacobian(&self, x: &[f64], values: &mut [f64]);

    fn log_density(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn eval_q(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_constraints()];
        self.eval_constraints(x, &mut out);
        out
    }

    fn jacobian(&self, x: &[f64]) -> SparseMatrix {
        let pattern = Arc::clone(self.jacobian_pattern());
        let mut values = vec![0.0; pattern.nnz()];
        self.fill_jacobian(x, &mut values);
        SparseMatrix::from_parts(pattern, values).expect("jacobian values match pattern")
    }

    /// Dimension of the manifold under the full-rank assumption.
    fn manifold_dim(&self) -> usize {
        self.n_vars() - self.n_constraints()
    }
}

/// A point satisfying the constraints to builder precision.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfiguration {
    pub x0: Vec<f64>,
}

/// Feasibility demanded of every builder's starting point.
pub const INITIAL_FEASIBILITY: f64 = 1e-12;

impl InitialConfiguration {
    pub fn checked(system: &dyn ConstraintSystem, x0: Vec<f64>) -> Result<Self, SystemError> {
        let err = inf_norm(&system.eval_q(&x0));
        if !(err < INITIAL_FEASIBILITY) {
            return Err(SystemError::Infeasible(err));
        }
        Ok(Self { x0 })
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest relative discrepancy between the analytic Jacobian and central
/// finite differences of `q` at `x`.
///
/// Each entry is compared as `|analytic − fd| / max(1, |analytic|)`;
/// structural zeros of the pattern are checked to stay zero as well.
pub fn jacobian_fd_error(system: &dyn ConstraintSystem, x: &[f64], h: f64) -> f64 {
    let jac = system.jacobian(x).to_dense();
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..system.n_vars() {
        xp[i] = x[i] + h;
        let qp = system.eval_q(&xp);
        xp[i] = x[i] - h;
        let qm = system.eval_q(&xp);
        xp[i] = x[i];
        for j in 0..system.n_constraints() {
            let fd = (qp[j] - qm[j]) / (2.0 * h);
            let exact = jac[i][j];
            worst = worst.max((exact - fd).abs() / exact.abs().max(1.0));
        }
    }
    worst
}

/// Named example systems, as addressed from configuration files and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "lowercase")]
pub enum Example {
    Polymer { n: usize },
    Lattice { s: usize, target: LatticeTarget },
    Matrix { s: usize },
    Ngon { n: usize, seed: u64 },
    Circle,
    Sphere,
    Ellipse { a: f64, b: f64 },
    Torus { major: f64, minor: f64 },
}

impl Example {
    pub fn build(&self) -> Result<(Box<dyn ConstraintSystem>, InitialConfiguration), SystemError> {
        fn boxed<S: ConstraintSystem + 'static>(
            (s, x0): (S, InitialConfiguration),
        ) -> (Box<dyn ConstraintSystem>, InitialConfiguration) {
            (Box::new(s), x0)
        }
        Ok(match *self {
            Example::Polymer { n } => boxed(build_polymer(n)?),
            Example::Lattice { s, target } => boxed(build_lattice_with_target(s, target)?),
            Example::Matrix { s } => boxed(build_so_matrix(s)?),
            Example::Ngon { n, seed } => boxed(build_ngon(n, seed)?),
            Example::Circle => boxed(build_analytic(AnalyticKind::Circle)?),
            Example::Sphere => boxed(build_analytic(AnalyticKind::Sphere)?),
            Example::Ellipse { a, b } => boxed(build_analytic(AnalyticKind::Ellipse { a, b })?),
            Example::Torus { major, minor } => {
                boxed(build_analytic(AnalyticKind::Torus { major, minor })?)
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Example::Polymer { .. } => "polymer",
            Example::Lattice { .. } => "lattice",
            Example::Matrix { .. } => "matrix",
            Example::Ngon { .. } => "ngon",
            Example::Circle => "circle",
            Example::Sphere => "sphere",
            Example::Ellipse { .. } => "ellipse",
            Example::Torus { .. } => "torus",
        }
    }
}
