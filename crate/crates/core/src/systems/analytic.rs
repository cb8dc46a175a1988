//! Low-dimensional manifolds with known marginals, used to check that the
//! sampler targets the right measure.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ConstraintSystem, InitialConfiguration, SystemError};
use crate::linalg::SparsityPattern;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnalyticKind {
    /// Unit circle `x₁² + x₂² − 1`.
    Circle,
    /// Unit sphere in ℝ³.
    Sphere,
    /// `x₁²/a² + x₂²/b² − 1`.
    Ellipse { a: f64, b: f64 },
    /// `(√(x₁² + x₂²) − R)² + x₃² − r²`.
    Torus { major: f64, minor: f64 },
}

/// A single-constraint manifold with a dense gradient column.
#[derive(Debug, Clone)]
pub struct AnalyticManifold {
    kind: AnalyticKind,
    n_vars: usize,
    pattern: Arc<SparsityPattern>,
}

impl AnalyticManifold {
    pub fn kind(&self) -> AnalyticKind {
        self.kind
    }
}

impl ConstraintSystem for AnalyticManifold {
    fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn eval_constraints(&self, x: &[f64], out: &mut [f64]) {
        out[0] = match self.kind {
            AnalyticKind::Circle | AnalyticKind::Sphere => x.iter().map(|v| v * v).sum::<f64>() - 1.0,
            AnalyticKind::Ellipse { a, b } => (x[0] / a).powi(2) + (x[1] / b).powi(2) - 1.0,
            AnalyticKind::Torus { major, minor } => {
                let rho = x[0].hypot(x[1]);
                (rho - major).powi(2) + x[2] * x[2] - minor * minor
            }
        };
    }

    fn jacobian_pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    fn fill_jacobian(&self, x: &[f64], values: &mut [f64]) {
        match self.kind {
            AnalyticKind::Circle | AnalyticKind::Sphere => {
                for (v, xi) in values.iter_mut().zip(x) {
                    *v = 2.0 * xi;
                }
            }
            AnalyticKind::Ellipse { a, b } => {
                values[0] = 2.0 * x[0] / (a * a);
                values[1] = 2.0 * x[1] / (b * b);
            }
            AnalyticKind::Torus { major, .. } => {
                let rho = x[0].hypot(x[1]);
                let radial = 2.0 * (rho - major) / rho;
                values[0] = radial * x[0];
                values[1] = radial * x[1];
                values[2] = 2.0 * x[2];
            }
        }
    }
}

/// Builds the manifold and a feasible start: `(1, 0)` for the circle, the
/// north pole for the sphere, `(a, 0)` for the ellipse and `(R + r, 0, 0)`
/// for the torus.
pub fn build_analytic(kind: AnalyticKind) -> Result<(AnalyticManifold, InitialConfiguration), SystemError> {
    let (n_vars, x0) = match kind {
        AnalyticKind::Circle => (2, vec![1.0, 0.0]),
        AnalyticKind::Sphere => (3, vec![0.0, 0.0, 1.0]),
        AnalyticKind::Ellipse { a, b } => {
            if !(a > 0.0 && b > 0.0) {
                return Err(SystemError::InvalidParameter(format!(
                    "ellipse semi-axes must be positive, got a={a}, b={b}"
                )));
            }
            (2, vec![a, 0.0])
        }
        AnalyticKind::Torus { major, minor } => {
            if !(major > minor && minor > 0.0) {
                return Err(SystemError::InvalidParameter(format!(
                    "torus needs R > r > 0, got R={major}, r={minor}"
                )));
            }
            (3, vec![major + minor, 0.0, 0.0])
        }
    };
    let pattern = SparsityPattern::new(n_vars, 1, vec![0, n_vars], (0..n_vars).collect())
        .expect("dense column pattern");
    let manifold = AnalyticManifold {
        kind,
        n_vars,
        pattern: Arc::new(pattern),
    };
    let init = InitialConfiguration::checked(&manifold as &dyn ConstraintSystem, x0)?;
    Ok((manifold, init))
}
