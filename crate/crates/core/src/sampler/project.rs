//! Newton projection of `z0 + Q a` onto `q = 0`.

use crate::linalg::{CholeskyFactor, GramPlan, LuSymbolic, SparseMatrix};
use crate::systems::{inf_norm, ConstraintSystem};

use super::SamplerParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionStatus {
    Success,
    /// The error shrank by less than a factor `eta`, or became non-finite.
    NotContracting,
    MaxIter,
    /// The traditional Newton matrix `Q_yᵀQ_x` was singular.
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Last iterate, `z0 + Q a`.
    pub y: Vec<f64>,
    /// Normal-space coefficients `a`.
    pub coeffs: Vec<f64>,
    /// Constraint evaluations.
    pub iters: usize,
    /// Linear solves (one per Newton update).
    pub solves: usize,
    /// `|q(y)|_∞` at the last evaluation.
    pub residual: f64,
    pub status: ProjectionStatus,
}

impl Projection {
    pub fn is_success(&self) -> bool {
        self.status == ProjectionStatus::Success
    }
}

struct Newton<'a> {
    system: &'a dyn ConstraintSystem,
    z0: &'a [f64],
    q: &'a SparseMatrix,
    params: &'a SamplerParams,
}

impl Newton<'_> {
    /// Drives the shared loop. `update` receives the current `y` and `-q(y)`,
    /// overwrites the latter with `δa`, and returns `false` if the linear
    /// system is singular.
    fn run<F>(&self, mut update: F) -> Projection
    where
        F: FnMut(&[f64], &mut [f64]) -> bool,
    {
        let m = self.q.ncols();
        let mut a = vec![0.0; m];
        let mut y = self.z0.to_vec();
        let mut qval = vec![0.0; m];
        let mut err_prev = f64::INFINITY;
        let mut solves = 0;
        let finish = |y, a, iters, solves, residual, status| Projection {
            y,
            coeffs: a,
            iters,
            solves,
            residual,
            status,
        };
        for iter in 1..=self.params.max_iter {
            self.system.eval_constraints(&y, &mut qval);
            let err = inf_norm(&qval);
            if err < self.params.tol {
                return finish(y, a, iter, solves, err, ProjectionStatus::Success);
            }
            if !(err <= self.params.eta * err_prev) {
                return finish(y, a, iter, solves, err, ProjectionStatus::NotContracting);
            }
            err_prev = err;
            if iter == self.params.max_iter {
                return finish(y, a, iter, solves, err, ProjectionStatus::MaxIter);
            }
            qval.iter_mut().for_each(|v| *v = -*v);
            solves += 1;
            if !update(&y, &mut qval) {
                return finish(y, a, iter, solves, err, ProjectionStatus::Singular);
            }
            for (ai, di) in a.iter_mut().zip(&qval) {
                *ai += di;
            }
            self.q.mul_vec_add(&qval, &mut y);
        }
        unreachable!("max_iter is at least 1")
    }
}

/// Quasi-Newton with the fixed matrix `QᵀQ`, reusing its Cholesky factor.
pub fn project_symmetric(
    system: &dyn ConstraintSystem,
    z0: &[f64],
    q: &SparseMatrix,
    factor: &CholeskyFactor,
    params: &SamplerParams,
) -> Projection {
    let mut work = Vec::with_capacity(factor.order());
    Newton { system, z0, q, params }.run(|_, rhs| {
        factor.solve_with(rhs, &mut work);
        true
    })
}

/// Newton with `Q_yᵀQ` rebuilt and LU-factorized at every iterate `y`.
pub fn project_traditional(
    system: &dyn ConstraintSystem,
    z0: &[f64],
    q: &SparseMatrix,
    params: &SamplerParams,
    gram: &GramPlan,
    lu: &LuSymbolic,
) -> Projection {
    Newton { system, z0, q, params }.run(|y, rhs| {
        let q_y = system.jacobian(y);
        match lu.factorize(&gram.apply(&q_y, q)) {
            Ok(factor) => {
                factor.solve_in_place(rhs);
                true
            }
            Err(_) => false,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{NewtonVariant, Sampler};
    use crate::systems::{build_analytic, AnalyticKind};

    fn circle_projection(v: [f64; 2], variant: NewtonVariant) -> Projection {
        let (sys, init) = build_analytic(AnalyticKind::Circle).unwrap();
        let params = SamplerParams::new(1.0, 2).with_variant(variant);
        let sampler = Sampler::new(&sys, params).unwrap();
        let state = sampler.state_at(init.x0).unwrap();
        let z = [1.0 + v[0], v[1]];
        sampler.project(&z, state.jacobian(), state.factor())
    }

    #[test]
    fn circle_small_step_lands_on_circle() {
        for variant in [NewtonVariant::Symmetric, NewtonVariant::Traditional] {
            let p = circle_projection([0.0, 0.1], variant);
            assert!(p.is_success());
            assert!((p.y[0] - 0.99_f64.sqrt()).abs() < 1e-5);
            assert!((p.y[1] - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn circle_long_step_has_no_solution() {
        // (1 + 2a, 3) never reaches the unit circle.
        for variant in [NewtonVariant::Symmetric, NewtonVariant::Traditional] {
            let p = circle_projection([0.0, 3.0], variant);
            assert!(!p.is_success());
        }
    }

    #[test]
    fn feasible_start_needs_one_evaluation() {
        let p = circle_projection([0.0, 0.0], NewtonVariant::Symmetric);
        assert_eq!((p.iters, p.solves, p.status), (1, 0, ProjectionStatus::Success));
    }

    #[test]
    fn max_iter_one_fails_unless_feasible() {
        let (sys, init) = build_analytic(AnalyticKind::Circle).unwrap();
        let params = SamplerParams { max_iter: 1, ..SamplerParams::new(1.0, 2) };
        let sampler = Sampler::new(&sys, params).unwrap();
        let state = sampler.state_at(init.x0).unwrap();
        let p = sampler.project(&[1.0, 0.1], state.jacobian(), state.factor());
        assert_eq!((p.iters, p.status), (1, ProjectionStatus::MaxIter));
    }

    #[test]
    fn traditional_converges_faster_than_symmetric() {
        let s = circle_projection([0.0, 0.5], NewtonVariant::Symmetric);
        let t = circle_projection([0.0, 0.5], NewtonVariant::Traditional);
        assert!(s.is_success() && t.is_success());
        assert!(t.iters <= s.iters);
        assert!((s.y[0] - t.y[0]).abs() < 1e-5);
    }
}
