//! The Markov chain kernel: tangent proposal, projection back to the
//! manifold, reverse tangent step, Metropolis test and reverse check.
//!
//! Each step factorizes `Q_yᵀQ_y` once, at the proposal. The factor is
//! reused for the reverse tangent step, for the symmetric-Newton reverse
//! projection and, once the move is accepted, for every solve made from the
//! new state, which takes ownership of it without recomputation.

mod chain;
mod project;

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CholeskyFactor, CholeskySymbolic, GramPlan, LinalgError, LuSymbolic, SparseMatrix};
use crate::systems::ConstraintSystem;

pub use chain::{ChainStats, ChainSummary, RejectionCounts};
pub use project::{project_symmetric, project_traditional, Projection, ProjectionStatus};

pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_ETA: f64 = 0.95;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler parameters: {0}")]
    InvalidParams(String),
    #[error("singular start: {0}")]
    SingularStart(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NewtonVariant {
    /// Quasi-Newton with the fixed matrix `Q_xᵀQ_x` and its Cholesky factor.
    #[default]
    Symmetric,
    /// Newton with the exact `Q_yᵀQ_x`, LU-factorized every iteration.
    Traditional,
}

impl std::fmt::Display for NewtonVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NewtonVariant::Symmetric => "symmetric",
            NewtonVariant::Traditional => "traditional",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Tangent step scale.
    pub sigma: f64,
    /// Projection succeeds once `|q(y)|_∞ < tol`.
    pub tol: f64,
    /// Projection fails once the error shrinks by less than this factor.
    pub eta: f64,
    pub max_iter: usize,
    /// Largest `|x' − x|_∞` accepted by the reverse check.
    pub xtol: f64,
    pub newton_variant: NewtonVariant,
    /// Include the `|Q_x|⁻¹` factor (soft constraints).
    pub use_pseudodet: bool,
    /// Skip the reverse projection. This biases the chain; experiments only.
    #[serde(default)]
    pub skip_reverse_check: bool,
}

/// `tol · n_vars · 10`
pub fn default_xtol(tol: f64, n_vars: usize) -> f64 {
    tol * n_vars as f64 * 10.0
}

impl SamplerParams {
    pub fn new(sigma: f64, n_vars: usize) -> Self {
        Self {
            sigma,
            tol: DEFAULT_TOL,
            eta: DEFAULT_ETA,
            max_iter: DEFAULT_MAX_ITER,
            xtol: default_xtol(DEFAULT_TOL, n_vars),
            newton_variant: NewtonVariant::Symmetric,
            use_pseudodet: true,
            skip_reverse_check: false,
        }
    }

    pub fn with_variant(mut self, variant: NewtonVariant) -> Self {
        self.newton_variant = variant;
        self
    }

    pub fn with_pseudodet(mut self, use_pseudodet: bool) -> Self {
        self.use_pseudodet = use_pseudodet;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Sets `tol` and resets `xtol` to its default for `n_vars`.
    pub fn with_tol(mut self, tol: f64, n_vars: usize) -> Self {
        self.tol = tol;
        self.xtol = default_xtol(tol, n_vars);
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |msg: String| Err(SamplerError::InvalidParams(msg));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.xtol > 0.0) {
            return bad(format!("xtol must be positive, got {}", self.xtol));
        }
        Ok(())
    }
}

/// A point of the chain with its Jacobian, the Cholesky factor of `QᵀQ` and
/// `log f`.
#[derive(Debug, Clone)]
pub struct ChainState {
    x: Vec<f64>,
    jacobian: SparseMatrix,
    factor: CholeskyFactor,
    log_f: f64,
}

impl ChainState {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn jacobian(&self) -> &SparseMatrix {
        &self.jacobian
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn log_f(&self) -> f64 {
        self.log_f
    }

    /// `log |Q_x|`, from the diagonal of the Cholesky factor.
    pub fn log_pseudodet(&self) -> f64 {
        self.factor.log_diag_sum()
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentStep {
    pub v: Vec<f64>,
    pub norm_sq: f64,
}

impl TangentStep {
    fn new(v: Vec<f64>) -> Self {
        let norm_sq = v.iter().map(|x| x * x).sum();
        Self { v, norm_sq }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepResult {
    Accepted,
    RejectedProjection,
    RejectedMetropolis,
    RejectedReverseProjection,
    RejectedReverseMismatch,
    RejectedSingular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub result: StepResult,
    /// Constraint evaluations in the forward projection.
    pub forward_iters: usize,
    /// Linear solves in the forward projection.
    pub forward_solves: usize,
    /// Constraint evaluations in the reverse projection (0 if not reached).
    pub reverse_iters: usize,
    /// Set once the Metropolis test was reached.
    pub acceptance_prob: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetropolisRatio {
    pub log_ratio: f64,
    pub acceptance_prob: f64,
}

/// `v = σ(ξ − Q z)` with `LLᵀ z = Qᵀ ξ`: the tangent-space projection of the
/// noise, scaled.
pub fn tangent_step(state: &ChainState, sigma: f64, noise: &[f64]) -> TangentStep {
    assert_eq!(noise.len(), state.x.len(), "noise has wrong length");
    let mut z = state.jacobian.tr_mul_vec(noise);
    state.factor.solve_in_place(&mut z);
    let qz = state.jacobian.mul_vec(&z);
    TangentStep::new(noise.iter().zip(&qz).map(|(xi, w)| sigma * (xi - w)).collect())
}

/// Tangent component at `y` of `x − y`.
pub fn reverse_tangent(x: &[f64], y: &[f64], q_y: &SparseMatrix, l_y: &CholeskyFactor) -> TangentStep {
    let r: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut z = q_y.tr_mul_vec(&r);
    l_y.solve_in_place(&mut z);
    let qz = q_y.mul_vec(&z);
    TangentStep::new(r.iter().zip(&qz).map(|(ri, w)| ri - w).collect())
}

/// `|Q_y|⁻¹ / |Q_x|⁻¹` as the product of per-entry diagonal ratios
/// `L_x[i,i] / L_y[i,i]`.
///
/// Both factors must come from one symbolic analysis so that diagonal entries
/// pair up under the same permutation.
pub fn pseudodet_ratio(l_x: &CholeskyFactor, l_y: &CholeskyFactor) -> f64 {
    assert_eq!(l_x.order(), l_y.order(), "factors have different orders");
    l_x.diag().zip(l_y.diag()).map(|(a, b)| a / b).product()
}

pub fn log_metropolis_ratio(
    state_x: &ChainState,
    state_y: &ChainState,
    v_x: &TangentStep,
    v_y: &TangentStep,
    params: &SamplerParams,
) -> MetropolisRatio {
    let vdiff = (v_y.norm_sq - v_x.norm_sq) / (2.0 * params.sigma * params.sigma);
    let udiff = state_y.log_f - state_x.log_f;
    let qdet = if params.use_pseudodet {
        pseudodet_ratio(&state_x.factor, &state_y.factor)
    } else {
        1.0
    };
    let log_ratio = -vdiff + udiff + qdet.ln();
    debug_assert!(!log_ratio.is_nan(), "NaN in the Metropolis ratio");
    let acceptance_prob = if log_ratio >= 0.0 {
        1.0
    } else if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.exp()
    };
    MetropolisRatio {
        log_ratio,
        acceptance_prob,
    }
}

/// A sampler bound to one constraint system.
///
/// Holds the symbolic analyses shared by every factorization along a chain:
/// the structure of `QᵀQ`, its Cholesky ordering (so diagonal entries of
/// successive factors pair up) and the LU column ordering.
#[derive(Clone)]
pub struct Sampler<'a> {
    system: &'a dyn ConstraintSystem,
    params: SamplerParams,
    gram: Arc<GramPlan>,
    chol: Arc<CholeskySymbolic>,
    lu: Arc<LuSymbolic>,
}

impl<'a> Sampler<'a> {
    pub fn new(system: &'a dyn ConstraintSystem, params: SamplerParams) -> Result<Self, SamplerError> {
        params.validate()?;
        if system.n_constraints() >= system.n_vars() {
            return Err(SamplerError::InvalidParams(format!(
                "need fewer constraints than variables, got m={} n_vars={}",
                system.n_constraints(),
                system.n_vars()
            )));
        }
        let gram = GramPlan::new(system.jacobian_pattern());
        let chol = CholeskySymbolic::analyze(gram.output_pattern())?;
        let lu = LuSymbolic::analyze(gram.output_pattern())?;
        Ok(Self {
            system,
            params,
            gram: Arc::new(gram),
            chol: Arc::new(chol),
            lu: Arc::new(lu),
        })
    }

    /// Same system and symbolic analyses, different parameters.
    pub fn with_params(&self, params: SamplerParams) -> Result<Self, SamplerError> {
        params.validate()?;
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    pub fn params(&self) -> &SamplerParams {
        &self.params
    }

    pub fn system(&self) -> &'a dyn ConstraintSystem {
        self.system
    }

    pub fn gram_plan(&self) -> &Arc<GramPlan> {
        &self.gram
    }

    pub fn cholesky_symbolic(&self) -> &Arc<CholeskySymbolic> {
        &self.chol
    }

    pub fn lu_symbolic(&self) -> &Arc<LuSymbolic> {
        &self.lu
    }

    /// Jacobian, factor and `log f` at `x`, without a feasibility check.
    pub fn evaluate(&self, x: Vec<f64>) -> Result<ChainState, LinalgError> {
        let jacobian = self.system.jacobian(&x);
        let factor = self.chol.factorize(&self.gram.apply(&jacobian, &jacobian))?;
        let log_f = self.system.log_density(&x);
        Ok(ChainState {
            x,
            jacobian,
            factor,
            log_f,
        })
    }

    /// A chain state at `x`, which must satisfy `|q(x)|_∞ < tol` and have a
    /// full-rank Jacobian.
    pub fn state_at(&self, x: Vec<f64>) -> Result<ChainState, SamplerError> {
        if x.len() != self.system.n_vars() {
            return Err(SamplerError::SingularStart(format!(
                "start has {} coordinates, system has {}",
                x.len(),
                self.system.n_vars()
            )));
        }
        let err = crate::systems::inf_norm(&self.system.eval_q(&x));
        if !(err < self.params.tol) {
            return Err(SamplerError::SingularStart(format!(
                "|q(x0)|_inf = {err:e} is not below tol = {:e}",
                self.params.tol
            )));
        }
        self.evaluate(x)
            .map_err(|e| SamplerError::SingularStart(format!("Q_x is rank deficient at the start: {e}")))
    }

    /// Solves `q(z0 + Q a) = 0` for `a`, starting from `a = 0`, with the
    /// configured Newton variant. `factor` is the Cholesky factor of `QᵀQ`.
    pub fn project(&self, z0: &[f64], q: &SparseMatrix, factor: &CholeskyFactor) -> Projection {
        match self.params.newton_variant {
            NewtonVariant::Symmetric => project_symmetric(self.system, z0, q, factor, &self.params),
            NewtonVariant::Traditional => {
                project_traditional(self.system, z0, q, &self.params, &self.gram, &self.lu)
            }
        }
    }

    pub fn tangent_step(&self, state: &ChainState, noise: &[f64]) -> TangentStep {
        tangent_step(state, self.params.sigma, noise)
    }

    pub fn metropolis(&self, x: &ChainState, y: &ChainState, v_x: &TangentStep, v_y: &TangentStep) -> MetropolisRatio {
        log_metropolis_ratio(x, y, v_x, v_y, &self.params)
    }

    /// One transition. On rejection the input state is returned unchanged.
    pub fn step<R: Rng + ?Sized>(&self, state: ChainState, rng: &mut R) -> (ChainState, StepOutcome) {
        let mut outcome = StepOutcome {
            result: StepResult::Accepted,
            forward_iters: 0,
            forward_solves: 0,
            reverse_iters: 0,
            acceptance_prob: None,
        };
        let noise: Vec<f64> = (0..state.x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let v_x = self.tangent_step(&state, &noise);
        let z: Vec<f64> = state.x.iter().zip(&v_x.v).map(|(a, b)| a + b).collect();

        let forward = self.project(&z, &state.jacobian, &state.factor);
        outcome.forward_iters = forward.iters;
        outcome.forward_solves = forward.solves;
        if !forward.is_success() {
            outcome.result = StepResult::RejectedProjection;
            return (state, outcome);
        }

        let proposal = match self.evaluate(forward.y) {
            Ok(p) => p,
            Err(_) => {
                outcome.result = StepResult::RejectedSingular;
                return (state, outcome);
            }
        };

        let v_y = reverse_tangent(&state.x, &proposal.x, &proposal.jacobian, &proposal.factor);
        let mh = self.metropolis(&state, &proposal, &v_x, &v_y);
        outcome.acceptance_prob = Some(mh.acceptance_prob);
        let u: f64 = rng.random();
        if u > mh.acceptance_prob {
            outcome.result = StepResult::RejectedMetropolis;
            return (state, outcome);
        }

        if !self.params.skip_reverse_check {
            let z_rev: Vec<f64> = proposal.x.iter().zip(&v_y.v).map(|(a, b)| a + b).collect();
            let reverse = self.project(&z_rev, &proposal.jacobian, &proposal.factor);
            outcome.reverse_iters = reverse.iters;
            if !reverse.is_success() {
                outcome.result = StepResult::RejectedReverseProjection;
                return (state, outcome);
            }
            let mismatch = reverse
                .y
                .iter()
                .zip(&state.x)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if !(mismatch <= self.params.xtol) {
                outcome.result = StepResult::RejectedReverseMismatch;
                return (state, outcome);
            }
        }
        (proposal, outcome)
    }

    /// Runs `n_steps` transitions, passing every `thin`-th state to
    /// `recorder` together with the number of steps taken so far.
    pub fn run_chain<R, F>(
        &self,
        initial: ChainState,
        rng: &mut R,
        n_steps: u64,
        thin: u64,
        mut recorder: F,
    ) -> Result<(ChainState, ChainStats), SamplerError>
    where
        R: Rng + ?Sized,
        F: FnMut(u64, &ChainState),
    {
        if thin < 1 {
            return Err(SamplerError::InvalidParams("thin must be at least 1".into()));
        }
        let err = crate::systems::inf_norm(&self.system.eval_q(&initial.x));
        if !(err < self.params.tol) {
            return Err(SamplerError::SingularStart(format!(
                "|q(x0)|_inf = {err:e} is not below tol = {:e}",
                self.params.tol
            )));
        }
        let mut stats = ChainStats::new(self.params.newton_variant);
        let mut state = initial;
        for k in 1..=n_steps {
            let (next, outcome) = self.step(state, rng);
            state = next;
            stats.record(&outcome);
            if k % thin == 0 {
                recorder(k, &state);
            }
        }
        Ok((state, stats))
    }
}
