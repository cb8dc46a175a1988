use std::hint::black_box;
use std::time::{Duration, Instant};

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::linalg::{CholeskySymbolic, GramPlan, LuSymbolic, SparseMatrix};
use crate::sampler::{ChainState, ChainStats, Sampler};
use crate::systems::ConstraintSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationBenchmark {
    /// Order of `QᵀQ`.
    pub order: usize,
    pub nnz: usize,
    pub n_reps: usize,
    /// Mean seconds per Cholesky factorization, over all fillings.
    pub t_chol: f64,
    /// Mean seconds per LU factorization, over all fillings.
    pub t_lu: f64,
    pub t_chol_per_filling: Vec<f64>,
    pub t_lu_per_filling: Vec<f64>,
}

impl FactorizationBenchmark {
    fn spread(v: &[f64]) -> f64 {
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Largest over smallest per-filling Cholesky time.
    pub fn chol_spread(&self) -> f64 {
        Self::spread(&self.t_chol_per_filling)
    }

    pub fn lu_spread(&self) -> f64 {
        Self::spread(&self.t_lu_per_filling)
    }
}

/// Standard normal vector of length `n`.
fn normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Scale of the displacement between the two Jacobians in the LU test
/// matrix, playing the part of `y − x`.
const LU_DISPLACEMENT: f64 = 0.1;

const MAX_FILLING_ATTEMPTS: usize = 100;

/// Test matrices with the pattern of `QᵀQ`, built from the system's own
/// Jacobian at a random point `r`: `Q_rᵀQ_r` for Cholesky and `Q_sᵀQ_r` for
/// LU, with `s` a small random displacement of `r`. Like the sampler's
/// matrices, neither is diagonally dominant, so LU pivots and fills in the
/// way it does inside traditional Newton.
fn random_fillings<R: Rng + ?Sized>(
    system: &dyn ConstraintSystem,
    gram: &GramPlan,
    chol: &Arc<CholeskySymbolic>,
    lu: &LuSymbolic,
    rng: &mut R,
) -> Result<(SparseMatrix, SparseMatrix), HarnessError> {
    let n = system.n_vars();
    let mut last = None;
    for _ in 0..MAX_FILLING_ATTEMPTS {
        let r = normal_vec(n, rng);
        let q_r = system.jacobian(&r);
        let spd = gram.apply(&q_r, &q_r);
        if let Err(e) = chol.factorize(&spd) {
            last = Some(e);
            continue;
        }
        let s: Vec<f64> = r.iter().zip(normal_vec(n, rng)).map(|(a, d)| a + LU_DISPLACEMENT * d).collect();
        let gen = gram.apply(&system.jacobian(&s), &q_r);
        match lu.factorize(&gen) {
            Ok(_) => return Ok((spd, gen)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt").into())
}

/// Mean time of Cholesky and LU factorizations of matrices with the pattern
/// of `QᵀQ`, each timed over `n_reps` runs per random filling. The symbolic
/// analyses are done once, outside the timed region.
pub fn benchmark_factorizations<R: Rng + ?Sized>(
    system: &dyn ConstraintSystem,
    n_reps: usize,
    n_fillings: usize,
    rng: &mut R,
) -> Result<FactorizationBenchmark, HarnessError> {
    let gram = GramPlan::new(system.jacobian_pattern());
    let pattern = gram.output_pattern().clone();
    let chol = Arc::new(CholeskySymbolic::analyze(&pattern)?);
    let lu = LuSymbolic::analyze(&pattern)?;
    let n_reps = n_reps.max(1);
    let mut t_chol_per_filling = Vec::with_capacity(n_fillings);
    let mut t_lu_per_filling = Vec::with_capacity(n_fillings);
    for _ in 0..n_fillings.max(1) {
        let (spd, gen) = random_fillings(system, &gram, &chol, &lu, rng)?;
        let start = Instant::now();
        for _ in 0..n_reps {
            black_box(chol.factorize(black_box(&spd)).expect("factorized before"));
        }
        t_chol_per_filling.push(start.elapsed().as_secs_f64() / n_reps as f64);
        let start = Instant::now();
        for _ in 0..n_reps {
            black_box(lu.factorize(black_box(&gen)).expect("factorized before"));
        }
        t_lu_per_filling.push(start.elapsed().as_secs_f64() / n_reps as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(FactorizationBenchmark {
        order: pattern.ncols(),
        nnz: pattern.nnz(),
        n_reps,
        t_chol: mean(&t_chol_per_filling),
        t_lu: mean(&t_lu_per_filling),
        t_chol_per_filling,
        t_lu_per_filling,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEstimate {
    pub t_chol: f64,
    pub t_lu: f64,
    /// Mean LU factorizations per forward projection.
    pub n_iter_mean: f64,
    /// Forward-projection failures as a share of all rejections.
    pub r_forward: f64,
    pub a: f64,
    pub est_symmetric: f64,
    pub est_traditional: f64,
}

/// Per-step cost predicted from factorization times alone:
///
/// ```text
/// est_symmetric   = (1 − (1 − a) r) T_chol
/// est_traditional = (1 + a) n_iter T_LU + (1 − (1 − a) r) T_chol
/// ```
///
/// `(1 − a) r` is the share of proposals that fail the forward projection and
/// so never reach the Cholesky factorization at `y`.
pub fn timing_estimate(stats: &ChainStats, t_chol: f64, t_lu: f64, a: f64) -> TimingEstimate {
    let r = stats.forward_rejection_share();
    let n_iter = stats.mean_forward_solves();
    let chol_part = (1.0 - (1.0 - a) * r) * t_chol;
    TimingEstimate {
        t_chol,
        t_lu,
        n_iter_mean: n_iter,
        r_forward: r,
        a,
        est_symmetric: chol_part,
        est_traditional: (1.0 + a) * n_iter * t_lu + chol_part,
    }
}

#[derive(Debug, Clone)]
pub struct StepTiming {
    /// Mean wall time per step over the timed steps, in seconds.
    pub mean_step_time: f64,
    pub total: Duration,
    /// Statistics over the timed steps.
    pub stats: ChainStats,
    pub state: ChainState,
}

/// Times `n_steps` transitions after `warmup` untimed ones.
pub fn measure_step_time<R: Rng + ?Sized>(
    sampler: &Sampler<'_>,
    state: ChainState,
    rng: &mut R,
    warmup: u64,
    n_steps: u64,
) -> Result<StepTiming, HarnessError> {
    let (state, _) = sampler.run_chain(state, rng, warmup, 1, |_, _| {})?;
    let start = Instant::now();
    let (state, stats) = sampler.run_chain(state, rng, n_steps, 1, |_, _| {})?;
    let total = start.elapsed();
    Ok(StepTiming {
        mean_step_time: total.as_secs_f64() / n_steps.max(1) as f64,
        total,
        stats,
        state,
    })
}
