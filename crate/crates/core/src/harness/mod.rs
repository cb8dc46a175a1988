//! Experiment layer: step-size tuning, rejection and iteration statistics,
//! the factorization cost model, effective diffusivity, and the
//! distribution checks on analytic manifolds.

mod diffusivity;
mod timing;
mod tune;
pub mod verify;

use rand::Rng;
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::sampler::{ChainState, ChainStats, Sampler, SamplerError};
use crate::systems::SystemError;

pub use diffusivity::{diffusivity_scan, DiffusivityPoint, DiffusivityScan};
pub use timing::{
    benchmark_factorizations, measure_step_time, timing_estimate, FactorizationBenchmark, StepTiming,
    TimingEstimate,
};
pub use tune::{measure_acceptance, tune_sigma, TuneOptions, TuneOutcome, TuneResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("target acceptance must lie in (0, 1), got {0}")]
    InvalidTarget(f64),
    #[error("no bracket for target {target} after {expansions} expansions (last sigma {sigma:e}, acceptance {acceptance})")]
    Bracket {
        target: f64,
        expansions: usize,
        sigma: f64,
        acceptance: f64,
    },
    #[error("bisection did not reach target {target} within {iterations} steps (sigma {sigma:e}, acceptance {acceptance})")]
    NotConverged {
        target: f64,
        iterations: usize,
        sigma: f64,
        acceptance: f64,
    },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Runs `n_steps` transitions and returns their statistics with the final
/// state.
pub fn collect_stats<R: Rng + ?Sized>(
    sampler: &Sampler<'_>,
    state: ChainState,
    rng: &mut R,
    n_steps: u64,
) -> Result<(ChainStats, ChainState), HarnessError> {
    let (state, stats) = sampler.run_chain(state, rng, n_steps, 1, |_, _| {})?;
    Ok((stats, state))
}
