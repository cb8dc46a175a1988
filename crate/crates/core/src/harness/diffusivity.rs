use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{measure_step_time, tune_sigma, HarnessError, TuneOptions};
use crate::sampler::{ChainState, Sampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusivityPoint {
    pub a: f64,
    pub sigma_a: f64,
    pub measured_a: f64,
    /// Seconds per step.
    pub mean_step_time: f64,
    /// `a σ_a² / mean_step_time`
    pub d_eff: f64,
}

impl DiffusivityPoint {
    pub fn new(a: f64, sigma_a: f64, measured_a: f64, mean_step_time: f64) -> Self {
        Self {
            a,
            sigma_a,
            measured_a,
            mean_step_time,
            d_eff: a * sigma_a * sigma_a / mean_step_time,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffusivityScan {
    pub points: Vec<DiffusivityPoint>,
    /// One entry per skipped target.
    pub warnings: Vec<String>,
}

impl DiffusivityScan {
    /// Largest over smallest `d_eff`, or `None` with fewer than two points.
    pub fn spread(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let d = self.points.iter().map(|p| p.d_eff);
        let max = d.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = d.fold(f64::INFINITY, f64::min);
        Some(max / min)
    }
}

/// Tunes σ for each target and times `n_steps` steps there, after a
/// `warmup` of untimed steps. Targets that cannot be bracketed are skipped
/// with a warning; other errors abort the scan.
pub fn diffusivity_scan<R: Rng + ?Sized>(
    sampler: &Sampler<'_>,
    initial: ChainState,
    targets: &[f64],
    rng: &mut R,
    opts: &TuneOptions,
    warmup: u64,
    n_steps: u64,
) -> Result<DiffusivityScan, HarnessError> {
    let mut scan = DiffusivityScan::default();
    for &a in targets {
        let tuned = match tune_sigma(sampler, initial.clone(), a, rng, opts) {
            Ok(t) => t,
            Err(e @ HarnessError::Bracket { .. }) | Err(e @ HarnessError::NotConverged { .. }) => {
                scan.warnings.push(format!("skipping a = {a}: {e}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let sigma_a = tuned.result.sigma_a;
        let s = sampler.with_params(sampler.params().clone().with_sigma(sigma_a))?;
        let timing = measure_step_time(&s, tuned.state, rng, warmup, n_steps)?;
        scan.points.push(DiffusivityPoint::new(
            a,
            sigma_a,
            tuned.result.measured_a,
            timing.mean_step_time,
        ));
    }
    Ok(scan)
}
