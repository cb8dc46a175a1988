use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::sampler::{ChainState, Sampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    /// Steps counted in each acceptance estimate.
    pub n_samples: u64,
    /// Steps discarded before each estimate.
    pub burn_in: u64,
    pub max_expansions: usize,
    pub max_bisections: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            burn_in: 10_000,
            max_expansions: 60,
            max_bisections: 60,
        }
    }
}

impl TuneOptions {
    /// `1.25 / √n_samples`
    pub fn tolerance(&self) -> f64 {
        1.25 / (self.n_samples as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub sigma_a: f64,
    pub measured_a: f64,
    pub target_a: f64,
    pub samples_used: u64,
    pub expansions: usize,
    pub bisection_iters: usize,
    /// Non-monotone estimates seen during bisection.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub result: TuneResult,
    /// Chain state after the last estimate, for warm starts.
    pub state: ChainState,
}

/// Acceptance rate at the sampler's σ over `n_samples` steps after
/// `burn_in` discarded ones.
pub fn measure_acceptance<R: Rng + ?Sized>(
    sampler: &Sampler<'_>,
    state: ChainState,
    rng: &mut R,
    burn_in: u64,
    n_samples: u64,
) -> Result<(f64, ChainState), HarnessError> {
    let (state, _) = sampler.run_chain(state, rng, burn_in, 1, |_, _| {})?;
    let (state, stats) = sampler.run_chain(state, rng, n_samples, 1, |_, _| {})?;
    Ok((stats.acceptance_rate(), state))
}

/// Finds σ whose acceptance rate is within `1.25/√n_samples` of `target_a`.
///
/// Starts from the sampler's σ, doubles or halves it until the estimates
/// straddle the target, then bisects in log σ. Acceptance is assumed to
/// decrease with σ; estimates that contradict this are recorded as warnings.
/// Every estimate continues the chain from the previous one.
pub fn tune_sigma<R: Rng + ?Sized>(
    sampler: &Sampler<'_>,
    initial: ChainState,
    target_a: f64,
    rng: &mut R,
    opts: &TuneOptions,
) -> Result<TuneOutcome, HarnessError> {
    if !(target_a > 0.0 && target_a < 1.0) {
        return Err(HarnessError::InvalidTarget(target_a));
    }
    let tol = opts.tolerance();
    let template = sampler.params().clone();
    let mut state = initial;
    let mut measure = |sigma: f64, state: ChainState| -> Result<(f64, ChainState), HarnessError> {
        let s = sampler.with_params(template.clone().with_sigma(sigma))?;
        measure_acceptance(&s, state, rng, opts.burn_in, opts.n_samples)
    };
    let done = |sigma, a, expansions, bisection_iters, warnings, state| TuneOutcome {
        result: TuneResult {
            sigma_a: sigma,
            measured_a: a,
            target_a,
            samples_used: opts.n_samples,
            expansions,
            bisection_iters,
            warnings,
        },
        state,
    };

    let mut sigma = template.sigma;
    let (a, s) = measure(sigma, state)?;
    state = s;
    if (a - target_a).abs() < tol {
        return Ok(done(sigma, a, 0, 0, Vec::new(), state));
    }

    // (sigma, acceptance) with acceptance above / below the target.
    let (mut lo, mut hi);
    let mut expansions = 0;
    let grow = a > target_a;
    let mut last = (sigma, a);
    loop {
        if expansions == opts.max_expansions {
            return Err(HarnessError::Bracket {
                target: target_a,
                expansions,
                sigma: last.0,
                acceptance: last.1,
            });
        }
        expansions += 1;
        sigma = if grow { last.0 * 2.0 } else { last.0 / 2.0 };
        let (a, s) = measure(sigma, state)?;
        state = s;
        if (a - target_a).abs() < tol {
            return Ok(done(sigma, a, expansions, 0, Vec::new(), state));
        }
        if (a > target_a) != grow {
            if grow {
                lo = last;
                hi = (sigma, a);
            } else {
                lo = (sigma, a);
                hi = last;
            }
            break;
        }
        last = (sigma, a);
    }

    let mut warnings = Vec::new();
    for iter in 1..=opts.max_bisections {
        sigma = (lo.0 * hi.0).sqrt();
        let (a, s) = measure(sigma, state)?;
        state = s;
        if a > lo.1 || a < hi.1 {
            warnings.push(format!(
                "non-monotone estimate: a({sigma:e}) = {a} outside [{}, {}]",
                hi.1, lo.1
            ));
        }
        if (a - target_a).abs() < tol {
            return Ok(done(sigma, a, expansions, iter, warnings, state));
        }
        if a > target_a {
            lo = (sigma, a);
        } else {
            hi = (sigma, a);
        }
        last = (sigma, a);
    }
    Err(HarnessError::NotConverged {
        target: target_a,
        iterations: opts.max_bisections,
        sigma: last.0,
        acceptance: last.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::sampler::SamplerParams;
    use crate::systems::{build_analytic, AnalyticKind};

    fn quick() -> TuneOptions {
        TuneOptions {
            n_samples: 20_000,
            burn_in: 1_000,
            ..TuneOptions::default()
        }
    }

    #[test]
    fn circle_tunes_to_target_and_remeasures() {
        let (sys, init) = build_analytic(AnalyticKind::Circle).unwrap();
        let sampler = Sampler::new(&sys, SamplerParams::new(0.5, 2)).unwrap();
        let state = sampler.state_at(init.x0).unwrap();
        let opts = quick();
        let out = tune_sigma(&sampler, state, 0.25, &mut chain_rng(3, 0), &opts).unwrap();
        let r = &out.result;
        assert!((r.measured_a - 0.25).abs() < opts.tolerance());
        let s = sampler.with_params(sampler.params().clone().with_sigma(r.sigma_a)).unwrap();
        let (a, _) = measure_acceptance(&s, out.state, &mut chain_rng(4, 0), 1_000, 20_000).unwrap();
        assert!((a - 0.25).abs() < 2.0 * opts.tolerance(), "remeasured {a}");
    }

    #[test]
    fn target_outside_unit_interval_is_rejected() {
        let (sys, init) = build_analytic(AnalyticKind::Circle).unwrap();
        let sampler = Sampler::new(&sys, SamplerParams::new(0.5, 2)).unwrap();
        let state = sampler.state_at(init.x0).unwrap();
        for t in [0.0, 1.0, 1.5] {
            let e = tune_sigma(&sampler, state.clone(), t, &mut chain_rng(0, 0), &quick()).unwrap_err();
            assert_eq!(e, HarnessError::InvalidTarget(t));
        }
    }

    #[test]
    fn expansion_cap_gives_bracket_error() {
        let (sys, init) = build_analytic(AnalyticKind::Circle).unwrap();
        let sampler = Sampler::new(&sys, SamplerParams::new(1e-3, 2)).unwrap();
        let state = sampler.state_at(init.x0).unwrap();
        let opts = TuneOptions {
            max_expansions: 2,
            ..quick()
        };
        let e = tune_sigma(&sampler, state, 0.05, &mut chain_rng(0, 0), &opts).unwrap_err();
        assert!(matches!(e, HarnessError::Bracket { expansions: 2, .. }));
    }
}
