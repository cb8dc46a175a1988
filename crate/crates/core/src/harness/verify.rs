//! Distribution checks on analytic manifolds. Each chain is thinned, binned
//! along one coordinate, and compared against probabilities from an exact
//! law or a midpoint-rule quadrature by a chi-square test.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::HarnessError;
use crate::rng::chain_rng;
use crate::sampler::{Sampler, SamplerParams};
use crate::systems::{build_analytic, AnalyticKind};

/// Tests pass when the p-value is at least this.
pub const SIGNIFICANCE: f64 = 1e-3;
pub const QUADRATURE_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson's statistic for `observed` counts against bin probabilities
/// `probs`, with `len − 1` degrees of freedom.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probs.len());
    assert!(observed.len() >= 2, "need at least two bins");
    let n: u64 = observed.iter().sum();
    let statistic = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = observed.len() - 1;
    let p_value = ChiSquared::new(dof as f64).expect("dof > 0").sf(statistic);
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}

/// Spreads cell weights over `n_bins` equal bins of `[0, period)` in
/// proportion to overlap, then normalizes. Cells are `(start, end, weight)`
/// with `0 ≤ start ≤ end ≤ period`.
pub fn bin_probabilities(cells: &[(f64, f64, f64)], period: f64, n_bins: usize) -> Vec<f64> {
    let width = period / n_bins as f64;
    let mut probs = vec![0.0; n_bins];
    for &(u0, u1, w) in cells {
        if u1 <= u0 {
            continue;
        }
        let first = ((u0 / width) as usize).min(n_bins - 1);
        let last = ((u1 / width) as usize).min(n_bins - 1);
        for (b, p) in probs.iter_mut().enumerate().take(last + 1).skip(first) {
            let lo = u0.max(b as f64 * width);
            let hi = u1.min((b + 1) as f64 * width);
            if hi > lo {
                *p += w * (hi - lo) / (u1 - u0);
            }
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

fn bin_of(u: f64, period: f64, n_bins: usize) -> usize {
    let b = (u.rem_euclid(period) / period * n_bins as f64) as usize;
    b.min(n_bins - 1)
}

fn angle(y: f64, x: f64) -> f64 {
    y.atan2(x).rem_euclid(2.0 * PI)
}

/// Which measure the samples are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Surface measure.
    Hard,
    /// Surface measure weighted by `|∇q|⁻¹`.
    Soft,
}

/// Arclength along the ellipse `x²/a² + y²/b² = 1`, tabulated by the
/// midpoint rule in the angle parameter `t`, with `(x, y) = (a cos t, b sin t)`.
#[derive(Debug, Clone)]
pub struct EllipseOracle {
    a: f64,
    b: f64,
    h: f64,
    /// Arclength at the start of each cell, plus the perimeter at the end.
    cumulative: Vec<f64>,
}

impl EllipseOracle {
    pub fn new(a: f64, b: f64, n_quad: usize) -> Self {
        let h = 2.0 * PI / n_quad as f64;
        let mut cumulative = Vec::with_capacity(n_quad + 1);
        let mut s = 0.0;
        cumulative.push(0.0);
        for k in 0..n_quad {
            s += Self::speed(a, b, (k as f64 + 0.5) * h) * h;
            cumulative.push(s);
        }
        Self { a, b, h, cumulative }
    }

    fn speed(a: f64, b: f64, t: f64) -> f64 {
        (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
    }

    fn grad_norm(&self, t: f64) -> f64 {
        2.0 * (t.cos().powi(2) / (self.a * self.a) + t.sin().powi(2) / (self.b * self.b)).sqrt()
    }

    pub fn perimeter(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Arclength from `(a, 0)` counterclockwise to the point of parameter `t`.
    pub fn arclength_at(&self, t: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let u = t.rem_euclid(2.0 * PI) / self.h;
        let k = (u as usize).min(n - 1);
        let c0 = self.cumulative[k];
        c0 + (u - k as f64) * (self.cumulative[k + 1] - c0)
    }

    pub fn arclength(&self, x: &[f64]) -> f64 {
        self.arclength_at(angle(x[1] / self.b, x[0] / self.a))
    }

    pub fn bin_probabilities(&self, measure: Measure, n_bins: usize) -> Vec<f64> {
        let cells: Vec<_> = (0..self.cumulative.len() - 1)
            .map(|k| {
                let (s0, s1) = (self.cumulative[k], self.cumulative[k + 1]);
                let w = match measure {
                    Measure::Hard => s1 - s0,
                    Measure::Soft => (s1 - s0) / self.grad_norm((k as f64 + 0.5) * self.h),
                };
                (s0, s1, w)
            })
            .collect();
        bin_probabilities(&cells, self.perimeter(), n_bins)
    }
}

/// Poloidal-angle marginal of the surface measure on the torus, `∝ R + r cos θ`.
pub fn torus_theta_probabilities(major: f64, minor: f64, n_quad: usize, n_bins: usize) -> Vec<f64> {
    let h = 2.0 * PI / n_quad as f64;
    let cells: Vec<_> = (0..n_quad)
        .map(|k| {
            let theta = (k as f64 + 0.5) * h;
            (k as f64 * h, (k + 1) as f64 * h, (major + minor * theta.cos()) * h)
        })
        .collect();
    bin_probabilities(&cells, 2.0 * PI, n_bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub n_steps: u64,
    pub thin: u64,
    pub n_bins: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_steps: 1_000_000,
            thin: 100,
            n_bins: 36,
            sigma: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionCheck {
    pub name: String,
    pub n_steps: u64,
    pub n_samples: u64,
    pub acceptance_rate: f64,
    pub chi_square: ChiSquare,
    /// Whether the samples are expected to follow the oracle.
    pub expect_match: bool,
    /// `p ≥ SIGNIFICANCE` when a match is expected, `p < SIGNIFICANCE` otherwise.
    pub passed: bool,
}

/// Runs a chain on `kind`, maps each thinned sample to a bin with `bin`, and
/// tests the counts against `probs`.
fn check_chain<F>(
    name: &str,
    kind: AnalyticKind,
    use_pseudodet: bool,
    cfg: &VerifyConfig,
    probs: &[f64],
    expect_match: bool,
    bin: F,
) -> Result<DistributionCheck, HarnessError>
where
    F: Fn(&[f64]) -> usize,
{
    let (sys, init) = build_analytic(kind)?;
    let params = SamplerParams::new(cfg.sigma, init.x0.len()).with_pseudodet(use_pseudodet);
    let sampler = Sampler::new(&sys, params)?;
    let state = sampler.state_at(init.x0)?;
    let mut counts = vec![0u64; probs.len()];
    let mut rng = chain_rng(cfg.seed, 0);
    let (_, stats) = sampler.run_chain(state, &mut rng, cfg.n_steps, cfg.thin, |_, s| counts[bin(s.x())] += 1)?;
    let chi = chi_square(&counts, probs);
    let matched = chi.p_value >= SIGNIFICANCE;
    Ok(DistributionCheck {
        name: name.to_string(),
        n_steps: cfg.n_steps,
        n_samples: counts.iter().sum(),
        acceptance_rate: stats.acceptance_rate(),
        chi_square: chi,
        expect_match,
        passed: matched == expect_match,
    })
}

/// Unit circle, angle uniform.
pub fn circle_check(cfg: &VerifyConfig) -> Result<DistributionCheck, HarnessError> {
    let n = cfg.n_bins;
    let probs = vec![1.0 / n as f64; n];
    check_chain("circle", AnalyticKind::Circle, false, cfg, &probs, true, |x| {
        bin_of(angle(x[1], x[0]), 2.0 * PI, n)
    })
}

/// Unit sphere, height uniform on `[−1, 1]`.
pub fn sphere_check(cfg: &VerifyConfig) -> Result<DistributionCheck, HarnessError> {
    let n = cfg.n_bins;
    let probs = vec![1.0 / n as f64; n];
    check_chain("sphere", AnalyticKind::Sphere, false, cfg, &probs, true, |x| {
        bin_of(x[2] + 1.0, 2.0, n)
    })
}

/// Ellipse arclength histogram. The chain uses the soft measure when
/// `chain_measure` is `Soft`; the oracle uses `oracle_measure`.
pub fn ellipse_check(
    cfg: &VerifyConfig,
    a: f64,
    b: f64,
    chain_measure: Measure,
    oracle_measure: Measure,
) -> Result<DistributionCheck, HarnessError> {
    let oracle = EllipseOracle::new(a, b, QUADRATURE_POINTS);
    let probs = oracle.bin_probabilities(oracle_measure, cfg.n_bins);
    let name = format!(
        "ellipse {}-chain vs {}-oracle",
        measure_name(chain_measure),
        measure_name(oracle_measure)
    );
    let perimeter = oracle.perimeter();
    let n = cfg.n_bins;
    check_chain(
        &name,
        AnalyticKind::Ellipse { a, b },
        chain_measure == Measure::Soft,
        cfg,
        &probs,
        chain_measure == oracle_measure,
        |x| bin_of(oracle.arclength(x), perimeter, n),
    )
}

fn measure_name(m: Measure) -> &'static str {
    match m {
        Measure::Hard => "hard",
        Measure::Soft => "soft",
    }
}

/// Torus poloidal angle `θ = atan2(z, ρ − R)`.
pub fn torus_check(cfg: &VerifyConfig, major: f64, minor: f64) -> Result<DistributionCheck, HarnessError> {
    let probs = torus_theta_probabilities(major, minor, QUADRATURE_POINTS, cfg.n_bins);
    let n = cfg.n_bins;
    check_chain("torus", AnalyticKind::Torus { major, minor }, false, cfg, &probs, true, |x| {
        let rho = x[0].hypot(x[1]);
        bin_of(angle(x[2], rho - major), 2.0 * PI, n)
    })
}

/// Circle, sphere, ellipse (2, 1) in all four chain/oracle pairings, and the
/// torus (1, 0.5).
pub fn run_suite(cfg: &VerifyConfig) -> Result<Vec<DistributionCheck>, HarnessError> {
    let mut out = vec![circle_check(cfg)?, sphere_check(cfg)?];
    for chain in [Measure::Soft, Measure::Hard] {
        for oracle in [Measure::Soft, Measure::Hard] {
            out.push(ellipse_check(cfg, 2.0, 1.0, chain, oracle)?);
        }
    }
    out.push(torus_check(cfg, 1.0, 0.5)?);
    Ok(out)
}
