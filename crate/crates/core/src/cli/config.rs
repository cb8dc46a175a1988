//! Command-line and file settings, merged and resolved into run configs.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::harness::verify::Measure;
use crate::harness::TuneOptions;
use crate::sampler::{default_xtol, NewtonVariant, SamplerParams};
use crate::systems::{ConstraintSystem, Example, InitialConfiguration, LatticeTarget};

/// Overrides the output directory.
pub const OUT_DIR_ENV: &str = "MANIFOLD_MCMC_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleKind {
    Polymer,
    Lattice,
    Matrix,
    Ngon,
    Circle,
    Sphere,
    Ellipse,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Symmetric,
    Traditional,
}

impl From<VariantArg> for NewtonVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Symmetric => NewtonVariant::Symmetric,
            VariantArg::Traditional => NewtonVariant::Traditional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureArg {
    /// Include the `|Q|⁻¹` factor.
    Soft,
    /// Surface measure only.
    Hard,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Soft => Measure::Soft,
            MeasureArg::Hard => Measure::Hard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeTargetArg {
    Rest,
    Paper,
}

impl From<LatticeTargetArg> for LatticeTarget {
    fn from(t: LatticeTargetArg) -> Self {
        match t {
            LatticeTargetArg::Rest => LatticeTarget::Rest,
            LatticeTargetArg::Paper => LatticeTarget::Paper,
        }
    }
}

/// Every setting, all optional. Flags take precedence over the JSON file
/// given with `--config`, whose keys are the flag names in snake case.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// JSON file with default settings.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub example: Option<ExampleKind>,
    /// Particle count (polymer, ngon).
    #[arg(long)]
    pub n: Option<usize>,
    /// Side length (lattice, matrix).
    #[arg(long)]
    pub s: Option<usize>,
    /// Ellipse semi-axis along x [default: 2].
    #[arg(long)]
    pub a: Option<f64>,
    /// Ellipse semi-axis along y [default: 1].
    #[arg(long)]
    pub b: Option<f64>,
    /// Torus major radius [default: 1].
    #[arg(long)]
    pub major: Option<f64>,
    /// Torus minor radius [default: 0.5].
    #[arg(long)]
    pub minor: Option<f64>,
    /// Seed for the random ngon graph [default: 0].
    #[arg(long)]
    pub graph_seed: Option<u64>,
    /// Diagonal rest length in the lattice energy [default: rest].
    #[arg(long, value_enum)]
    pub lattice_target: Option<LatticeTargetArg>,

    /// [default: symmetric]
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// [default: soft]
    #[arg(long, value_enum)]
    pub measure: Option<MeasureArg>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Tune sigma to this acceptance rate instead of giving it.
    #[arg(long)]
    pub target_a: Option<f64>,
    /// Starting sigma for tuning [default: 0.5].
    #[arg(long)]
    pub initial_sigma: Option<f64>,
    /// [default: 1e-5]
    #[arg(long)]
    pub tol: Option<f64>,
    /// [default: 0.95]
    #[arg(long)]
    pub eta: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// [default: tol · n_vars · 10]
    #[arg(long)]
    pub xtol: Option<f64>,
    /// Skip the reverse projection (biased; experiments only).
    #[arg(long)]
    pub skip_reverse_check: bool,

    #[arg(long)]
    pub n_steps: Option<u64>,
    /// Keep every thin-th state [default: 1].
    #[arg(long)]
    pub thin: Option<u64>,
    /// Required.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps discarded before each tuning estimate [default: 10000].
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Steps per tuning estimate [default: 100000].
    #[arg(long)]
    pub tune_samples: Option<u64>,
    /// Step doublings or halvings allowed while bracketing [default: 60].
    #[arg(long)]
    pub max_expansions: Option<usize>,
    /// Bisection steps allowed after bracketing [default: 60].
    #[arg(long)]
    pub max_bisections: Option<usize>,

    /// Output directory [default: .]; the environment variable
    /// MANIFOLD_MCMC_OUT_DIR takes precedence.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Chain CSV name inside the output directory [default: chain.csv].
    #[arg(long)]
    pub chain_file: Option<String>,
    /// Stats JSON name inside the output directory [default: stats.json].
    #[arg(long)]
    pub stats_file: Option<String>,
    /// Write statistics only.
    #[arg(long)]
    pub no_chain: bool,
    /// CSV name for bench and diffusivity output.
    #[arg(long)]
    pub output: Option<String>,

    /// Acceptance targets for the diffusivity scan.
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<f64>>,
    /// Untimed steps before timing [default: 1000].
    #[arg(long)]
    pub warmup: Option<u64>,
    /// System sizes for the benchmark (n or s, per example).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Factorizations timed per filling [default: 10000].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Random fillings per size [default: 3].
    #[arg(long)]
    pub fillings: Option<usize>,
    /// Histogram bins for verify [default: 36].
    #[arg(long)]
    pub bins: Option<usize>,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($field:ident),* ; $($flag:ident),*) => {
        Settings {
            config: $a.config,
            $($field: $a.$field.or($b.$field),)*
            $($flag: $a.$flag || $b.$flag,)*
        }
    };
}

impl Settings {
    /// Fills unset flags from the `--config` file, if any.
    pub fn resolve(self) -> Result<Settings, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: Settings = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config file {}: {e}", path.display())))?;
        Ok(self.over(file))
    }

    fn over(self, file: Settings) -> Settings {
        let flags = self;
        prefer!(flags, file;
            example, n, s, a, b, major, minor, graph_seed, lattice_target, variant, measure, sigma,
            target_a, initial_sigma, tol, eta, max_iter, xtol, n_steps, thin, seed, burn_in,
            tune_samples, max_expansions, max_bisections, out_dir, chain_file, stats_file, output, targets, warmup, sizes, reps,
            fillings, bins;
            skip_reverse_check, no_chain)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("--seed is required".into()))
    }

    fn need<T: Copy>(v: Option<T>, flag: &str, example: &str) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::Config(format!("--{flag} is required for {example}")))
    }

    /// The example with `size` in place of `n` or `s` when given.
    pub fn example_with_size(&self, size: Option<usize>) -> Result<Example, CliError> {
        let kind = self
            .example
            .ok_or_else(|| CliError::Config("--example is required".into()))?;
        let n = size.or(self.n);
        let s = size.or(self.s);
        Ok(match kind {
            ExampleKind::Polymer => Example::Polymer {
                n: Self::need(n, "n", "polymer")?,
            },
            ExampleKind::Lattice => Example::Lattice {
                s: Self::need(s, "s", "lattice")?,
                target: self.lattice_target.map(Into::into).unwrap_or_default(),
            },
            ExampleKind::Matrix => Example::Matrix {
                s: Self::need(s, "s", "matrix")?,
            },
            ExampleKind::Ngon => Example::Ngon {
                n: Self::need(n, "n", "ngon")?,
                seed: self.graph_seed.unwrap_or(0),
            },
            ExampleKind::Circle => Example::Circle,
            ExampleKind::Sphere => Example::Sphere,
            ExampleKind::Ellipse => Example::Ellipse {
                a: self.a.unwrap_or(2.0),
                b: self.b.unwrap_or(1.0),
            },
            ExampleKind::Torus => Example::Torus {
                major: self.major.unwrap_or(1.0),
                minor: self.minor.unwrap_or(0.5),
            },
        })
    }

    pub fn example(&self) -> Result<Example, CliError> {
        self.example_with_size(None)
    }

    /// Sampler parameters with the given σ.
    pub fn sampler_params(&self, sigma: f64, n_vars: usize) -> Result<SamplerParams, CliError> {
        let mut p = SamplerParams::new(sigma, n_vars);
        if let Some(tol) = self.tol {
            p.tol = tol;
            p.xtol = default_xtol(tol, n_vars);
        }
        if let Some(xtol) = self.xtol {
            p.xtol = xtol;
        }
        if let Some(eta) = self.eta {
            p.eta = eta;
        }
        if let Some(max_iter) = self.max_iter {
            p.max_iter = max_iter;
        }
        p.newton_variant = self.variant.map(Into::into).unwrap_or_default();
        p.use_pseudodet = self.measure.unwrap_or(MeasureArg::Soft) == MeasureArg::Soft;
        p.skip_reverse_check = self.skip_reverse_check;
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn initial_sigma(&self) -> f64 {
        self.initial_sigma.unwrap_or(0.5)
    }

    pub fn tune_options(&self) -> TuneOptions {
        let d = TuneOptions::default();
        TuneOptions {
            n_samples: self.tune_samples.unwrap_or(d.n_samples),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            max_expansions: self.max_expansions.unwrap_or(d.max_expansions),
            max_bisections: self.max_bisections.unwrap_or(d.max_bisections),
        }
    }

    pub fn check_target(target: f64) -> Result<f64, CliError> {
        if target > 0.0 && target < 1.0 {
            Ok(target)
        } else {
            Err(CliError::Config(format!(
                "target acceptance must lie in (0, 1), got {target}"
            )))
        }
    }

    /// Output directory: environment variable, then flag or file, then `.`.
    /// Created if missing.
    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .or_else(|| self.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

pub fn build(example: &Example) -> Result<(Box<dyn ConstraintSystem>, InitialConfiguration), CliError> {
    example
        .build()
        .map_err(|e| CliError::Config(format!("cannot build {}: {e}", example.name())))
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
