//! The `manifold-mcmc` command line.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 for runtime
//! failures (singular start, tuning that cannot bracket its target, failed
//! verification).

mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use config::{ExampleKind, LatticeTargetArg, MeasureArg, Settings, VariantArg, OUT_DIR_ENV};

use crate::harness::verify::{self, VerifyConfig};
use crate::harness::{benchmark_factorizations, diffusivity_scan, tune_sigma, HarnessError, TuneOptions, TuneResult};
use crate::rng::chain_rng;
use crate::sampler::{ChainSummary, Sampler, SamplerError, SamplerParams};
use crate::systems::Example;
use config::{build, out_path};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InvalidParams(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidTarget(_) | HarnessError::System(_) => CliError::Config(e.to_string()),
            HarnessError::Sampler(s) => s.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn write_error(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "manifold-mcmc", version, about = "MCMC sampling on manifolds defined by constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a chain; write the thinned chain as CSV and statistics as JSON.
    Sample(Settings),
    /// Tune sigma to a target acceptance rate and print the result as JSON.
    Tune(Settings),
    /// Time Cholesky and LU factorizations on the pattern of QᵀQ.
    Bench(Settings),
    /// Effective diffusivity over a list of acceptance targets.
    Diffusivity(Settings),
    /// Distribution checks on the circle, sphere, ellipse and torus.
    Verify(Settings),
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Sample(s) => s.resolve().and_then(cmd_sample),
        Command::Tune(s) => s.resolve().and_then(cmd_tune),
        Command::Bench(s) => s.resolve().and_then(cmd_bench),
        Command::Diffusivity(s) => s.resolve().and_then(cmd_diffusivity),
        Command::Verify(s) => s.resolve().and_then(cmd_verify),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, Serialize)]
struct SampleConfig {
    command: &'static str,
    #[serde(flatten)]
    example: Example,
    params: SamplerParams,
    target_a: Option<f64>,
    tune: Option<TuneOptions>,
    n_steps: u64,
    thin: u64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct SampleReport<'a> {
    config: &'a SampleConfig,
    tuned: Option<TuneResult>,
    stats: ChainSummary,
}

fn write_row<W: Write>(w: &mut W, step: u64, x: &[f64]) -> io::Result<()> {
    write!(w, "{step}")?;
    for v in x {
        write!(w, ",{v}")?;
    }
    writeln!(w)
}

fn cmd_sample(s: Settings) -> Result<(), CliError> {
    let seed = s.seed()?;
    let example = s.example()?;
    let target_a = match (s.sigma, s.target_a) {
        (Some(_), None) => None,
        (None, Some(t)) => Some(Settings::check_target(t)?),
        _ => {
            return Err(CliError::Config(
                "give exactly one of --sigma and --target-a".into(),
            ))
        }
    };
    let n_steps = s
        .n_steps
        .ok_or_else(|| CliError::Config("--n-steps is required".into()))?;
    let thin = s.thin.unwrap_or(1);
    if thin == 0 {
        return Err(CliError::Config("--thin must be at least 1".into()));
    }
    let (system, init) = build(&example)?;
    let n_vars = init.x0.len();
    let params = s.sampler_params(s.sigma.unwrap_or_else(|| s.initial_sigma()), n_vars)?;
    let out_dir = s.out_dir()?;
    let sampler = Sampler::new(system.as_ref(), params.clone())?;
    let state = sampler.state_at(init.x0)?;
    let mut rng = chain_rng(seed, 0);

    let opts = s.tune_options();
    let (sampler, state, tuned) = match target_a {
        Some(t) => {
            let out = tune_sigma(&sampler, state, t, &mut rng, &opts)?;
            let tuned = sampler.with_params(params.with_sigma(out.result.sigma_a))?;
            (tuned, out.state, Some(out.result))
        }
        None => (sampler, state, None),
    };

    let config = SampleConfig {
        command: "sample",
        example,
        params: sampler.params().clone(),
        target_a,
        tune: target_a.map(|_| opts),
        n_steps,
        thin,
        seed,
    };
    let config_json = serde_json::to_string(&config).expect("config serializes");

    let chain_path = out_path(&out_dir, s.chain_file.as_deref().unwrap_or("chain.csv"));
    let mut writer = if s.no_chain {
        None
    } else {
        let file = File::create(&chain_path).map_err(write_error(&chain_path))?;
        let mut w = BufWriter::new(file);
        let header: Vec<String> = (0..n_vars).map(|i| format!("x{i}")).collect();
        writeln!(w, "# config: {config_json}")
            .and_then(|_| writeln!(w, "step,{}", header.join(",")))
            .map_err(write_error(&chain_path))?;
        Some(w)
    };
    let mut io_failure = None;
    let (_, stats) = sampler.run_chain(state, &mut rng, n_steps, thin, |k, st| {
        if let Some(w) = writer.as_mut() {
            if let Err(e) = write_row(w, k, st.x()) {
                io_failure.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = io_failure {
        return Err(write_error(&chain_path)(e));
    }
    if let Some(mut w) = writer {
        w.flush().map_err(write_error(&chain_path))?;
    }

    let stats_path = out_path(&out_dir, s.stats_file.as_deref().unwrap_or("stats.json"));
    let report = SampleReport {
        config: &config,
        tuned,
        stats: stats.summary(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&stats_path, json + "\n").map_err(write_error(&stats_path))?;
    eprintln!(
        "{} steps, acceptance {:.4}, sigma {}",
        stats.n_steps,
        stats.acceptance_rate(),
        sampler.params().sigma
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct TuneReport {
    #[serde(flatten)]
    example: Example,
    params: SamplerParams,
    options: TuneOptions,
    seed: u64,
    result: TuneResult,
}

fn cmd_tune(s: Settings) -> Result<(), CliError> {
    let seed = s.seed()?;
    let example = s.example()?;
    if s.sigma.is_some() {
        return Err(CliError::Config(
            "tune takes --target-a; use --initial-sigma for the starting step".into(),
        ));
    }
    let target = Settings::check_target(
        s.target_a
            .ok_or_else(|| CliError::Config("--target-a is required".into()))?,
    )?;
    let (system, init) = build(&example)?;
    let params = s.sampler_params(s.initial_sigma(), init.x0.len())?;
    let sampler = Sampler::new(system.as_ref(), params.clone())?;
    let state = sampler.state_at(init.x0)?;
    let options = s.tune_options();
    let out = tune_sigma(&sampler, state, target, &mut chain_rng(seed, 0), &options)?;
    for w in &out.result.warnings {
        eprintln!("warning: {w}");
    }
    let report = TuneReport {
        example,
        params,
        options,
        seed,
        result: out.result,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn cmd_bench(s: Settings) -> Result<(), CliError> {
    let seed = s.seed()?;
    let sizes: Vec<Option<usize>> = match &s.sizes {
        Some(v) if !v.is_empty() => v.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let reps = s.reps.unwrap_or(10_000);
    let fillings = s.fillings.unwrap_or(3);
    if reps == 0 || fillings == 0 {
        return Err(CliError::Config("--reps and --fillings must be positive".into()));
    }
    let examples = sizes
        .iter()
        .map(|&size| s.example_with_size(size))
        .collect::<Result<Vec<_>, _>>()?;
    let out_dir = s.out_dir()?;
    let path = out_path(&out_dir, s.output.as_deref().unwrap_or("bench.csv"));
    let mut w = BufWriter::new(File::create(&path).map_err(write_error(&path))?);
    let config = serde_json::json!({
        "command": "bench",
        "examples": examples,
        "reps": reps,
        "fillings": fillings,
        "seed": seed,
    });
    writeln!(w, "# config: {config}")
        .and_then(|_| writeln!(w, "example,size,order,nnz,reps,t_chol,t_lu,t_chol_spread,t_lu_spread"))
        .map_err(write_error(&path))?;
    let mut rng = chain_rng(seed, 0);
    for (example, size) in examples.iter().zip(&sizes) {
        let (system, _) = build(example)?;
        let b = benchmark_factorizations(system.as_ref(), reps, fillings, &mut rng)?;
        let size = size.or(s.n).or(s.s).map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{size},{},{},{},{},{},{},{}",
            example.name(),
            b.order,
            b.nnz,
            b.n_reps,
            b.t_chol,
            b.t_lu,
            b.chol_spread(),
            b.lu_spread()
        )
        .map_err(write_error(&path))?;
    }
    w.flush().map_err(write_error(&path))?;
    Ok(())
}

fn cmd_diffusivity(s: Settings) -> Result<(), CliError> {
    let seed = s.seed()?;
    let example = s.example()?;
    let targets = s
        .targets
        .clone()
        .filter(|t| !t.is_empty())
        .ok_or_else(|| CliError::Config("--targets is required".into()))?;
    for &t in &targets {
        Settings::check_target(t)?;
    }
    let n_steps = s.n_steps.unwrap_or(100_000);
    let warmup = s.warmup.unwrap_or(1_000);
    let (system, init) = build(&example)?;
    let params = s.sampler_params(s.initial_sigma(), init.x0.len())?;
    let sampler = Sampler::new(system.as_ref(), params.clone())?;
    let state = sampler.state_at(init.x0)?;
    let out_dir = s.out_dir()?;
    let path = out_path(&out_dir, s.output.as_deref().unwrap_or("diffusivity.csv"));
    let options = s.tune_options();
    let scan = diffusivity_scan(
        &sampler,
        state,
        &targets,
        &mut chain_rng(seed, 0),
        &options,
        warmup,
        n_steps,
    )?;
    for w in &scan.warnings {
        eprintln!("warning: {w}");
    }
    let config = serde_json::json!({
        "command": "diffusivity",
        "example": example,
        "params": params,
        "targets": targets,
        "tune": options,
        "warmup": warmup,
        "n_steps": n_steps,
        "seed": seed,
    });
    let mut w = BufWriter::new(File::create(&path).map_err(write_error(&path))?);
    writeln!(w, "# config: {config}")
        .and_then(|_| writeln!(w, "a,sigma_a,measured_a,mean_step_time,d_eff"))
        .map_err(write_error(&path))?;
    for p in &scan.points {
        writeln!(w, "{},{},{},{},{}", p.a, p.sigma_a, p.measured_a, p.mean_step_time, p.d_eff)
            .map_err(write_error(&path))?;
    }
    w.flush().map_err(write_error(&path))?;
    Ok(())
}

fn cmd_verify(s: Settings) -> Result<(), CliError> {
    let d = VerifyConfig::default();
    let cfg = VerifyConfig {
        n_steps: s.n_steps.unwrap_or(d.n_steps),
        thin: s.thin.unwrap_or(d.thin),
        n_bins: s.bins.unwrap_or(d.n_bins),
        sigma: s.sigma.unwrap_or(d.sigma),
        seed: s.seed()?,
    };
    if cfg.thin == 0 || cfg.n_bins < 2 || !(cfg.sigma > 0.0) {
        return Err(CliError::Config(
            "verify needs --thin ≥ 1, --bins ≥ 2 and --sigma > 0".into(),
        ));
    }
    let checks = verify::run_suite(&cfg)?;
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {}: chi2 = {:.2}, dof = {}, p = {:.4e}, samples = {}, expected {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.chi_square.statistic,
            c.chi_square.dof,
            c.chi_square.p_value,
            c.n_samples,
            if c.expect_match { "match" } else { "mismatch" }
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} distribution check(s) failed")));
    }
    Ok(())
}
