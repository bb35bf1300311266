//! Command-line runner: reads a TOML run configuration, executes one
//! pipeline and writes `results.json`, `timing.json`, `series.csv` and
//! `plot.csv` into the output directory.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 a model
//! assumption failed, 3 numerical failure.

pub mod config;
pub mod error;
pub mod model;
pub mod output;
pub mod result;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{RunConfig, OUT_DIR_ENV};
use error::CliError;
use run::Pipeline;

#[derive(Debug, Parser)]
#[command(name = "rds-floquet", version, about = "Floquet directions, Lyapunov exponents and separation rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory; overrides the config and the RDS_FLOQUET_OUT variable.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct TorusFlags {
    /// Rotation number of the torus flow.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma_lo: Option<f64>,
    #[arg(long)]
    sigma_hi: Option<f64>,
    /// Tolerance on the recovered principal direction.
    #[arg(long)]
    direction_tol: Option<f64>,
    /// Relative tolerance of the propagator comparison.
    #[arg(long)]
    propagator_tol: Option<f64>,
    /// Relative tolerance of the separation ratio law.
    #[arg(long)]
    ratio_tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    divergence_threshold: Option<f64>,
    /// Number of sampled base points for the separation check.
    #[arg(long)]
    omegas: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample-based checks of the model assumptions.
    Check(Common),
    /// Principal direction and exponent by forward iteration.
    Estimate(Common),
    /// Exponential separation rate and the complementary subspace.
    Separate(Common),
    /// Entire positive orbit by pullback.
    Orbit(Common),
    /// QR Lyapunov spectrum.
    Oseledets(Common),
    /// Validate the generic pipeline on the analytic torus example.
    ExampleTorus {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        torus: TorusFlags,
    },
    /// Leslie population model (Fibonacci matrix unless a config is given).
    LeslieDemo(Common),
}

#[derive(Serialize)]
struct Failure<'a> {
    command: &'a str,
    seed: u64,
    horizon: f64,
    exit_code: i32,
    error: String,
}

fn load(pipeline: Pipeline, common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match (&common.config, pipeline) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Pipeline::ExampleTorus) => RunConfig::torus(None),
        (None, Pipeline::LeslieDemo) => RunConfig::fibonacci(),
        (None, _) => return Err(CliError::Config(format!("--config is required for `{}`", pipeline.name()))),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(h) = common.horizon {
        cfg.estimator.horizon = Some(h);
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    } else if let Some(o) = std::env::var_os(OUT_DIR_ENV) {
        cfg.output.dir = PathBuf::from(o);
    }
    Ok(cfg)
}

fn apply_torus_flags(cfg: &mut RunConfig, f: &TorusFlags) -> Result<(), CliError> {
    if let Some(r) = f.rho {
        match &mut cfg.model {
            config::ModelConfig::TorusExample { rho } => *rho = Some(r),
            _ => return Err(CliError::Config("--rho applies to the torus-example model only".into())),
        }
        if let Some(d) = &mut cfg.driver {
            d.rho = Some(r);
        }
    }
    let t = &mut cfg.estimator.tolerances;
    t.sigma_lo = f.sigma_lo.or(t.sigma_lo);
    t.sigma_hi = f.sigma_hi.or(t.sigma_hi);
    t.direction = f.direction_tol.or(t.direction);
    t.propagator_rel = f.propagator_tol.or(t.propagator_rel);
    t.ratio_rel = f.ratio_tol.or(t.ratio_rel);
    t.separation_omegas = f.omegas.or(t.separation_omegas);
    if let Some(d) = f.divergence_threshold {
        t.divergence_threshold = d;
    }
    Ok(())
}

fn execute(pipeline: Pipeline, cfg: &RunConfig) -> Result<Option<CliError>, CliError> {
    if pipeline == Pipeline::ExampleTorus && !matches!(cfg.model, config::ModelConfig::TorusExample { .. }) {
        return Err(CliError::Config("model.kind: example-torus needs the torus-example model".into()));
    }
    let start = Instant::now();
    let outcome = run::run(pipeline, cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    output::write_all(&outcome.result, &cfg.output.dir, cfg.output.series, cfg.output.plot, seconds)?;
    Ok(outcome.failure)
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (pipeline, common, torus) = match &cli.command {
        Command::Check(c) => (Pipeline::Check, c, None),
        Command::Estimate(c) => (Pipeline::Estimate, c, None),
        Command::Separate(c) => (Pipeline::Separate, c, None),
        Command::Orbit(c) => (Pipeline::Orbit, c, None),
        Command::Oseledets(c) => (Pipeline::Oseledets, c, None),
        Command::ExampleTorus { common, torus } => (Pipeline::ExampleTorus, common, Some(torus)),
        Command::LeslieDemo(c) => (Pipeline::LeslieDemo, c, None),
    };
    let cfg = load(pipeline, common).and_then(|mut cfg| {
        if let Some(f) = torus {
            apply_torus_flags(&mut cfg, f)?;
        }
        cfg.validate()?;
        Ok(cfg)
    });
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("rds-floquet: {e}");
            return e.exit_code();
        }
    };
    let err = match execute(pipeline, &cfg) {
        Ok(None) => return 0,
        Ok(Some(e)) | Err(e) => e,
    };
    eprintln!("rds-floquet {}: {err}", pipeline.name());
    let code = err.exit_code();
    if code == 3 {
        let f = Failure {
            command: pipeline.name(),
            seed: cfg.seed,
            horizon: cfg.horizon(),
            exit_code: code,
            error: err.to_string(),
        };
        let dir = &cfg.output.dir;
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = output::write_json(&f, &dir.join("error.json"));
            eprintln!("diagnostics written to {}", dir.join("error.json").display());
        }
    }
    code
}
