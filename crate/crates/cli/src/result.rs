//! The document written to `results.json`. Non-finite numbers serialize as
//! `null`. Wall-clock timing goes to a separate `timing.json` so that
//! identical runs give identical results.

use serde::Serialize;

use rds_floquet::estimators::{DivergenceDiagnostic, OrbitPoint};
use rds_floquet::report::{AssumptionReport, Witness};
use rds_floquet::torus::TorusValidation;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Tool {
    pub fn current() -> Self {
        Tool { name: "rds-floquet", version: env!("CARGO_PKG_VERSION") }
    }
}

/// A scalar estimate with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Half width of the 95% batch-means interval.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub method: &'static str,
    pub horizon: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Estimate {
    pub fn new(value: f64, method: &'static str, horizon: f64, seed: u64) -> Self {
        Estimate { value, half_width: None, method, horizon, seed, note: None }
    }

    pub fn with_half_width(mut self, h: f64) -> Self {
        self.half_width = Some(h);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionSample {
    pub t: f64,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationSummary {
    /// Slope of `ln ‖P̃(θ_t ω)‖` over the second half of the run.
    pub tempered_slope: f64,
    pub max_invariance_residual: f64,
    /// Orthonormal basis of the complementary subspace at `ω`.
    pub f1_basis: Vec<Vec<f64>>,
    pub horizon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitSummary {
    pub depth: u64,
    /// Distance at `n = 0` between the directions from depths `m` and `2m`.
    pub convergence: f64,
    pub points: Vec<OrbitPoint<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeslieSummary {
    pub age_classes: usize,
    /// Every sampled `N`-step product is entrywise positive.
    pub n_step_positive: bool,
    pub samples: usize,
    pub witnesses: Vec<Witness>,
    pub seed: u64,
}

/// One row of `series.csv`.
#[derive(Debug, Clone)]
pub struct SeriesRow {
    pub t: f64,
    pub ln_rho: f64,
    pub w: Vec<f64>,
    pub ln_proj_norm: Option<f64>,
    /// Distance between a probe direction and `w(θ_t ω)`.
    pub direction_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub tool: Tool,
    pub command: &'static str,
    pub seed: u64,
    pub horizon: f64,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub assumptions: Vec<AssumptionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Estimate>,
    /// `λ̂₁` as the Birkhoff average of `κ` (flows only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_route: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceDiagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<DirectionSample>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<SeparationSummary>,
    /// QR Lyapunov spectrum, decreasing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leslie: Option<LeslieSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torus: Option<TorusValidation>,
    #[serde(skip)]
    pub series: Vec<SeriesRow>,
}

impl RunResult {
    pub fn new(command: &'static str, config: &RunConfig, horizon: f64) -> Self {
        RunResult {
            tool: Tool::current(),
            command,
            seed: config.seed,
            horizon,
            config: config.clone(),
            assumptions: Vec::new(),
            lambda1: None,
            lambda2: None,
            sigma: None,
            kappa_route: None,
            divergence: None,
            w: None,
            w_star: None,
            separation: None,
            exponents: None,
            orbit: None,
            leslie: None,
            torus: None,
            series: Vec::new(),
        }
    }
}
