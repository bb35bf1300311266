//! Run configuration: a TOML document with `driver`, `model`, `estimator`
//! and `output` tables plus a top-level `seed`. The grammar is documented in
//! `docs/config.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rds_floquet::driver::{DriverKind, DriverSystem, TimeKind, DEFAULT_RHO};
use rds_floquet::linalg::Mat;
use rds_floquet::matrix::{parse_matrices_csv, ParamDist};
use rds_floquet::order::Cone;
use rds_floquet::torus::TorusTolerances;
use rds_floquet::Matrix;

use crate::error::CliError;

/// Environment variable that overrides `output.dir`.
pub const OUT_DIR_ENV: &str = "RDS_FLOQUET_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driver: Option<DriverConfig>,
    pub model: ModelConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// Paths are not echoed into results, so moving a run does not change them.
    #[serde(default, skip_serializing)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverName {
    Iid,
    Markov,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeName {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    pub kind: DriverName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeName>,
    /// Row-stochastic transition matrix of the Markov shift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

/// Type-K cone: the first `k` coordinates nonnegative, the last `l` nonpositive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub k: usize,
    pub l: usize,
}

/// Entries drawn i.i.d. from `dist`; unknown keys are not rejected here
/// because the law is flattened into the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomEntriesConfig {
    pub n: usize,
    #[serde(flatten)]
    pub dist: ParamDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Exactly one of `matrix`, `matrices`, `file` or `random`.
    Matrix {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrices: Option<Vec<Vec<Vec<f64>>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        random: Option<RandomEntriesConfig>,
    },
    /// `field` (constant), `matrices`/`file`/`random` (constant on unit
    /// intervals of a shift driver) or `a0`, `a1`, `a2` (quasi-periodic on
    /// the torus).
    Ode {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrices: Option<Vec<Vec<Vec<f64>>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        random: Option<RandomEntriesConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a0: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a1: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a2: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cone: Option<ConeConfig>,
    },
    Leslie {
        fertility: Vec<ParamDist>,
        survival: Vec<ParamDist>,
    },
    TorusExample {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
    },
}

impl ModelConfig {
    fn time(&self) -> TimeKind {
        match self {
            ModelConfig::Matrix { .. } | ModelConfig::Leslie { .. } => TimeKind::Discrete,
            ModelConfig::Ode { .. } | ModelConfig::TorusExample { .. } => TimeKind::Continuous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Run length; 1000 in discrete time and 100 for flows when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Re-orthonormalization step; 1 in discrete time and 0.1 for flows when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub warmup: f64,
    pub batches: usize,
    /// Samples drawn by the assumption checks.
    pub samples: usize,
    /// Lag of the focusing checks (`N` for Leslie models when absent).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag: Option<u64>,
    pub orbit_depth: u64,
    pub tolerances: ToleranceConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            horizon: None,
            dt: None,
            warmup: 50.0,
            batches: 20,
            samples: 200,
            lag: None,
            orbit_depth: 20,
            tolerances: ToleranceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub divergence_threshold: f64,
    /// Horizons of the divergence diagnostic; `T/8, T/4, T/2, T` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_horizons: Option<Vec<f64>>,
    pub min_pairing: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagator_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagator_tmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagator_omegas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation_omegas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_rel: Option<f64>,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            divergence_threshold: -10.0,
            divergence_horizons: None,
            min_pairing: 1e-8,
            rtol: None,
            propagator_rel: None,
            propagator_tmax: None,
            propagator_omegas: None,
            direction: None,
            sigma_lo: None,
            sigma_hi: None,
            separation_omegas: None,
            ratio_rel: None,
        }
    }
}

impl ToleranceConfig {
    /// Torus validation tolerances with the overrides applied.
    pub fn torus(&self, warmup: f64) -> TorusTolerances {
        let d = TorusTolerances::default();
        TorusTolerances {
            propagator_rel: self.propagator_rel.unwrap_or(d.propagator_rel),
            propagator_tmax: self.propagator_tmax.unwrap_or(d.propagator_tmax),
            propagator_omegas: self.propagator_omegas.unwrap_or(d.propagator_omegas),
            direction: self.direction.unwrap_or(d.direction),
            warmup,
            sigma_lo: self.sigma_lo.unwrap_or(d.sigma_lo),
            sigma_hi: self.sigma_hi.unwrap_or(d.sigma_hi),
            separation_omegas: self.separation_omegas.unwrap_or(d.separation_omegas),
            ratio_rel: self.ratio_rel.unwrap_or(d.ratio_rel),
            divergence_horizons: self.divergence_horizons.clone().unwrap_or(d.divergence_horizons),
            divergence_threshold: self.divergence_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write `series.csv`.
    pub series: bool,
    /// Write `plot.csv`.
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), series: true, plot: true }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative matrix files are read from the config's directory.
    fn resolve_paths(&mut self, base: &Path) {
        if let ModelConfig::Matrix { file: Some(f), .. } | ModelConfig::Ode { file: Some(f), .. } = &mut self.model {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
    }

    /// The built-in Fibonacci Leslie model.
    pub fn fibonacci() -> Self {
        let one = ParamDist::Constant { value: 1.0 };
        RunConfig {
            seed: 0,
            driver: None,
            model: ModelConfig::Leslie { fertility: vec![one, one], survival: vec![one] },
            estimator: EstimatorConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn torus(rho: Option<f64>) -> Self {
        RunConfig {
            seed: 0,
            driver: None,
            model: ModelConfig::TorusExample { rho },
            estimator: EstimatorConfig { horizon: Some(50.0), ..EstimatorConfig::default() },
            output: OutputConfig::default(),
        }
    }

    pub fn time(&self) -> TimeKind {
        self.model.time()
    }

    pub fn horizon(&self) -> f64 {
        self.estimator.horizon.unwrap_or(match self.time() {
            TimeKind::Discrete => 1000.0,
            TimeKind::Continuous => 100.0,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let time = self.time();
        let est = &self.estimator;
        if let Some(h) = est.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(bad("estimator.horizon", format!("must be positive, got {h}")));
            }
            if time == TimeKind::Discrete && h.fract() != 0.0 {
                return Err(bad("estimator.horizon", "must be an integer for a discrete-time model"));
            }
        }
        if let Some(dt) = est.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(bad("estimator.dt", format!("must be positive, got {dt}")));
            }
            if time == TimeKind::Discrete && dt.fract() != 0.0 {
                return Err(bad("estimator.dt", "must be an integer for a discrete-time model"));
            }
        }
        if !(est.warmup > 0.0) || (time == TimeKind::Discrete && est.warmup.fract() != 0.0) {
            return Err(bad("estimator.warmup", format!("must be a positive step count, got {}", est.warmup)));
        }
        if est.batches < 2 {
            return Err(bad("estimator.batches", "needs at least 2 batches"));
        }
        if est.samples == 0 {
            return Err(bad("estimator.samples", "must be positive"));
        }
        if est.lag == Some(0) {
            return Err(bad("estimator.lag", "must be positive"));
        }
        if est.orbit_depth == 0 {
            return Err(bad("estimator.orbit_depth", "must be positive"));
        }
        if let Some(h) = &est.tolerances.divergence_horizons {
            if h.len() < 4 || h.windows(2).any(|w| !(w[1] > w[0])) || !(h[0] > 0.0) {
                return Err(bad("estimator.tolerances.divergence_horizons", "needs at least four increasing positive values"));
            }
        }
        self.check_driver()?;
        self.check_model()
    }

    fn check_driver(&self) -> Result<(), CliError> {
        let Some(d) = &self.driver else {
            return Ok(());
        };
        let time = self.time();
        let want = match time {
            TimeKind::Discrete => TimeName::Discrete,
            TimeKind::Continuous => TimeName::Continuous,
        };
        if let Some(t) = d.time {
            if t != want {
                return Err(bad("driver.time", format!("{t:?} does not match a {} model", self.model_name())));
            }
        }
        if d.kind != DriverName::Markov && d.transition.is_some() {
            return Err(bad("driver.transition", "only the markov driver takes a transition matrix"));
        }
        if d.kind != DriverName::Torus && d.rho.is_some() {
            return Err(bad("driver.rho", "only the torus driver takes a rotation number"));
        }
        match (&self.model, d.kind) {
            (ModelConfig::TorusExample { .. }, k) if k != DriverName::Torus => {
                Err(bad("driver.kind", "the torus-example model runs on the torus driver"))
            }
            (ModelConfig::Matrix { .. } | ModelConfig::Leslie { .. }, DriverName::Torus) => {
                Err(bad("driver.kind", "discrete-time models need the iid or markov driver"))
            }
            (_, DriverName::Markov) if d.transition.is_none() => Err(bad("driver.transition", "missing for the markov driver")),
            _ => Ok(()),
        }
    }

    fn model_name(&self) -> &'static str {
        match self.model {
            ModelConfig::Matrix { .. } => "matrix",
            ModelConfig::Ode { .. } => "ode",
            ModelConfig::Leslie { .. } => "leslie",
            ModelConfig::TorusExample { .. } => "torus-example",
        }
    }

    fn check_model(&self) -> Result<(), CliError> {
        match &self.model {
            ModelConfig::Matrix { matrix, matrices, file, random, weights } => {
                let given = [matrix.is_some(), matrices.is_some(), file.is_some(), random.is_some()];
                if given.iter().filter(|&&g| g).count() != 1 {
                    return Err(bad("model", "a matrix model needs exactly one of `matrix`, `matrices`, `file`, `random`"));
                }
                if weights.is_some() && matrix.is_some() {
                    return Err(bad("model.weights", "only applies to a matrix list"));
                }
                if self.driver_name() == DriverName::Markov && (matrix.is_some() || random.is_some()) {
                    return Err(bad("model", "the markov driver needs a matrix list (`matrices` or `file`)"));
                }
            }
            ModelConfig::Ode { field, matrices, file, random, a0, a1, a2, weights, .. } => {
                let qp = a0.is_some() || a1.is_some() || a2.is_some();
                let given = [field.is_some(), matrices.is_some(), file.is_some(), random.is_some(), qp];
                if given.iter().filter(|&&g| g).count() != 1 {
                    return Err(bad(
                        "model",
                        "an ode model needs exactly one of `field`, `matrices`, `file`, `random` or `a0`/`a1`/`a2`",
                    ));
                }
                if qp && (a0.is_none() || a1.is_none() || a2.is_none()) {
                    return Err(bad("model", "a quasi-periodic field needs all of `a0`, `a1`, `a2`"));
                }
                if weights.is_some() && matrices.is_none() && file.is_none() {
                    return Err(bad("model.weights", "only applies to a matrix list"));
                }
                let d = self.driver_name();
                if qp && d != DriverName::Torus {
                    return Err(bad("driver.kind", "a quasi-periodic field runs on the torus driver"));
                }
                if !qp && field.is_none() && d == DriverName::Torus {
                    return Err(bad("driver.kind", "piecewise-constant fields need the iid or markov driver"));
                }
            }
            ModelConfig::Leslie { fertility, survival } => {
                if fertility.len() < 2 {
                    return Err(bad("model.fertility", "needs at least two age classes"));
                }
                if survival.len() + 1 != fertility.len() {
                    return Err(bad("model.survival", format!("needs {} entries", fertility.len() - 1)));
                }
                if self.driver_name() == DriverName::Markov {
                    return Err(bad("driver.kind", "leslie models draw their parameters i.i.d."));
                }
            }
            ModelConfig::TorusExample { rho } => {
                if let (Some(r), Some(d)) = (rho, self.driver.as_ref().and_then(|d| d.rho)) {
                    if *r != d {
                        return Err(bad("model.rho", "disagrees with driver.rho"));
                    }
                }
            }
        }
        Ok(())
    }

    fn driver_name(&self) -> DriverName {
        match &self.driver {
            Some(d) => d.kind,
            None => match self.model {
                ModelConfig::TorusExample { .. } => DriverName::Torus,
                ModelConfig::Ode { a0: Some(_), .. } => DriverName::Torus,
                _ => DriverName::Iid,
            },
        }
    }

    pub fn rho(&self) -> f64 {
        let from_model = match &self.model {
            ModelConfig::TorusExample { rho } => *rho,
            _ => None,
        };
        from_model.or(self.driver.as_ref().and_then(|d| d.rho)).unwrap_or(DEFAULT_RHO)
    }

    pub fn build_driver(&self) -> Result<DriverSystem, CliError> {
        let time = self.time();
        let r = match self.driver_name() {
            DriverName::Iid => Ok(DriverSystem::iid(time)),
            DriverName::Markov => {
                let t = self.driver.as_ref().and_then(|d| d.transition.clone()).unwrap_or_default();
                DriverSystem::markov(t, time)
            }
            DriverName::Torus => DriverSystem::new(DriverKind::TorusRotation { rho: self.rho() }, time),
        };
        r.map_err(|e| bad("driver", e))
    }

    pub fn cone(&self) -> Cone {
        match &self.model {
            ModelConfig::Ode { cone: Some(c), .. } => Cone::TypeK { k: c.k, l: c.l },
            _ => Cone::Standard,
        }
    }
}

pub fn to_matrix(key: &str, rows: &[Vec<f64>]) -> Result<Matrix, CliError> {
    let m = Mat::from_rows(rows).map_err(|e| bad(key, e))?;
    if !m.is_square() || m.rows() < 2 {
        return Err(bad(key, format!("must be square with at least 2 rows, got {}x{}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(bad(key, "has non-finite entries"));
    }
    Ok(m)
}

/// The matrix list given inline or through a CSV file.
pub fn matrix_list(matrices: &Option<Vec<Vec<Vec<f64>>>>, file: &Option<PathBuf>) -> Result<Vec<Matrix>, CliError> {
    if let Some(ms) = matrices {
        if ms.is_empty() {
            return Err(bad("model.matrices", "is empty"));
        }
        return ms.iter().enumerate().map(|(i, m)| to_matrix(&format!("model.matrices[{i}]"), m)).collect();
    }
    let path = file.as_ref().ok_or_else(|| bad("model", "no matrix list given"))?;
    let text = std::fs::read_to_string(path).map_err(|e| bad("model.file", format!("{}: {e}", path.display())))?;
    parse_matrices_csv(&text).map_err(|e| bad("model.file", format!("{}: {e}", path.display())))
}
