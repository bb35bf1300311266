//! Turns a validated [`RunConfig`] into a cocycle.

use rds_floquet::cocycle::Cocycle;
use rds_floquet::driver::{DriverKind, DriverSystem};
use rds_floquet::matrix::{ConstantMatrix, IidList, LeslieModel, MarkovList, MatrixCocycle, MatrixModel, RandomEntries};
use rds_floquet::ode::{ConstantOde, IntegratorOptions, OdeCocycle, OdeModel, PiecewiseConstantOde, QuasiPeriodicOde};
use rds_floquet::torus::TorusExampleModel;

use crate::config::{matrix_list, to_matrix, ModelConfig, RunConfig};
use crate::error::CliError;

pub enum Built {
    Matrix { cocycle: MatrixCocycle<f64, Box<dyn MatrixModel<f64>>>, leslie: Option<LeslieModel> },
    Ode { cocycle: OdeCocycle<f64, Box<dyn OdeModel<f64>>>, torus: Option<TorusExampleModel> },
}

impl Built {
    pub fn cocycle(&self) -> &dyn Cocycle<f64> {
        match self {
            Built::Matrix { cocycle, .. } => cocycle,
            Built::Ode { cocycle, .. } => cocycle,
        }
    }

    pub fn driver(&self) -> &DriverSystem {
        self.cocycle().driver()
    }
}

fn cfg_err(key: &str) -> impl Fn(rds_floquet::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{key}: {e}"))
}

fn is_markov(driver: &DriverSystem) -> bool {
    matches!(driver.kind, DriverKind::MarkovShift(_))
}

fn list_model(
    matrices: &Option<Vec<Vec<Vec<f64>>>>,
    file: &Option<std::path::PathBuf>,
    weights: &Option<Vec<f64>>,
    driver: &DriverSystem,
) -> Result<Box<dyn MatrixModel<f64>>, CliError> {
    let mats = matrix_list(matrices, file)?;
    if is_markov(driver) {
        if weights.is_some() {
            return Err(CliError::Config("model.weights: the markov driver picks matrices by its state".into()));
        }
        Ok(Box::new(MarkovList::new(mats).map_err(cfg_err("model.matrices"))?))
    } else {
        Ok(Box::new(IidList::new(mats, weights.clone()).map_err(cfg_err("model.matrices"))?))
    }
}

/// The field of an `ode` or `torus-example` model, as written in the config
/// (for a type-K model this is the field before conjugation).
pub fn ode_model(cfg: &RunConfig, driver: &DriverSystem) -> Result<Box<dyn OdeModel<f64>>, CliError> {
    match &cfg.model {
        ModelConfig::Ode { field: Some(f), .. } => {
            Ok(Box::new(ConstantOde::new(to_matrix("model.field", f)?).map_err(cfg_err("model.field"))?))
        }
        ModelConfig::Ode { a0: Some(a0), a1: Some(a1), a2: Some(a2), .. } => Ok(Box::new(
            QuasiPeriodicOde::new(to_matrix("model.a0", a0)?, to_matrix("model.a1", a1)?, to_matrix("model.a2", a2)?)
                .map_err(cfg_err("model"))?,
        )),
        ModelConfig::Ode { random: Some(r), .. } => {
            let inner: Box<dyn MatrixModel<f64>> =
                Box::new(RandomEntries::new(r.n, r.dist).map_err(cfg_err("model.random"))?);
            Ok(Box::new(PiecewiseConstantOde { inner }))
        }
        ModelConfig::Ode { matrices, file, weights, .. } => {
            Ok(Box::new(PiecewiseConstantOde { inner: list_model(matrices, file, weights, driver)? }))
        }
        ModelConfig::TorusExample { .. } => {
            Ok(Box::new(TorusExampleModel::new(cfg.rho()).map_err(cfg_err("model.rho"))?))
        }
        _ => Err(CliError::Config("model: not a flow model".into())),
    }
}

pub fn build(cfg: &RunConfig) -> Result<Built, CliError> {
    let driver = cfg.build_driver()?;
    match &cfg.model {
        ModelConfig::Matrix { matrix, matrices, weights, file, random } => {
            let model: Box<dyn MatrixModel<f64>> = if let Some(m) = matrix {
                Box::new(ConstantMatrix::new(to_matrix("model.matrix", m)?).map_err(cfg_err("model.matrix"))?)
            } else if let Some(r) = random {
                Box::new(RandomEntries::new(r.n, r.dist).map_err(cfg_err("model.random"))?)
            } else {
                list_model(matrices, file, weights, &driver)?
            };
            let cocycle = MatrixCocycle::new(model, driver).map_err(cfg_err("model"))?;
            Ok(Built::Matrix { cocycle, leslie: None })
        }
        ModelConfig::Leslie { fertility, survival } => {
            let leslie = LeslieModel::new(fertility.clone(), survival.clone()).map_err(cfg_err("model"))?;
            let cocycle = MatrixCocycle::new(Box::new(leslie.clone()) as Box<dyn MatrixModel<f64>>, driver)
                .map_err(cfg_err("model"))?;
            Ok(Built::Matrix { cocycle, leslie: Some(leslie) })
        }
        ModelConfig::Ode { .. } | ModelConfig::TorusExample { .. } => {
            let model = ode_model(cfg, &driver)?;
            let mut cocycle = OdeCocycle::new(model, driver).map_err(cfg_err("model"))?.with_cone(cfg.cone()).map_err(cfg_err("model.cone"))?;
            if let Some(rtol) = cfg.estimator.tolerances.rtol {
                cocycle = cocycle.with_options(IntegratorOptions { rtol, ..IntegratorOptions::default() });
            }
            let torus = match cfg.model {
                ModelConfig::TorusExample { .. } => Some(TorusExampleModel::new(cfg.rho()).map_err(cfg_err("model.rho"))?),
                _ => None,
            };
            Ok(Built::Ode { cocycle, torus })
        }
    }
}
