//! The planar cooperative system on the torus with
//! `A(ω) = [[a(ω), 1], [1, a(ω)]]`, `a(ω₁, ω₂) = −1/(ω₁ + ω₂)²`.
//!
//! Since `A(ω) = a(ω) I + B` with `B = [[0, 1], [1, 0]]`, the propagator is
//! `U_ω(t) = exp(∫₀ᵗ a(θ_τ ω) dτ) e^{tB}`. So `w = (1, 1)/√2`, the rate
//! on `span{(1, −1)}` is smaller by exactly 2, and `∫ a dℙ = −∞`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{DriverKind, DriverState, DriverSystem, DEFAULT_RHO};
use crate::error::{Error, Result};
use crate::estimators::{kappa_divergence, separation_estimate, warm_up, DivergenceDiagnostic, KappaOptions, SeparationOptions};
use crate::linalg::{self, Mat};
use crate::ode::{fundamental_matrix, OdeCocycle, OdeModel};
use crate::Real;

/// `κ = κ* = coth 1` for this model.
pub const KAPPA_TORUS: f64 = 1.313_035_285_499_331_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusExampleModel {
    pub rho: f64,
}

impl TorusExampleModel {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rotation number {rho} must lie in (0, 1)")));
        }
        Ok(TorusExampleModel { rho })
    }

    pub fn driver(&self) -> DriverSystem {
        DriverSystem { kind: DriverKind::TorusRotation { rho: self.rho }, time: crate::driver::TimeKind::Continuous }
    }

    pub fn cocycle<T: Real>(&self) -> OdeCocycle<T, TorusExampleModel> {
        OdeCocycle::new(*self, self.driver()).expect("torus model on its own driver")
    }

    /// `∫₀ᵗ a(θ_τ ω) dτ`, exact on each piece between wrap times.
    pub fn integral_of_a(&self, omega: &DriverState, t: f64) -> Result<f64> {
        let driver = self.driver();
        if omega.torus_coords().is_none() {
            return Err(Error::InvalidParameter("torus model needs a torus point".into()));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut cuts = vec![0.0];
        cuts.extend(driver.crossing_times(omega, t));
        if *cuts.last().unwrap() != t {
            cuts.push(t);
        }
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
            let mid = 0.5 * (lo + hi);
            let (x1, x2) = driver.advance(omega, mid)?.torus_coords().unwrap();
            let s = x1 + x2;
            // on the piece x₁ + x₂ = s + (1 + ρ)(τ − mid), and
            // ∫ −1/x² dτ = [1/((1 + ρ) x)], i.e. −(hi − lo)/(x_lo x_hi)
            let c = 1.0 + self.rho;
            let xl = s + c * (lo - mid);
            let xh = s + c * (hi - mid);
            let piece = -(hi - lo) / (xl * xh);
            total += if t > 0.0 { piece } else { -piece };
        }
        Ok(total)
    }

    /// `U_ω(t) = exp(log_scale) · direction` in closed form, with
    /// `‖direction‖₂ = 1`. Negative `t` is allowed.
    pub fn closed_form_propagator(&self, omega: &DriverState, t: f64) -> Result<(Mat<f64>, f64)> {
        let ia = self.integral_of_a(omega, t)?;
        // e^{tB} = [[cosh t, sinh t], [sinh t, cosh t]] has norm e^{|t|}
        let at = t.abs();
        let c = 0.5 * (1.0 + (-2.0 * at).exp());
        let s = 0.5 * (1.0 - (-2.0 * at).exp()) * t.signum();
        let dir = Mat::from_rows(&[vec![c, s], vec![s, c]])?;
        Ok((dir, ia + at))
    }
}

impl<T: Real> OdeModel<T> for TorusExampleModel {
    fn dim(&self) -> usize {
        2
    }
    fn field(&self, driver: &DriverSystem, reference: &DriverState, offset: f64) -> Mat<T> {
        let (x1, x2) = driver.flow_local(reference, offset).torus_coords().unwrap_or((1.0, 1.0));
        let s = x1 + x2;
        let a = T::of(-1.0 / (s * s));
        let mut m = Mat::filled(2, 2, T::one());
        m[(0, 0)] = a;
        m[(1, 1)] = a;
        m
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        match driver.kind {
            DriverKind::TorusRotation { rho } if rho == self.rho => Ok(()),
            _ => Err(Error::InvalidParameter(format!("torus model needs the torus driver with ρ = {}", self.rho))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusTolerances {
    /// Relative error of `ln ‖U_ω(t)‖` against the closed form.
    pub propagator_rel: f64,
    /// Largest `t` for the propagator comparison.
    pub propagator_tmax: f64,
    pub propagator_omegas: usize,
    pub direction: f64,
    pub warmup: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub separation_omegas: usize,
    /// Relative deviation of `ln_ratio(T)` from `−2T`.
    pub ratio_rel: f64,
    pub divergence_horizons: Vec<f64>,
    pub divergence_threshold: f64,
}

impl Default for TorusTolerances {
    fn default() -> Self {
        TorusTolerances {
            propagator_rel: 1e-8,
            propagator_tmax: 10.0,
            propagator_omegas: 20,
            direction: 1e-6,
            warmup: 50.0,
            sigma_lo: 1.9,
            sigma_hi: 2.1,
            separation_omegas: 5,
            ratio_rel: 0.01,
            divergence_horizons: vec![125.0, 250.0, 500.0, 1000.0],
            divergence_threshold: -10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorCheck {
    pub passed: bool,
    pub max_rel_error: f64,
    pub max_direction_error: f64,
    pub times: Vec<f64>,
    pub omegas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheck {
    pub passed: bool,
    pub max_error: f64,
    pub omegas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCheck {
    pub passed: bool,
    pub sigma_hats: Vec<f64>,
    pub lambda1_hats: Vec<f64>,
    pub ratio_law_passed: bool,
    pub max_ratio_deviation: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCheck {
    pub passed: bool,
    pub diagnostic: DivergenceDiagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusValidation {
    pub rho: f64,
    pub seed: u64,
    pub kappa: f64,
    pub kappa_star: f64,
    pub propagator: PropagatorCheck,
    pub direction: DirectionCheck,
    pub separation: SeparationCheck,
    pub divergence: DivergenceCheck,
}

impl TorusValidation {
    pub fn all_passed(&self) -> bool {
        self.propagator.passed && self.direction.passed && self.separation.passed && self.divergence.passed
    }
}

fn sample_omegas(driver: &DriverSystem, seed: u64, n: usize) -> Vec<DriverState> {
    (0..n as u64).map(|k| driver.sample_initial(seed.wrapping_add(k))).collect()
}

/// Generic propagator against the closed form at `t ∈ {1, …, tmax}`.
pub fn check_propagator(model: &TorusExampleModel, seed: u64, tol: &TorusTolerances) -> Result<PropagatorCheck> {
    let cocycle = model.cocycle::<f64>();
    let mut times: Vec<f64> = vec![0.5, 1.0, 2.0, 5.0, tol.propagator_tmax];
    times.retain(|&t| t <= tol.propagator_tmax);
    times.dedup();
    let omegas = sample_omegas(&model.driver(), seed, tol.propagator_omegas);
    let errs = omegas
        .par_iter()
        .map(|om| {
            let mut worst = (0.0f64, 0.0f64);
            for &t in &times {
                let (g, lg) = fundamental_matrix(&cocycle, om, t)?;
                let (c, lc) = model.closed_form_propagator(om, t)?;
                let rel = (lg - lc).abs() / lc.abs().max(1.0);
                worst.0 = worst.0.max(rel);
                worst.1 = worst.1.max(g.max_abs_diff(&c));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rel_error = errs.iter().fold(0.0f64, |m, e| m.max(e.0));
    let max_direction_error = errs.iter().fold(0.0f64, |m, e| m.max(e.1));
    Ok(PropagatorCheck {
        passed: max_rel_error <= tol.propagator_rel,
        max_rel_error,
        max_direction_error,
        times,
        omegas: omegas.len(),
    })
}

/// Warm-up direction against `(1, 1)/√2`.
pub fn check_direction(model: &TorusExampleModel, seed: u64, tol: &TorusTolerances) -> Result<DirectionCheck> {
    let cocycle = model.cocycle::<f64>();
    let target = [std::f64::consts::FRAC_1_SQRT_2; 2];
    let omegas = sample_omegas(&model.driver(), seed, tol.separation_omegas);
    let errs = omegas
        .par_iter()
        .map(|om| {
            let w: Vec<f64> = warm_up(&cocycle, om, tol.warmup, None)?;
            Ok(linalg::norm2(&linalg::sub(&w, &target)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_error = errs.iter().fold(0.0f64, |m, &e| m.max(e));
    Ok(DirectionCheck { passed: max_error <= tol.direction, max_error, omegas: omegas.len() })
}

/// Generic separation estimate at `horizon` against `σ̃ = 2`.
pub fn check_separation(
    model: &TorusExampleModel,
    seed: u64,
    horizon: f64,
    tol: &TorusTolerances,
) -> Result<SeparationCheck> {
    let cocycle = model.cocycle::<f64>();
    let omegas = sample_omegas(&model.driver(), seed, tol.separation_omegas);
    let opts = SeparationOptions { warmup: tol.warmup, ..SeparationOptions::default() };
    let ests = omegas
        .par_iter()
        .map(|om| separation_estimate(&cocycle, om, horizon, &opts))
        .collect::<Result<Vec<_>>>()?;
    let sigma_hats: Vec<f64> = ests.iter().map(|e| e.sigma_hat.unwrap_or(f64::INFINITY)).collect();
    let lambda1_hats = ests.iter().map(|e| e.lambda1_hat).collect();
    let max_ratio_deviation = ests
        .iter()
        .map(|e| {
            let r = e.history.last().map_or(f64::NEG_INFINITY, |r| r.ln_ratio);
            ((r + 2.0 * horizon) / (2.0 * horizon)).abs()
        })
        .fold(0.0f64, f64::max);
    Ok(SeparationCheck {
        passed: sigma_hats.iter().all(|&s| s >= tol.sigma_lo && s <= tol.sigma_hi),
        sigma_hats,
        lambda1_hats,
        ratio_law_passed: max_ratio_deviation <= tol.ratio_rel,
        max_ratio_deviation,
        horizon,
    })
}

/// Running means of `κ` along one orbit at the tolerance horizons.
pub fn check_divergence(model: &TorusExampleModel, seed: u64, tol: &TorusTolerances) -> Result<DivergenceCheck> {
    let cocycle = model.cocycle::<f64>();
    let omega = model.driver().sample_initial(seed);
    let opts = KappaOptions { warmup: tol.warmup, ..KappaOptions::default() };
    let diagnostic =
        kappa_divergence(&cocycle, &omega, &tol.divergence_horizons, tol.divergence_threshold, &opts)?;
    Ok(DivergenceCheck { passed: diagnostic.diverging, diagnostic })
}

/// Runs the generic integrator and estimators on the model and compares
/// them with the closed form.
pub fn validate_against_closed_form(
    rho: Option<f64>,
    horizon: f64,
    tol: &TorusTolerances,
    seed: u64,
) -> Result<TorusValidation> {
    let model = TorusExampleModel::new(rho.unwrap_or(DEFAULT_RHO))?;
    Ok(TorusValidation {
        rho: model.rho,
        seed,
        kappa: KAPPA_TORUS,
        kappa_star: KAPPA_TORUS,
        propagator: check_propagator(&model, seed, tol)?,
        direction: check_direction(&model, seed, tol)?,
        separation: check_separation(&model, seed, horizon, tol)?,
        divergence: check_divergence(&model, seed, tol)?,
    })
}
