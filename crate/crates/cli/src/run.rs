//! The pipelines behind each subcommand.

use rds_floquet::cocycle::Cocycle;
use rds_floquet::driver::DriverState;
use rds_floquet::estimators::{
    backward_entire_orbit, cone_center, forward_floquet, lambda1_via_kappa, orbit_convergence, oseledets_qr,
    separation_estimate, warm_up, DivergenceDiagnostic, FloquetTrack, KappaOptions, SeparationOptions,
};
use rds_floquet::linalg;
use rds_floquet::matrix::{check_d1, check_d2, check_d3, leslie_n_step_positive, MatrixModel};
use rds_floquet::ode::{check_o1, check_o2, check_o3, typek_to_cooperative, OdeModel};
use rds_floquet::order::Cone;
use rds_floquet::report::{AssumptionReport, Condition, Witness};
use rds_floquet::torus::validate_against_closed_form;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::model::{build, ode_model, Built};
use crate::result::{DirectionSample, Estimate, LeslieSummary, OrbitSummary, RunResult, SeparationSummary, SeriesRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Check,
    Estimate,
    Separate,
    Orbit,
    Oseledets,
    ExampleTorus,
    LeslieDemo,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Check => "check",
            Pipeline::Estimate => "estimate",
            Pipeline::Separate => "separate",
            Pipeline::Orbit => "orbit",
            Pipeline::Oseledets => "oseledets",
            Pipeline::ExampleTorus => "example-torus",
            Pipeline::LeslieDemo => "leslie-demo",
        }
    }
}

/// A finished run. `failure` is set when the run produced a result but must
/// still exit nonzero (an assumption check failed).
pub struct Outcome {
    pub result: RunResult,
    pub failure: Option<CliError>,
}

pub fn run(pipeline: Pipeline, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let horizon = cfg.horizon();
    let mut result = RunResult::new(pipeline.name(), cfg, horizon);
    if pipeline == Pipeline::ExampleTorus {
        example_torus(cfg, &mut result)?;
        return Ok(Outcome { result, failure: None });
    }
    let built = build(cfg)?;
    if pipeline == Pipeline::Check {
        result.assumptions = full_check(&built, cfg, &mut result)?;
        let failure = hard_failure(&result.assumptions, &built);
        return Ok(Outcome { result, failure });
    }
    let reports = positivity(&built, cfg)?;
    if let Some(f) = hard_failure(&reports, &built) {
        result.assumptions = reports;
        return Ok(Outcome { result, failure: Some(f) });
    }
    result.assumptions = reports;
    match pipeline {
        Pipeline::Estimate => estimate(&built, cfg, &mut result)?,
        Pipeline::Separate => separate(&built, cfg, &mut result)?,
        Pipeline::Orbit => orbit(&built, cfg, &mut result)?,
        Pipeline::Oseledets => oseledets(&built, cfg, &mut result)?,
        Pipeline::LeslieDemo => {
            leslie_summary(&built, cfg, &mut result)?;
            estimate(&built, cfg, &mut result)?;
        }
        Pipeline::Check | Pipeline::ExampleTorus => unreachable!(),
    }
    Ok(Outcome { result, failure: None })
}

fn is_leslie(built: &Built) -> bool {
    matches!(built, Built::Matrix { leslie: Some(_), .. })
}

/// Failed conditions that stop a run. Leslie matrices are singular by
/// design, so injectivity is not required of them.
fn hard_failure(reports: &[AssumptionReport], built: &Built) -> Option<CliError> {
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| r.failed() && !(is_leslie(built) && r.condition == Condition::D1ii))
        .map(|r| r.condition.to_string())
        .collect();
    (!failed.is_empty()).then(|| CliError::Assumption(format!("conditions failed: {}", failed.join(", "))))
}

fn samples(cfg: &RunConfig) -> usize {
    cfg.estimator.samples
}

/// The cooperative field checked by (O1)–(O3): the model itself, or its
/// conjugate for a type-K cone. A type-K sign violation becomes a failed
/// (P1) report.
fn cooperative(
    built: &Built,
    cfg: &RunConfig,
) -> Result<(Option<Box<dyn OdeModel<f64>>>, Option<AssumptionReport>), CliError> {
    let Built::Ode { cocycle, .. } = built else {
        return Ok((None, None));
    };
    let driver = &cocycle.driver;
    match cocycle.cone {
        Cone::Standard => Ok((Some(ode_model(cfg, driver)?), None)),
        Cone::TypeK { k, l } => {
            let n = samples(cfg);
            match typek_to_cooperative(ode_model(cfg, driver)?, driver, k, l, cfg.seed, n) {
                Ok(m) => Ok((Some(Box::new(m)), Some(AssumptionReport::holds(Condition::P1, n)))),
                Err(rds_floquet::Error::SignViolation { row, col, value }) => {
                    let w = Witness::Entry { sample: 0, row, col, value };
                    Ok((None, Some(AssumptionReport::fails(Condition::P1, n, vec![w]))))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn positivity(built: &Built, cfg: &RunConfig) -> Result<Vec<AssumptionReport>, CliError> {
    let n = samples(cfg);
    match built {
        Built::Matrix { cocycle, .. } => {
            let mut r = check_d1::<f64, _>(&cocycle.model, &cocycle.driver, cfg.seed, n)?;
            r.truncate(1);
            Ok(r)
        }
        Built::Ode { cocycle, .. } => {
            let (coop, p1) = cooperative(built, cfg)?;
            let mut out: Vec<AssumptionReport> = p1.into_iter().collect();
            if let Some(m) = coop {
                out.push(check_o1::<f64, _>(&m, &cocycle.driver, cfg.seed, n, &[])?);
            }
            Ok(out)
        }
    }
}

fn full_check(built: &Built, cfg: &RunConfig, result: &mut RunResult) -> Result<Vec<AssumptionReport>, CliError> {
    let n = samples(cfg);
    let seed = cfg.seed;
    match built {
        Built::Matrix { cocycle, leslie } => {
            let model: &dyn MatrixModel<f64> = &cocycle.model;
            let d = &cocycle.driver;
            let lag = cfg.estimator.lag.unwrap_or(if leslie.is_some() { model.dim() as u64 } else { 1 });
            let mut out = check_d1::<f64, _>(model, d, seed, n)?;
            out.extend(check_d2::<f64, _>(model, d, seed, n, lag)?);
            out.extend(check_d3::<f64, _>(model, d, seed, n, lag)?);
            if leslie.is_some() {
                leslie_summary(built, cfg, result)?;
            }
            Ok(out)
        }
        Built::Ode { cocycle, .. } => {
            let (coop, p1) = cooperative(built, cfg)?;
            let mut out: Vec<AssumptionReport> = p1.into_iter().collect();
            if let Some(m) = coop {
                let d = &cocycle.driver;
                out.push(check_o1::<f64, _>(&m, d, seed, n, &[])?);
                out.push(check_o2::<f64, _>(&m, d, seed, n, cocycle.cone != Cone::Standard)?);
                out.extend(check_o3::<f64, _>(&m, d, seed, n)?);
            }
            Ok(out)
        }
    }
}

fn leslie_summary(built: &Built, cfg: &RunConfig, result: &mut RunResult) -> Result<(), CliError> {
    let Built::Matrix { cocycle, leslie: Some(model) } = built else {
        return Err(CliError::Config("model: leslie-demo needs a leslie model".into()));
    };
    let n = samples(cfg);
    let witnesses = leslie_n_step_positive(model, &cocycle.driver, cfg.seed, n)?;
    result.leslie = Some(LeslieSummary {
        age_classes: model.fertility.len(),
        n_step_positive: witnesses.is_empty(),
        samples: n,
        witnesses,
        seed: cfg.seed,
    });
    Ok(())
}

fn omega(c: &dyn Cocycle<f64>, cfg: &RunConfig) -> DriverState {
    c.driver().sample_initial(cfg.seed)
}

/// Up to eleven evenly spaced directions from a recorded track, starting at `t = 0`.
fn direction_samples(w0: &[f64], track: &FloquetTrack<f64>) -> Vec<DirectionSample> {
    let mut out = vec![DirectionSample { t: 0.0, w: w0.to_vec() }];
    let h = track.history.as_deref().unwrap_or(&[]);
    if h.is_empty() {
        return out;
    }
    let stride = h.len().div_ceil(10);
    let mut idx: Vec<usize> = (stride - 1..h.len()).step_by(stride).collect();
    if idx.last() != Some(&(h.len() - 1)) {
        idx.push(h.len() - 1);
    }
    out.extend(idx.into_iter().map(|i| DirectionSample { t: h[i].t, w: h[i].w.clone() }));
    out
}

fn divergence_horizons(cfg: &RunConfig, horizon: f64) -> Result<Vec<f64>, CliError> {
    match &cfg.estimator.tolerances.divergence_horizons {
        Some(h) if h.last().is_some_and(|&x| x > horizon) => Err(CliError::Config(
            "estimator.tolerances.divergence_horizons: must not exceed the horizon".into(),
        )),
        Some(h) => Ok(h.clone()),
        None => Ok(vec![horizon / 8.0, horizon / 4.0, horizon / 2.0, horizon]),
    }
}

/// Running means of the growth rate at the diagnostic horizons, read off
/// the last record at or before each horizon.
fn running_means(track: &FloquetTrack<f64>, horizons: &[f64]) -> Vec<f64> {
    let h = track.history.as_deref().unwrap_or(&[]);
    let mut out = Vec::with_capacity(horizons.len());
    let (mut k, mut total, mut t) = (0, 0.0, 0.0);
    for &x in horizons {
        while k < h.len() && h[k].t <= x * (1.0 + 1e-12) {
            total += h[k].ln_rho;
            t = h[k].t;
            k += 1;
        }
        out.push(if t > 0.0 { total / t } else { f64::NAN });
    }
    out
}

fn estimate(built: &Built, cfg: &RunConfig, result: &mut RunResult) -> Result<(), CliError> {
    let c = built.cocycle();
    let om = omega(c, cfg);
    let est = &cfg.estimator;
    let horizon = cfg.horizon();
    let step = est.dt;
    let w0: Vec<f64> = warm_up(c, &om, est.warmup, step)?;
    let track = forward_floquet(c, &om, &w0, horizon, step, true)?;
    let probe = forward_floquet(c, &om, &cone_center(c.dim(), c.cone()), horizon, step, true)?;

    let ci = track.lambda1_ci(est.batches);
    result.lambda1 =
        Some(Estimate::new(ci.mean, "forward-floquet", horizon, cfg.seed).with_half_width(ci.half_width));
    let horizons = divergence_horizons(cfg, horizon)?;
    let threshold = est.tolerances.divergence_threshold;
    let mut means = running_means(&track, &horizons);

    if let Built::Ode { cocycle, .. } = built {
        let opts = KappaOptions {
            warmup: est.warmup,
            dt: step.unwrap_or(c.default_step()),
            batches: est.batches,
            checkpoints: horizons.clone(),
        };
        let k = lambda1_via_kappa(cocycle, &om, horizon, &opts)?;
        result.kappa_route = Some(
            Estimate::new(k.estimate.mean, "kappa-birkhoff", horizon, cfg.seed).with_half_width(k.estimate.half_width),
        );
        means = horizons
            .iter()
            .map(|&h| k.checkpoints.iter().find(|(t, _)| (t - h).abs() <= 1e-9 * h).map_or(f64::NAN, |p| p.1))
            .collect();
    }
    result.divergence = Some(DivergenceDiagnostic::from_means(horizons, means, threshold));
    result.w = Some(direction_samples(&w0, &track));

    let rows = track.history.as_deref().unwrap_or(&[]);
    let probes = probe.history.as_deref().unwrap_or(&[]);
    result.series = rows
        .iter()
        .zip(probes)
        .map(|(r, p)| SeriesRow {
            t: r.t,
            ln_rho: r.ln_rho,
            w: r.w.clone(),
            ln_proj_norm: None,
            direction_gap: Some(linalg::norm2(&linalg::sub(&p.w, &r.w))),
        })
        .collect();
    Ok(())
}

fn separate(built: &Built, cfg: &RunConfig, result: &mut RunResult) -> Result<(), CliError> {
    let c = built.cocycle();
    let om = omega(c, cfg);
    let est = &cfg.estimator;
    let horizon = cfg.horizon();
    let opts =
        SeparationOptions { warmup: est.warmup, step: est.dt, min_pairing: est.tolerances.min_pairing, probe: None };
    let s = separation_estimate(c, &om, horizon, &opts)?;
    let track = forward_floquet(c, &om, &s.w, horizon, est.dt, true)?;
    let ci = track.lambda1_ci(est.batches);

    result.lambda1 = Some(Estimate::new(s.lambda1_hat, "separation", horizon, cfg.seed).with_half_width(ci.half_width));
    result.lambda2 = Some(match s.lambda2_hat {
        Some(l) => Estimate::new(l, "separation", horizon, cfg.seed),
        None => Estimate::new(f64::NEG_INFINITY, "separation", horizon, cfg.seed)
            .with_note("the restricted map vanished; the second exponent is -inf"),
    });
    result.sigma = Some(match s.sigma_hat {
        Some(x) => Estimate::new(x, "separation-ratio", horizon, cfg.seed),
        None => Estimate::new(f64::INFINITY, "separation-ratio", horizon, cfg.seed)
            .with_note("the restricted map vanished; the separation rate is +inf"),
    });
    result.w = Some(direction_samples(&s.w, &track));
    result.w_star = Some(s.w_star.clone());
    result.separation = Some(SeparationSummary {
        tempered_slope: s.tempered_slope(),
        max_invariance_residual: s.max_invariance_residual(),
        f1_basis: s.f1_basis.clone(),
        horizon,
        seed: cfg.seed,
    });
    let rows = track.history.as_deref().unwrap_or(&[]);
    result.series = rows
        .iter()
        .zip(&s.history)
        .map(|(r, h)| SeriesRow {
            t: r.t,
            ln_rho: r.ln_rho,
            w: r.w.clone(),
            ln_proj_norm: Some(h.ln_proj_norm),
            direction_gap: Some(h.direction_gap),
        })
        .collect();
    Ok(())
}

fn oseledets(built: &Built, cfg: &RunConfig, result: &mut RunResult) -> Result<(), CliError> {
    let c = built.cocycle();
    let horizon = cfg.horizon();
    let ex = oseledets_qr(c, &omega(c, cfg), horizon, cfg.estimator.dt)?;
    result.lambda1 = Some(Estimate::new(ex[0], "qr", horizon, cfg.seed));
    result.lambda2 = Some(Estimate::new(ex[1], "qr", horizon, cfg.seed));
    result.sigma = Some(Estimate::new(ex[0] - ex[1], "qr", horizon, cfg.seed));
    result.exponents = Some(ex);
    Ok(())
}

fn orbit(built: &Built, cfg: &RunConfig, result: &mut RunResult) -> Result<(), CliError> {
    let c = built.cocycle();
    let om = omega(c, cfg);
    let depth = cfg.estimator.orbit_depth;
    let probe = cone_center(c.dim(), c.cone());
    let o = backward_entire_orbit(c, &om, depth, &probe)?;
    let convergence = orbit_convergence(c, &om, depth, &probe)?;
    let last = o.points.last().expect("orbit has points");
    result.w = Some(vec![DirectionSample { t: 0.0, w: last.direction.clone() }]);
    result.orbit = Some(OrbitSummary { depth, convergence, points: o.points, seed: cfg.seed });
    Ok(())
}

fn example_torus(cfg: &RunConfig, result: &mut RunResult) -> Result<(), CliError> {
    let horizon = cfg.horizon();
    let tol = cfg.estimator.tolerances.torus(cfg.estimator.warmup);
    let v = validate_against_closed_form(Some(cfg.rho()), horizon, &tol, cfg.seed)?;
    let s = &v.separation.sigma_hats;
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    result.sigma = Some(
        Estimate::new(mean, "separation-ratio", horizon, cfg.seed)
            .with_note(format!("mean over {} sampled base points", s.len())),
    );
    result.torus = Some(v);
    Ok(())
}
