//! Numerical procedures for the principal Floquet direction, the principal
//! Lyapunov exponent and the exponential separation rate.

mod birkhoff;
mod separation;

pub use birkhoff::{
    birkhoff_average, divergence_diagnostic, kappa_divergence, lambda1_via_kappa, BirkhoffAverage,
    DivergenceDiagnostic, KappaOptions, KappaRoute,
};
pub use separation::{oseledets_qr, separation_estimate, SeparationEstimate, SeparationOptions, SeparationRecord};

use serde::{Deserialize, Serialize};

use crate::cocycle::Cocycle;
use crate::driver::{DriverState, TimeKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::order::{cone_contains, Cone};
use crate::stats::{batch_means, MeanEstimate};
use crate::Real;

/// Default pullback depth for warm-ups.
pub const DEFAULT_WARMUP: f64 = 50.0;

/// Relative slack for cone membership of propagated directions. Flows get
/// more room than products because the integrator error is relative to the
/// largest coordinate.
pub(crate) fn cone_slack(time: TimeKind) -> f64 {
    match time {
        TimeKind::Discrete => 1e-12,
        TimeKind::Continuous => 1e-9,
    }
}

/// Time grid `0 = t₀ < … < t_n = horizon` with spacing `step` (the last
/// interval may be shorter).
pub(crate) fn time_grid(horizon: f64, step: f64, time: TimeKind) -> Result<Vec<f64>> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be nonnegative")));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    if time == TimeKind::Discrete && (horizon.fract() != 0.0 || step.fract() != 0.0) {
        return Err(Error::NonIntegerTime(if horizon.fract() != 0.0 { horizon } else { step }));
    }
    let ratio = horizon / step;
    let mut n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        n = ratio.ceil();
    }
    let n = n as usize;
    let mut g: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    g.push(horizon);
    if g.len() >= 2 && g[g.len() - 2] >= horizon {
        g.remove(g.len() - 2);
    }
    Ok(g)
}

/// Unit vector with all coordinates `±1/√N` in the cone's orientation.
pub fn cone_center<T: Real>(n: usize, cone: Cone) -> Vec<T> {
    let s = 1.0 / (n as f64).sqrt();
    (0..n).map(|i| T::of(s * cone.orientation(i))).collect()
}

fn check_in_cone<T: Real>(v: &[T], cone: Cone, slack: f64, time: f64) -> Result<()> {
    let norm = linalg::norm2(v).as_f64();
    for (i, x) in cone.to_standard(v).iter().enumerate() {
        let x = x.as_f64();
        if x < -slack * norm {
            return Err(Error::LeftCone { time, index: i, value: x });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetRecord<T> {
    pub t: f64,
    pub w: Vec<T>,
    /// `ln ρ` over the step ending at `t`.
    pub ln_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetTrack<T> {
    /// Unit direction at the end of the run.
    pub w: Vec<T>,
    /// `Σ ln ρ` over the steps.
    pub log_growth: f64,
    pub horizon: f64,
    pub step: f64,
    pub omega_end: DriverState,
    /// `ln ρ` of every step.
    pub ln_rho: Vec<f64>,
    pub history: Option<Vec<FloquetRecord<T>>>,
}

impl<T: Real> FloquetTrack<T> {
    /// `λ̂₁ = log_growth / T`.
    pub fn lambda1_hat(&self) -> f64 {
        self.log_growth / self.horizon
    }

    /// Batch-means interval for `λ̂₁` from the per-step growth rates.
    pub fn lambda1_ci(&self, batches: usize) -> MeanEstimate {
        let rates: Vec<f64> = self.ln_rho.iter().map(|&x| x / self.step).collect();
        let (e, _) = batch_means(&rates, batches);
        MeanEstimate { mean: self.lambda1_hat(), half_width: e.half_width, n: e.n }
    }
}

/// Iterates `u ← U(step) u / ‖U(step) u‖` from `u0` at `omega` for `horizon`.
pub fn forward_floquet<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    u0: &[T],
    horizon: f64,
    step: Option<f64>,
    record_history: bool,
) -> Result<FloquetTrack<T>> {
    let n = cocycle.dim();
    if u0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u0.len() });
    }
    if u0.iter().all(|&x| x == T::zero()) {
        return Err(Error::ZeroVector);
    }
    let cone = cocycle.cone();
    if !cone_contains(u0, cone)? {
        return Err(Error::InvalidParameter("initial vector must lie in the cone".into()));
    }
    let step = step.unwrap_or_else(|| cocycle.default_step());
    let grid = time_grid(horizon, step, cocycle.time())?;
    let slack = cone_slack(cocycle.time());

    let mut w = u0.to_vec();
    linalg::normalize(&mut w)?;
    let mut frame = Mat::from_vec(n, 1, w.clone())?;
    let mut base = *omega;
    let mut log_growth = 0.0;
    let mut ln_rho = Vec::with_capacity(grid.len());
    let mut history = record_history.then(Vec::new);
    for win in grid.windows(2) {
        let dt = win[1] - win[0];
        let c = cocycle.propagate(&base, dt, &mut frame)?;
        let mut v = frame.column(0);
        let norm = linalg::norm2(&v);
        if c == f64::NEG_INFINITY || norm == T::zero() {
            return Err(Error::Numerical(format!("orbit collapsed to zero at t = {}", win[1])));
        }
        for x in v.iter_mut() {
            *x = *x / norm;
        }
        check_in_cone(&v, cone, slack, win[1])?;
        let r = c + norm.as_f64().ln();
        log_growth += r;
        ln_rho.push(r);
        frame = Mat::from_vec(n, 1, v.clone())?;
        base = cocycle.shift(omega, win[1])?;
        if let Some(h) = history.as_mut() {
            h.push(FloquetRecord { t: win[1], w: v.clone(), ln_rho: r });
        }
        w = v;
    }
    Ok(FloquetTrack { w, log_growth, horizon, step, omega_end: base, ln_rho, history })
}

/// Principal direction at `omega` by a pullback run from `θ_{−depth} ω`.
pub fn warm_up<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    depth: f64,
    step: Option<f64>,
) -> Result<Vec<T>> {
    if !cocycle.driver().supports_negative_time() {
        return Err(Error::NoInverse("pullback needs negative time".into()));
    }
    let start = cocycle.shift(omega, -depth)?;
    let u0 = cone_center(cocycle.dim(), cocycle.cone());
    Ok(forward_floquet(cocycle, &start, &u0, depth, step, false)?.w)
}

/// Principal direction `w*(ω)` of the dual cocycle.
pub fn dual_floquet<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    horizon: f64,
) -> Result<Vec<T>> {
    let dual = cocycle.dual();
    warm_up(&*dual, omega, horizon, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint<T> {
    pub n: i64,
    pub direction: Vec<T>,
    /// `ln ‖v(n)‖`, with `v(0)` a unit vector.
    pub log_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntireOrbit<T> {
    pub depth: u64,
    /// Points for `n = −depth, …, 0`.
    pub points: Vec<OrbitPoint<T>>,
}

impl<T: Real> EntireOrbit<T> {
    /// `v(n) = exp(log_norm) · direction`.
    pub fn vector(&self, n: i64) -> Option<Vec<T>> {
        let p = self.points.iter().find(|p| p.n == n)?;
        let s = T::of(p.log_norm.exp());
        Some(p.direction.iter().map(|&x| x * s).collect())
    }
}

/// Pushes `probe` from `θ_{−m} ω` to `ω` in unit steps, recording the
/// normalized directions and the norms of the resulting entire orbit.
pub fn backward_entire_orbit<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    depth: u64,
    probe: &[T],
) -> Result<EntireOrbit<T>> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    if !cocycle.driver().supports_negative_time() {
        return Err(Error::NoInverse("entire orbits need negative time".into()));
    }
    let start = cocycle.shift(omega, -(depth as f64))?;
    let track = forward_floquet(cocycle, &start, probe, depth as f64, Some(1.0), true)?;
    let history = track.history.unwrap_or_default();
    let mut dir0 = probe.to_vec();
    linalg::normalize(&mut dir0)?;
    let mut dirs = vec![dir0];
    dirs.extend(history.iter().map(|r| r.w.clone()));
    // log_norm(0) = 0 and log_norm(n) = log_norm(n + 1) − ln ρ_n
    let mut log_norm = vec![0.0; dirs.len()];
    for k in (0..history.len()).rev() {
        log_norm[k] = log_norm[k + 1] - history[k].ln_rho;
    }
    let points = dirs
        .into_iter()
        .zip(log_norm)
        .enumerate()
        .map(|(k, (direction, log_norm))| OrbitPoint { n: k as i64 - depth as i64, direction, log_norm })
        .collect();
    Ok(EntireOrbit { depth, points })
}

/// `‖v_m(0) − v_{2m}(0)‖` for the directions at `n = 0` from depths `m` and `2m`.
pub fn orbit_convergence<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    depth: u64,
    probe: &[T],
) -> Result<f64> {
    let a = backward_entire_orbit(cocycle, omega, depth, probe)?;
    let b = backward_entire_orbit(cocycle, omega, 2 * depth, probe)?;
    let da = &a.points.last().expect("nonempty").direction;
    let db = &b.points.last().expect("nonempty").direction;
    Ok(linalg::norm2(&linalg::sub(da, db)).as_f64())
}
