//! Exponential separation between `span{w}` and `F̃₁ = (w*)^⊥`, and the QR
//! Lyapunov spectrum used to cross-check it.

use serde::{Deserialize, Serialize};

use super::{cone_center, time_grid, warm_up, DEFAULT_WARMUP};
use crate::cocycle::Cocycle;
use crate::driver::DriverState;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::stats::ols_slope;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationOptions<T> {
    /// Pullback depth for `w` and `w*`.
    pub warmup: f64,
    /// Re-orthonormalization step; the cocycle's default when `None`.
    pub step: Option<f64>,
    /// Smallest admissible `⟨w, w*⟩`.
    pub min_pairing: f64,
    /// Positive vector whose direction is compared against `w` along the
    /// run; the cone center when `None`.
    pub probe: Option<Vec<T>>,
}

impl<T> Default for SeparationOptions<T> {
    fn default() -> Self {
        SeparationOptions { warmup: DEFAULT_WARMUP, step: None, min_pairing: 1e-8, probe: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRecord {
    pub t: f64,
    /// `ln ρ` of the principal track over the step ending at `t`.
    pub ln_rho: f64,
    /// `ln ‖P̃(θ_t ω)‖ = −ln ⟨w, w*⟩`.
    pub ln_proj_norm: f64,
    /// `ln(‖U(t)|F̃₁‖ / ‖U(t) w‖)`; `−∞` once the restricted map vanishes.
    pub ln_ratio: f64,
    /// Largest `|⟨U u, w*(θ_t ω)⟩| / ‖U u‖` over the one-step images of the
    /// `F̃₁` basis columns, before they are projected back onto `F̃₁`.
    pub invariance_residual: f64,
    /// `‖u(t)/‖u(t)‖ − w(θ_t ω)‖` for the probe.
    pub direction_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationEstimate<T> {
    pub lambda1_hat: f64,
    /// `None` when the restricted norm vanished exactly (`λ̂₂ = −∞`).
    pub lambda2_hat: Option<f64>,
    /// `None` stands for `σ̂ = +∞`.
    pub sigma_hat: Option<f64>,
    pub horizon: f64,
    pub w: Vec<T>,
    pub w_star: Vec<T>,
    /// Orthonormal basis of `F̃₁(ω)`.
    pub f1_basis: Vec<Vec<T>>,
    pub history: Vec<SeparationRecord>,
}

impl<T: Real> SeparationEstimate<T> {
    /// Least-squares slope of `t ↦ ln ‖P̃(θ_t ω)‖` over `[T/2, T]`.
    pub fn tempered_slope(&self) -> f64 {
        let tail: Vec<&SeparationRecord> = self.history.iter().filter(|r| r.t >= 0.5 * self.horizon).collect();
        let xs: Vec<f64> = tail.iter().map(|r| r.t).collect();
        let ys: Vec<f64> = tail.iter().map(|r| r.ln_proj_norm).collect();
        ols_slope(&xs, &ys)
    }

    pub fn max_invariance_residual(&self) -> f64 {
        self.history.iter().fold(0.0, |m, r| m.max(r.invariance_residual))
    }
}

fn unit<T: Real>(frame: &Mat<T>) -> Result<(Vec<T>, T)> {
    let mut v = frame.column(0);
    let n = linalg::normalize(&mut v)?;
    Ok((v, n))
}

/// `w*(θ_{t_k} ω)` on the grid, from a warm-up at `θ_T ω` followed by the
/// dual cocycle run back to `ω`.
fn dual_track<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    grid: &[f64],
    warmup: f64,
    step: Option<f64>,
) -> Result<Vec<Vec<T>>> {
    let dual = cocycle.dual();
    let horizon = *grid.last().expect("nonempty grid");
    let end = cocycle.shift(omega, horizon)?;
    let mut ws = warm_up(&*dual, &end, warmup, step)?;
    let n = cocycle.dim();
    let mut out = vec![ws.clone()];
    for k in (0..grid.len() - 1).rev() {
        let base = cocycle.shift(omega, grid[k + 1])?;
        let mut frame = Mat::from_vec(n, 1, ws)?;
        dual.propagate(&base, grid[k + 1] - grid[k], &mut frame)?;
        ws = unit(&frame).map_err(|_| Error::Numerical("dual direction vanished".into()))?.0;
        out.push(ws.clone());
    }
    out.reverse();
    Ok(out)
}

/// Estimates `λ̂₁`, `λ̂₂ = λ̂₁ − σ̂` and `σ̂` from the growth ratio between
/// `F̃₁(ω)` and `w(ω)` over `[0, horizon]`.
pub fn separation_estimate<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    horizon: f64,
    opts: &SeparationOptions<T>,
) -> Result<SeparationEstimate<T>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    let n = cocycle.dim();
    let step = opts.step.unwrap_or_else(|| cocycle.default_step());
    let grid = time_grid(horizon, step, cocycle.time())?;

    let w0 = warm_up(cocycle, omega, opts.warmup, Some(step))?;
    let ws_track = dual_track(cocycle, omega, &grid, opts.warmup, Some(step))?;
    let ws0 = ws_track[0].clone();
    let pairing = linalg::dot(&w0, &ws0).as_f64();
    if !(pairing > opts.min_pairing) {
        return Err(Error::IllConditionedProjection(pairing));
    }
    let basis = linalg::orthogonal_complement(&ws0)?;
    let f1_basis: Vec<Vec<T>> = (0..n - 1).map(|j| basis.column(j)).collect();

    let mut probe = opts.probe.clone().unwrap_or_else(|| {
        let mut p = vec![T::zero(); n];
        p[0] = T::of(cocycle.cone().orientation(0));
        let c: Vec<T> = cone_center(n, cocycle.cone());
        // bias towards the first axis while staying in the cone
        p.iter().zip(&c).map(|(&a, &b)| a + T::of(0.1) * b).collect()
    });
    linalg::normalize(&mut probe)?;

    let mut w_frame = Mat::from_vec(n, 1, w0.clone())?;
    let mut p_frame = Mat::from_vec(n, 1, probe)?;
    let mut f_frame = basis.clone();
    let mut r_acc: Mat<T> = Mat::identity(n - 1);
    let mut log_w = 0.0;
    let mut log_f = 0.0;
    let mut f_dead = false;
    let mut history = Vec::with_capacity(grid.len());

    for (k, win) in grid.windows(2).enumerate() {
        let dt = win[1] - win[0];
        let base = cocycle.shift(omega, win[0])?;

        let cw = cocycle.propagate(&base, dt, &mut w_frame)?;
        let (w, nw) = unit(&w_frame).map_err(|_| Error::Numerical(format!("principal track vanished at t = {}", win[1])))?;
        let ln_rho = cw + nw.as_f64().ln();
        log_w += ln_rho;
        w_frame = Mat::from_vec(n, 1, w.clone())?;

        cocycle.propagate(&base, dt, &mut p_frame)?;
        let (p, _) = unit(&p_frame).map_err(|_| Error::Numerical("probe vanished".into()))?;
        p_frame = Mat::from_vec(n, 1, p.clone())?;

        let ws = &ws_track[k + 1];
        let mut residual = 0.0f64;
        if !f_dead {
            let cf = cocycle.propagate(&base, dt, &mut f_frame)?;
            // errors leak along w and would then grow faster than F̃₁ itself;
            // the projection along w onto (w*)^⊥ removes them
            let pair = linalg::dot(&w, ws);
            for j in 0..n - 1 {
                let col = f_frame.column(j);
                let nc = linalg::norm2(&col);
                let c = linalg::dot(&col, ws);
                if nc > T::zero() {
                    residual = residual.max((c.abs() / nc).as_f64());
                }
                let fixed: Vec<T> = col.iter().zip(&w).map(|(&x, &y)| x - y * c / pair).collect();
                f_frame.set_column(j, &fixed);
            }
            let (q, r) = linalg::qr(&f_frame);
            r_acc = r.matmul(&r_acc)?;
            let s = r_acc.max_abs();
            if cf == f64::NEG_INFINITY || s == T::zero() {
                f_dead = true;
            } else {
                r_acc.scale(T::one() / s);
                log_f += cf + s.as_f64().ln();
                f_frame = q;
            }
        }
        let ln_ratio = if f_dead {
            f64::NEG_INFINITY
        } else {
            let top = r_acc.norm2();
            if top == T::zero() {
                f_dead = true;
                f64::NEG_INFINITY
            } else {
                log_f + top.as_f64().ln() - log_w
            }
        };
        let pair = linalg::dot(&w, ws).as_f64();
        history.push(SeparationRecord {
            t: win[1],
            ln_rho,
            ln_proj_norm: -pair.ln(),
            ln_ratio,
            invariance_residual: residual,
            direction_gap: linalg::norm2(&linalg::sub(&p, &w)).as_f64(),
        });
    }

    let lambda1_hat = log_w / horizon;
    let final_ratio = history.last().map(|r| r.ln_ratio).unwrap_or(f64::NEG_INFINITY);
    let (lambda2_hat, sigma_hat) = if final_ratio == f64::NEG_INFINITY {
        (None, None)
    } else {
        let sigma = -final_ratio / horizon;
        (Some(lambda1_hat - sigma), Some(sigma))
    };
    Ok(SeparationEstimate { lambda1_hat, lambda2_hat, sigma_hat, horizon, w: w0, w_star: ws0, f1_basis, history })
}

/// Lyapunov spectrum by the discrete QR method, in decreasing order. An
/// exactly vanishing direction contributes `−∞`.
pub fn oseledets_qr<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    horizon: f64,
    step: Option<f64>,
) -> Result<Vec<f64>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    let n = cocycle.dim();
    let step = step.unwrap_or_else(|| cocycle.default_step());
    let grid = time_grid(horizon, step, cocycle.time())?;
    let mut frame: Mat<T> = Mat::identity(n);
    let mut sums = vec![0.0; n];
    for win in grid.windows(2) {
        let base = cocycle.shift(omega, win[0])?;
        let c = cocycle.propagate(&base, win[1] - win[0], &mut frame)?;
        let (q, r) = linalg::qr(&frame);
        for (i, s) in sums.iter_mut().enumerate() {
            let d = r[(i, i)];
            *s += if c == f64::NEG_INFINITY || d == T::zero() { f64::NEG_INFINITY } else { c + d.as_f64().ln() };
        }
        frame = q;
    }
    let mut out: Vec<f64> = sums.into_iter().map(|s| s / horizon).collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(out)
}
