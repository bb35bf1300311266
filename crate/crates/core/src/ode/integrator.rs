//! Frame propagation for `X' = A(s) X` with a piecewise continuous `A`.
//!
//! The interval is split at the breakpoints, and no step crosses one. On
//! each piece the trace part is removed: with `μ = tr A / N`, the frame
//! solves `Y' = (A − μI) Y` by Dormand–Prince 5(4) and the scalar
//! `ℓ = ∫ μ` is integrated separately by adaptive Gauss–Kronrod, so
//! `X = e^ℓ Y`. A scalar coefficient that blows up (the torus example's
//! `a(ω)`) then never enters the Runge–Kutta error control.

use serde::{Deserialize, Serialize};

use super::quad;
use crate::driver::DriverState;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Relative tolerance of the Runge–Kutta error control.
    pub rtol: f64,
    /// Relative tolerance of the trace quadrature.
    pub quad_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { rtol: 1e-10, quad_tol: 1e-13, max_steps: 10_000_000 }
    }
}

/// A nonautonomous linear field presented piece by piece.
pub trait Flow<T: Real> {
    fn dim(&self) -> usize;
    /// Discontinuity times of `s ↦ A(s)` in `(0, t)`, increasing.
    fn breakpoints(&self, omega: &DriverState, t: f64) -> Vec<f64>;
    /// Base point at local time `s` (inside a piece).
    fn reference(&self, omega: &DriverState, s: f64) -> Result<DriverState>;
    /// `A` at local offset `offset` from `reference`, continuous while the
    /// offset stays within the reference's piece.
    fn field(&self, reference: &DriverState, offset: f64) -> Mat<T>;
}

/// Propagates `frame` over `[0, t]`, normalizing it to unit max-entry at
/// the end. Returns the log of the removed scale.
pub fn integrate_frame<T: Real, F: Flow<T> + ?Sized>(
    flow: &F,
    omega: &DriverState,
    t: f64,
    frame: &mut Mat<T>,
    opts: &IntegratorOptions,
) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("integration time {t} must be nonnegative")));
    }
    if frame.rows() != flow.dim() {
        return Err(Error::DimensionMismatch { expected: flow.dim(), got: frame.rows() });
    }
    let mut log = renormalize(frame);
    if t == 0.0 || log == f64::NEG_INFINITY {
        return Ok(log);
    }
    let tiny = |x: f64| 1e-14 * (1.0 + x.abs());
    let mut cuts: Vec<f64> = Vec::new();
    let mut last = 0.0;
    for b in flow.breakpoints(omega, t) {
        if b - last > tiny(b) && t - b > tiny(b) {
            cuts.push(b);
            last = b;
        }
    }
    cuts.push(t);
    let mut a = 0.0;
    for b in cuts {
        let mid = 0.5 * (a + b);
        let r = flow.reference(omega, mid)?;
        log += integrate_piece(&|s: f64| flow.field(&r, s - mid), a, b, frame, opts)?;
        a = b;
    }
    Ok(log)
}

/// Scales `m` to unit max-entry and returns the log of the factor.
fn renormalize<T: Real>(m: &mut Mat<T>) -> f64 {
    let s = m.max_abs();
    if s == T::zero() {
        return f64::NEG_INFINITY;
    }
    if s != T::one() {
        m.scale(T::one() / s);
    }
    s.as_f64().ln()
}

fn trace_free<T: Real>(g: &Mat<T>) -> (Mat<T>, f64) {
    let n = g.rows();
    let mu = g.trace() / T::of(n as f64);
    let mut h = g.clone();
    for i in 0..n {
        h[(i, i)] = h[(i, i)] - mu;
    }
    (h, mu.as_f64())
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn integrate_piece<T: Real>(
    g: &dyn Fn(f64) -> Mat<T>,
    a: f64,
    b: f64,
    y: &mut Mat<T>,
    opts: &IntegratorOptions,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let rtol = opts.rtol.max(1e3 * T::epsilon().as_f64());
    let qtol = quad::attainable(opts.quad_tol, T::epsilon().as_f64());
    let (rows, cols) = (y.rows(), y.cols());
    let rhs = |s: f64, y: &Mat<T>| -> Mat<T> { trace_free(&g(s)).0.matmul(y).expect("square field") };
    let mu = |s: f64| trace_free(&g(s)).1;

    let mut log = 0.0;
    let mut s = a;
    let mut k: Vec<Mat<T>> = Vec::with_capacity(7);
    k.push(rhs(s, y));
    let d0 = y.max_abs().as_f64();
    let d1 = k[0].max_abs().as_f64();
    let mut h = if d1 <= 1e-300 { b - a } else { (0.01 * d0 / d1).max(1e-6 * (b - a)) }.min(b - a);
    let h_min = |s: f64| 64.0 * f64::EPSILON * (1.0 + s.abs().max(b.abs()));
    let mut steps = 0usize;
    // renormalization window, [1e-100, 1e100] in double precision
    let bound = T::of(1e100).min(T::max_value().sqrt());

    while s < b {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Numerical(format!("step budget exhausted on [{a}, {b}] at {s}")));
        }
        let mut last = false;
        if s + h >= b || b - (s + h) < 1e-3 * h {
            h = b - s;
            last = true;
        }
        k.truncate(1);
        let mut stage = y.clone();
        for i in 1..7 {
            stage.clone_from(y);
            for (j, kj) in k.iter().enumerate() {
                let c = A[i][j];
                if c != 0.0 {
                    axpy(&mut stage, T::of(h * c), kj);
                }
            }
            let si = if i >= 5 { s + h } else { s + C[i] * h };
            k.push(rhs(si, &stage));
        }
        // stage now holds the 5th-order solution (row 7 of A = b weights)
        let y5 = stage;
        let mut err_sq = 0.0;
        for c in 0..cols {
            let mut col_scale = 0.0f64;
            for r in 0..rows {
                col_scale = col_scale.max(y[(r, c)].abs().as_f64()).max(y5[(r, c)].abs().as_f64());
            }
            let atol = rtol * col_scale;
            for r in 0..rows {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[(r, c)].as_f64();
                }
                e *= h;
                let sc = atol + rtol * y[(r, c)].abs().as_f64().max(y5[(r, c)].abs().as_f64());
                if sc > 0.0 {
                    err_sq += (e / sc).powi(2);
                }
            }
        }
        let err = (err_sq / (rows * cols) as f64).sqrt();
        if err <= 1.0 {
            let s_next = if last { b } else { s + h };
            log += quad::integrate(mu, s, s_next, qtol * (s_next - s), qtol);
            *y = y5;
            let k7 = k.pop().expect("seven stages");
            k.clear();
            k.push(k7);
            s = s_next;
            let m = y.max_abs();
            if !(m >= T::one() / bound && m <= bound) {
                if m == T::zero() {
                    return Ok(f64::NEG_INFINITY);
                }
                log += renormalize(y);
                k[0].scale(T::one() / m);
            }
            if last {
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).min(5.0) };
            h *= fac;
        } else {
            if !err.is_finite() {
                h *= 0.2;
            } else {
                h *= (0.9 * err.powf(-0.2)).max(0.2);
            }
            if h < h_min(s) {
                return Err(Error::StepUnderflow { time: s, piece_start: a, piece_end: b });
            }
        }
    }
    log += renormalize(y);
    Ok(log)
}

/// `y += a·x`.
fn axpy<T: Real>(y: &mut Mat<T>, a: T, x: &Mat<T>) {
    for r in 0..y.rows() {
        for c in 0..y.cols() {
            y[(r, c)] = y[(r, c)] + a * x[(r, c)];
        }
    }
}
