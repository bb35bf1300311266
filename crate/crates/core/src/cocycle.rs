//! The common interface the estimators run on: a linear skew-product
//! `Φ(t, ω, u) = (θ_t ω, U_ω(t) u)` acting on frames of column vectors.
//!
//! Scales are carried separately as `f64` logarithms, so a frame can shrink
//! or grow without bound.

use crate::driver::{DriverState, DriverSystem, TimeKind};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::matrix::{MatrixCocycle, MatrixModel};
use crate::order::Cone;
use crate::Real;

pub trait Cocycle<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn time(&self) -> TimeKind;
    fn driver(&self) -> &DriverSystem;

    /// Cone preserved by the cocycle.
    fn cone(&self) -> Cone {
        Cone::Standard
    }

    /// The base flow covered by this cocycle (`θ_t` for a primal cocycle,
    /// `θ_{−t}` for a dual one).
    fn shift(&self, omega: &DriverState, t: f64) -> Result<DriverState>;

    /// Replaces `frame` by `U_ω(t)·frame / e^c` and returns `c`. `t ≥ 0`, and
    /// integral in discrete time. An exactly vanishing image returns `−∞`
    /// and leaves a zero frame.
    fn propagate(&self, omega: &DriverState, t: f64, frame: &mut Mat<T>) -> Result<f64>;

    /// `U*_ω(t) = U_{θ_{−t}ω}(t)ᵀ`, covering `θ_{−t}`.
    fn dual(&self) -> Box<dyn Cocycle<T> + '_>;

    /// Default propagation step for estimators: 1 in discrete time, 0.1 for flows.
    fn default_step(&self) -> f64 {
        match self.time() {
            TimeKind::Discrete => 1.0,
            TimeKind::Continuous => 0.1,
        }
    }
}

impl<T: Real, C: Cocycle<T> + ?Sized> Cocycle<T> for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn time(&self) -> TimeKind {
        (**self).time()
    }
    fn driver(&self) -> &DriverSystem {
        (**self).driver()
    }
    fn cone(&self) -> Cone {
        (**self).cone()
    }
    fn shift(&self, omega: &DriverState, t: f64) -> Result<DriverState> {
        (**self).shift(omega, t)
    }
    fn propagate(&self, omega: &DriverState, t: f64, frame: &mut Mat<T>) -> Result<f64> {
        (**self).propagate(omega, t, frame)
    }
    fn dual(&self) -> Box<dyn Cocycle<T> + '_> {
        (**self).dual()
    }
    fn default_step(&self) -> f64 {
        (**self).default_step()
    }
}

/// Checks `t` is a nonnegative integer and returns it.
pub(crate) fn discrete_steps(t: f64) -> Result<u64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("propagation time {t} must be nonnegative")));
    }
    if t.fract() != 0.0 {
        return Err(Error::NonIntegerTime(t));
    }
    Ok(t as u64)
}

/// `frame ← S·frame` with rescaling by the max entry; returns the log factor.
pub(crate) fn apply_step<T: Real>(s: &Mat<T>, frame: &mut Mat<T>) -> Result<f64> {
    let next = s.matmul(frame)?;
    let m = next.max_abs();
    *frame = next;
    if m == T::zero() {
        return Ok(f64::NEG_INFINITY);
    }
    frame.scale(T::one() / m);
    Ok(m.as_f64().ln())
}

impl<T: Real, M: MatrixModel<T>> Cocycle<T> for MatrixCocycle<T, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn time(&self) -> TimeKind {
        TimeKind::Discrete
    }
    fn driver(&self) -> &DriverSystem {
        &self.driver
    }
    fn shift(&self, omega: &DriverState, t: f64) -> Result<DriverState> {
        self.driver.advance(omega, t)
    }
    fn propagate(&self, omega: &DriverState, t: f64, frame: &mut Mat<T>) -> Result<f64> {
        let n = discrete_steps(t)?;
        let mut w = *omega;
        let mut log = 0.0;
        for k in 0..n {
            if k > 0 {
                w = self.driver.advance(&w, 1.0)?;
            }
            log += apply_step(&self.model.emit(&w), frame)?;
            if log == f64::NEG_INFINITY {
                return Ok(log);
            }
        }
        Ok(log)
    }
    fn dual(&self) -> Box<dyn Cocycle<T> + '_> {
        Box::new(DualMatrixCocycle { primal: self })
    }
}

/// `S*(ω) = S(θ⁻¹ω)ᵀ` iterated along `θ⁻¹`.
pub struct DualMatrixCocycle<'a, T, M> {
    primal: &'a MatrixCocycle<T, M>,
}

impl<'a, T: Real, M: MatrixModel<T>> Cocycle<T> for DualMatrixCocycle<'a, T, M> {
    fn dim(&self) -> usize {
        self.primal.dim()
    }
    fn time(&self) -> TimeKind {
        TimeKind::Discrete
    }
    fn driver(&self) -> &DriverSystem {
        &self.primal.driver
    }
    fn shift(&self, omega: &DriverState, t: f64) -> Result<DriverState> {
        self.primal.driver.advance(omega, -t)
    }
    fn propagate(&self, omega: &DriverState, t: f64, frame: &mut Mat<T>) -> Result<f64> {
        let n = discrete_steps(t)?;
        let mut w = *omega;
        let mut log = 0.0;
        for _ in 0..n {
            w = self.primal.driver.advance(&w, -1.0)?;
            log += apply_step(&self.primal.model.emit(&w).transpose(), frame)?;
            if log == f64::NEG_INFINITY {
                return Ok(log);
            }
        }
        Ok(log)
    }
    fn dual(&self) -> Box<dyn Cocycle<T> + '_> {
        Box::new(self.primal)
    }
}

/// Image of a single vector: `U_ω(t) u = exp(log_scale) · direction` with a
/// unit direction. A vanishing image gives a zero direction and `−∞`.
pub fn apply_vector<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    u: &[T],
    t: f64,
) -> Result<(Vec<T>, f64)> {
    let n = cocycle.dim();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    if u.iter().all(|&x| x == T::zero()) {
        return Err(Error::ZeroVector);
    }
    let mut frame = Mat::from_vec(n, 1, u.to_vec())?;
    let c = cocycle.propagate(omega, t, &mut frame)?;
    let mut v = frame.column(0);
    let norm = crate::linalg::norm2(&v);
    if norm == T::zero() || c == f64::NEG_INFINITY {
        return Ok((vec![T::zero(); n], f64::NEG_INFINITY));
    }
    for x in v.iter_mut() {
        *x = *x / norm;
    }
    Ok((v, c + norm.as_f64().ln()))
}
