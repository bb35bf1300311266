//! Continuous-time cocycles generated by `u' = A(θ_t ω) u`, solved in the
//! Carathéodory sense piece by piece between the discontinuities of
//! `t ↦ A(θ_t ω)`.

mod checks;
pub mod integrator;
pub mod quad;

pub use checks::{
    check_o1, check_o2, check_o3, discover_chain, irreducibility_quantities, kappa_functional, l1_growth_bound,
    typek_to_cooperative, IrreducibilityQuantities,
};
pub use integrator::IntegratorOptions;

use std::marker::PhantomData;

use crate::cocycle::{apply_vector, Cocycle};
use crate::driver::{DriverKind, DriverState, DriverSystem, TimeKind};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::matrix::MatrixModel;
use crate::order::Cone;
use crate::Real;
use integrator::{integrate_frame, Flow};

/// `ω ↦ A(ω)` together with how it varies along the base flow.
pub trait OdeModel<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    /// `A(θ_s r)` for a reference point `r` and a local offset `s` that
    /// stays inside the smooth piece containing `r`. At the ends of that
    /// piece this is the one-sided limit from inside.
    fn field(&self, driver: &DriverSystem, reference: &DriverState, offset: f64) -> Mat<T>;

    /// Discontinuity times of `τ ↦ A(θ_τ ω)` between `0` and `t`, in travel order.
    fn smooth_breakpoints(&self, driver: &DriverSystem, omega: &DriverState, t: f64) -> Vec<f64> {
        driver.crossing_times(omega, t)
    }

    fn validate_driver(&self, _driver: &DriverSystem) -> Result<()> {
        Ok(())
    }
}

impl<T: Real, M: OdeModel<T> + ?Sized> OdeModel<T> for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn field(&self, driver: &DriverSystem, reference: &DriverState, offset: f64) -> Mat<T> {
        (**self).field(driver, reference, offset)
    }
    fn smooth_breakpoints(&self, driver: &DriverSystem, omega: &DriverState, t: f64) -> Vec<f64> {
        (**self).smooth_breakpoints(driver, omega, t)
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        (**self).validate_driver(driver)
    }
}

impl<T: Real, M: OdeModel<T> + ?Sized> OdeModel<T> for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn field(&self, driver: &DriverSystem, reference: &DriverState, offset: f64) -> Mat<T> {
        (**self).field(driver, reference, offset)
    }
    fn smooth_breakpoints(&self, driver: &DriverSystem, omega: &DriverState, t: f64) -> Vec<f64> {
        (**self).smooth_breakpoints(driver, omega, t)
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        (**self).validate_driver(driver)
    }
}

/// `A(θ_t ω)`, the right limit at a discontinuity.
pub fn field_at<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    omega: &DriverState,
    t: f64,
) -> Result<Mat<T>> {
    Ok(model.field(driver, &driver.advance(omega, t)?, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantOde<T> {
    a: Mat<T>,
}

impl<T: Real> ConstantOde<T> {
    pub fn new(a: Mat<T>) -> Result<Self> {
        if !a.is_square() || a.rows() < 2 {
            return Err(Error::InvalidParameter("field must be square with N ≥ 2".into()));
        }
        if !a.is_finite() {
            return Err(Error::InvalidParameter("field has non-finite entries".into()));
        }
        Ok(ConstantOde { a })
    }
}

impl<T: Real> OdeModel<T> for ConstantOde<T> {
    fn dim(&self) -> usize {
        self.a.rows()
    }
    fn field(&self, _driver: &DriverSystem, _reference: &DriverState, _offset: f64) -> Mat<T> {
        self.a.clone()
    }
    fn smooth_breakpoints(&self, _driver: &DriverSystem, _omega: &DriverState, _t: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// Constant on each unit interval of a continuous-time shift: the regime
/// with index `n` uses the matrix emitted by `inner` for that index.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantOde<M> {
    pub inner: M,
}

impl<T: Real, M: MatrixModel<T>> OdeModel<T> for PiecewiseConstantOde<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn field(&self, _driver: &DriverSystem, reference: &DriverState, _offset: f64) -> Mat<T> {
        self.inner.emit(reference)
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        if matches!(driver.kind, DriverKind::TorusRotation { .. }) {
            return Err(Error::InvalidParameter("piecewise-constant fields need a shift driver".into()));
        }
        self.inner.validate_driver(driver)
    }
}

/// `A(ω) = A₀ + A₁ sin(2πω₁) + A₂ cos(2πω₂)` on the torus. Continuous in
/// time, so it has no breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPeriodicOde<T> {
    pub a0: Mat<T>,
    pub a1: Mat<T>,
    pub a2: Mat<T>,
}

impl<T: Real> QuasiPeriodicOde<T> {
    pub fn new(a0: Mat<T>, a1: Mat<T>, a2: Mat<T>) -> Result<Self> {
        let n = a0.rows();
        for m in [&a0, &a1, &a2] {
            if m.rows() != n || m.cols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.cols() });
            }
        }
        Ok(QuasiPeriodicOde { a0, a1, a2 })
    }
}

impl<T: Real> OdeModel<T> for QuasiPeriodicOde<T> {
    fn dim(&self) -> usize {
        self.a0.rows()
    }
    fn field(&self, driver: &DriverSystem, reference: &DriverState, offset: f64) -> Mat<T> {
        let (x1, x2) = driver.flow_local(reference, offset).torus_coords().unwrap_or((0.0, 0.0));
        let tau = std::f64::consts::TAU;
        let (s, c) = (T::of((tau * x1).sin()), T::of((tau * x2).cos()));
        let mut a = self.a0.clone();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                a[(i, j)] = a[(i, j)] + self.a1[(i, j)] * s + self.a2[(i, j)] * c;
            }
        }
        a
    }
    fn smooth_breakpoints(&self, _driver: &DriverSystem, _omega: &DriverState, _t: f64) -> Vec<f64> {
        Vec::new()
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        match driver.kind {
            DriverKind::TorusRotation { .. } => Ok(()),
            _ => Err(Error::InvalidParameter("quasi-periodic fields need the torus driver".into())),
        }
    }
}

/// Sign flip of the off-diagonal blocks of a `(k, N−k)` block matrix. An
/// involution; it maps type-K monotone fields to cooperative ones.
pub fn flip_off_blocks<T: Real>(b: &Mat<T>, k: usize) -> Mat<T> {
    let mut a = b.clone();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if (i < k) != (j < k) {
                a[(i, j)] = -a[(i, j)];
            }
        }
    }
    a
}

/// `A = J B J` with `J = diag(I_k, −I_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeKConjugate<M> {
    pub inner: M,
    pub k: usize,
    pub l: usize,
}

impl<T: Real, M: OdeModel<T>> OdeModel<T> for TypeKConjugate<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn field(&self, driver: &DriverSystem, reference: &DriverState, offset: f64) -> Mat<T> {
        flip_off_blocks(&self.inner.field(driver, reference, offset), self.k)
    }
    fn smooth_breakpoints(&self, driver: &DriverSystem, omega: &DriverState, t: f64) -> Vec<f64> {
        self.inner.smooth_breakpoints(driver, omega, t)
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        self.inner.validate_driver(driver)
    }
}

/// A linear ODE model paired with its continuous-time driver.
pub struct OdeCocycle<T, M> {
    pub model: M,
    pub driver: DriverSystem,
    pub cone: Cone,
    pub options: IntegratorOptions,
    _scalar: PhantomData<T>,
}

impl<T: Real, M: OdeModel<T>> OdeCocycle<T, M> {
    pub fn new(model: M, driver: DriverSystem) -> Result<Self> {
        if driver.time != TimeKind::Continuous {
            return Err(Error::InvalidParameter("ODE cocycles need a continuous-time driver".into()));
        }
        model.validate_driver(&driver)?;
        Ok(OdeCocycle { model, driver, cone: Cone::Standard, options: IntegratorOptions::default(), _scalar: PhantomData })
    }

    pub fn with_cone(mut self, cone: Cone) -> Result<Self> {
        if let Some(d) = cone.dim() {
            if d != self.model.dim() {
                return Err(Error::DimensionMismatch { expected: self.model.dim(), got: d });
            }
        }
        self.cone = cone;
        Ok(self)
    }

    pub fn with_options(mut self, options: IntegratorOptions) -> Self {
        self.options = options;
        self
    }

    /// `A(θ_t ω)` (right limit at a discontinuity).
    pub fn field_at(&self, omega: &DriverState, t: f64) -> Result<Mat<T>> {
        field_at(&self.model, &self.driver, omega, t)
    }
}

struct Primal<'a, T, M>(&'a OdeCocycle<T, M>);
struct Reversed<'a, T, M>(&'a OdeCocycle<T, M>);

fn inside(mut v: Vec<f64>, t: f64) -> Vec<f64> {
    v.retain(|&x| x > 0.0 && x < t);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

impl<T: Real, M: OdeModel<T>> Flow<T> for Primal<'_, T, M> {
    fn dim(&self) -> usize {
        self.0.model.dim()
    }
    fn breakpoints(&self, omega: &DriverState, t: f64) -> Vec<f64> {
        inside(self.0.model.smooth_breakpoints(&self.0.driver, omega, t), t)
    }
    fn reference(&self, omega: &DriverState, s: f64) -> Result<DriverState> {
        self.0.driver.advance(omega, s)
    }
    fn field(&self, reference: &DriverState, offset: f64) -> Mat<T> {
        self.0.model.field(&self.0.driver, reference, offset)
    }
}

/// `v' = A(θ_{−s} ω)ᵀ v`, the generator of the dual cocycle.
impl<T: Real, M: OdeModel<T>> Flow<T> for Reversed<'_, T, M> {
    fn dim(&self) -> usize {
        self.0.model.dim()
    }
    fn breakpoints(&self, omega: &DriverState, t: f64) -> Vec<f64> {
        let v = self.0.model.smooth_breakpoints(&self.0.driver, omega, -t).into_iter().map(|x| -x).collect();
        inside(v, t)
    }
    fn reference(&self, omega: &DriverState, s: f64) -> Result<DriverState> {
        self.0.driver.advance(omega, -s)
    }
    fn field(&self, reference: &DriverState, offset: f64) -> Mat<T> {
        self.0.model.field(&self.0.driver, reference, -offset).transpose()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("propagation time {t} must be nonnegative")));
    }
    Ok(())
}

impl<T: Real, M: OdeModel<T>> Cocycle<T> for OdeCocycle<T, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn time(&self) -> TimeKind {
        TimeKind::Continuous
    }
    fn driver(&self) -> &DriverSystem {
        &self.driver
    }
    fn cone(&self) -> Cone {
        self.cone
    }
    fn shift(&self, omega: &DriverState, t: f64) -> Result<DriverState> {
        self.driver.advance(omega, t)
    }
    fn propagate(&self, omega: &DriverState, t: f64, frame: &mut Mat<T>) -> Result<f64> {
        check_time(t)?;
        integrate_frame(&Primal(self), omega, t, frame, &self.options)
    }
    fn dual(&self) -> Box<dyn Cocycle<T> + '_> {
        Box::new(DualOdeCocycle { primal: self })
    }
}

/// `U*_ω(t) = U_{θ_{−t}ω}(t)ᵀ`, covering `θ_{−t}`.
pub struct DualOdeCocycle<'a, T, M> {
    primal: &'a OdeCocycle<T, M>,
}

impl<T: Real, M: OdeModel<T>> Cocycle<T> for DualOdeCocycle<'_, T, M> {
    fn dim(&self) -> usize {
        self.primal.model.dim()
    }
    fn time(&self) -> TimeKind {
        TimeKind::Continuous
    }
    fn driver(&self) -> &DriverSystem {
        &self.primal.driver
    }
    fn cone(&self) -> Cone {
        self.primal.cone
    }
    fn shift(&self, omega: &DriverState, t: f64) -> Result<DriverState> {
        self.primal.driver.advance(omega, -t)
    }
    fn propagate(&self, omega: &DriverState, t: f64, frame: &mut Mat<T>) -> Result<f64> {
        check_time(t)?;
        integrate_frame(&Reversed(self.primal), omega, t, frame, &self.primal.options)
    }
    fn dual(&self) -> Box<dyn Cocycle<T> + '_> {
        Box::new(self.primal)
    }
}

/// `u(t; ω, u₀) = exp(log_scale) · direction`.
pub fn integrate<T: Real, M: OdeModel<T>>(
    cocycle: &OdeCocycle<T, M>,
    omega: &DriverState,
    u0: &[T],
    t: f64,
) -> Result<(Vec<T>, f64)> {
    apply_vector(cocycle, omega, u0, t)
}

/// Fundamental matrix `U_ω(t) = exp(log_scale) · direction` with
/// `‖direction‖₂ = 1`.
pub fn fundamental_matrix<T: Real, C: Cocycle<T> + ?Sized>(
    cocycle: &C,
    omega: &DriverState,
    t: f64,
) -> Result<(Mat<T>, f64)> {
    let mut frame = Mat::identity(cocycle.dim());
    let mut log = cocycle.propagate(omega, t, &mut frame)?;
    let s = frame.norm2();
    if s == T::zero() || log == f64::NEG_INFINITY {
        return Ok((Mat::zeros(cocycle.dim(), cocycle.dim()), f64::NEG_INFINITY));
    }
    frame.scale(T::one() / s);
    log += s.as_f64().ln();
    Ok((frame, log))
}
