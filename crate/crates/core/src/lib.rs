//! Simulation and estimation toolkit for positive random dynamical systems on ℝᴺ.
//!
//! The crate covers random matrix cocycles and random cooperative (or type-K
//! monotone) linear ODE cocycles driven by an ergodic base. It checks the
//! positivity, focusing and irreducibility conditions that guarantee a
//! principal Floquet direction, and estimates that direction together with
//! the principal Lyapunov exponent and the exponential-separation rate.
//!
//! All numerical code is generic over the scalar type through [`Real`]; the
//! aliases at the bottom of this file fix it to `f64` for everyday use.

pub mod cocycle;
pub mod driver;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod matrix;
pub mod ode;
pub mod order;
pub mod report;
pub mod stats;
pub mod torus;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Floating point scalar used by every numerical routine: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or parameter.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Matrix = linalg::Mat<f64>;
pub type MatrixF32 = linalg::Mat<f32>;
pub type MatrixStats = matrix::MatrixStats<f64>;
pub type FocusingCertificate = matrix::FocusingCertificate<f64>;
pub type FloquetTrack = estimators::FloquetTrack<f64>;
pub type SeparationEstimate = estimators::SeparationEstimate<f64>;
pub type IrreducibilityQuantities = ode::IrreducibilityQuantities<f64>;
