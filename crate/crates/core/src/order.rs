//! Ordered structure of ℝᴺ: the standard cone, type-K cones, monotonic
//! ℓᵖ norms, the lattice decomposition `u = u⁺ − u⁻` and part comparability.
//!
//! Membership tests use exact signs. Callers that need slack (the
//! estimators use `1e-12 · ‖u‖`) apply it themselves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    /// All coordinates nonnegative.
    Standard,
    /// Coordinates `0..k` nonnegative, `k..k+l` nonpositive.
    TypeK { k: usize, l: usize },
}

impl Cone {
    pub fn dim(&self) -> Option<usize> {
        match *self {
            Cone::Standard => None,
            Cone::TypeK { k, l } => Some(k + l),
        }
    }

    /// Sign of coordinate `i` in the cone's orthant: `+1` or `-1`.
    #[inline]
    pub fn orientation(&self, i: usize) -> f64 {
        match *self {
            Cone::Standard => 1.0,
            Cone::TypeK { k, .. } => {
                if i < k {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != n => Err(Error::DimensionMismatch { expected: d, got: n }),
            _ => Ok(()),
        }
    }

    /// Maps `u` into standard-cone coordinates (flips the L block).
    pub fn to_standard<T: Real>(&self, u: &[T]) -> Vec<T> {
        u.iter().enumerate().map(|(i, &x)| x * T::of(self.orientation(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NormKind {
    L1,
    #[default]
    L2,
    LInf,
}

pub fn norm<T: Real>(u: &[T], kind: NormKind) -> T {
    match kind {
        NormKind::L1 => u.iter().map(|x| x.abs()).sum(),
        NormKind::L2 => crate::linalg::norm2(u),
        NormKind::LInf => u.iter().fold(T::zero(), |m, &x| m.max(x.abs())),
    }
}

pub fn cone_contains<T: Real>(u: &[T], cone: Cone) -> Result<bool> {
    cone.check_dim(u.len())?;
    Ok(cone.to_standard(u).iter().all(|&x| x >= T::zero()))
}

pub fn cone_interior_contains<T: Real>(u: &[T], cone: Cone) -> Result<bool> {
    cone.check_dim(u.len())?;
    Ok(cone.to_standard(u).iter().all(|&x| x > T::zero()))
}

/// Lattice decomposition in the standard order: `u⁺ = u ∨ 0`, `u⁻ = (−u) ∨ 0`.
pub fn positive_decompose<T: Real>(u: &[T]) -> (Vec<T>, Vec<T>) {
    let plus = u.iter().map(|&x| x.max(T::zero())).collect();
    let minus = u.iter().map(|&x| (-x).max(T::zero())).collect();
    (plus, minus)
}

/// Tightest `(α̲, ᾱ)` with `α̲·v ≤ u ≤ ᾱ·v` in the order of `cone`, or `None`
/// when `u` is not in the part of `v`.
pub fn comparable<T: Real>(u: &[T], v: &[T], cone: Cone) -> Result<Option<(T, T)>> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: u.len() });
    }
    cone.check_dim(u.len())?;
    if u.iter().all(|&x| x == T::zero()) || v.iter().all(|&x| x == T::zero()) {
        return Err(Error::ZeroVector);
    }
    let us = cone.to_standard(u);
    let vs = cone.to_standard(v);
    if us.iter().chain(&vs).any(|&x| x < T::zero()) {
        return Err(Error::InvalidParameter("comparable: inputs must lie in the cone".into()));
    }
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for (&a, &b) in us.iter().zip(&vs) {
        if b == T::zero() {
            if a != T::zero() {
                return Ok(None);
            }
            continue;
        }
        let r = a / b;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if lo > T::zero() && lo.is_finite() {
        Ok(Some((lo, hi)))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn membership_examples() {
        assert!(cone_contains(&[1.0, 0.0, 2.0], Cone::Standard).unwrap());
        assert!(cone_contains(&[1.0, -1.0], Cone::TypeK { k: 1, l: 1 }).unwrap());
        assert!(!cone_contains(&[-1e-12, 1.0], Cone::Standard).unwrap());
        assert!(cone_interior_contains(&[1.0, 2.0], Cone::Standard).unwrap());
        assert!(!cone_interior_contains(&[1.0, 0.0], Cone::Standard).unwrap());
        assert!(cone_interior_contains(&[2.0, -3.0], Cone::TypeK { k: 1, l: 1 }).unwrap());
        assert!(cone_contains(&[1.0, 2.0, 3.0], Cone::TypeK { k: 1, l: 1 }).is_err());
    }

    #[test]
    fn decomposition_examples() {
        assert_eq!(positive_decompose(&[3.0, -2.0]), (vec![3.0, 0.0], vec![0.0, 2.0]));
        assert_eq!(positive_decompose(&[0.0, 0.0]), (vec![0.0, 0.0], vec![0.0, 0.0]));
        assert_eq!(positive_decompose(&[-1.0, -1.0]), (vec![0.0, 0.0], vec![1.0, 1.0]));
    }

    #[test]
    fn comparable_examples() {
        assert_eq!(comparable(&[2.0, 4.0], &[1.0, 1.0], Cone::Standard).unwrap(), Some((2.0, 4.0)));
        assert_eq!(comparable(&[1.0, 3.0], &[1.0, 3.0], Cone::Standard).unwrap(), Some((1.0, 1.0)));
        assert_eq!(comparable(&[1.0, 0.0], &[1.0, 1.0], Cone::Standard).unwrap(), None);
        assert_eq!(comparable(&[0.0, 0.0], &[1.0, 1.0], Cone::Standard), Err(Error::ZeroVector));
        let k = Cone::TypeK { k: 1, l: 1 };
        assert_eq!(comparable(&[2.0, -6.0], &[1.0, -2.0], k).unwrap(), Some((2.0, 3.0)));
    }

    /// Independent check of tightness: the bounds hold and any tighter pair fails.
    fn brute_force_ok(u: &[f64], v: &[f64], lo: f64, hi: f64) -> bool {
        let holds = |a: f64, b: f64| u.iter().zip(v).all(|(&x, &y)| a * y <= x + 1e-12 && x <= b * y + 1e-12);
        holds(lo, hi) && !holds(lo * (1.0 + 1e-6), hi) && !holds(lo, hi * (1.0 - 1e-6))
    }

    proptest! {
        #[test]
        fn decomposition_reassembles(u in prop::collection::vec(-1e6f64..1e6, 2..8)) {
            let (p, m) = positive_decompose(&u);
            for i in 0..u.len() {
                prop_assert_eq!(p[i] - m[i], u[i]);
            }
            prop_assert!(cone_contains(&p, Cone::Standard).unwrap());
            prop_assert!(cone_contains(&m, Cone::Standard).unwrap());
            for kind in [NormKind::L1, NormKind::L2, NormKind::LInf] {
                prop_assert!(norm(&p, kind) <= norm(&u, kind) * (1.0 + 1e-15));
                prop_assert!(norm(&m, kind) <= norm(&u, kind) * (1.0 + 1e-15));
            }
        }

        #[test]
        fn norms_are_monotonic(pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 2..8)) {
            let u: Vec<f64> = pairs.iter().map(|&(a, _)| a).collect();
            let v: Vec<f64> = pairs.iter().map(|&(a, b)| a + b).collect();
            for kind in [NormKind::L1, NormKind::L2, NormKind::LInf] {
                prop_assert!(norm(&u, kind) <= norm(&v, kind) * (1.0 + 1e-15));
            }
        }

        #[test]
        fn comparable_is_tight_symmetric_transitive(
            u in prop::collection::vec(0.1f64..10.0, 3),
            v in prop::collection::vec(0.1f64..10.0, 3),
            w in prop::collection::vec(0.1f64..10.0, 3),
        ) {
            let uv = comparable(&u, &v, Cone::Standard).unwrap();
            let vu = comparable(&v, &u, Cone::Standard).unwrap();
            let vw = comparable(&v, &w, Cone::Standard).unwrap();
            let uw = comparable(&u, &w, Cone::Standard).unwrap();
            prop_assert_eq!(uv.is_some(), vu.is_some());
            let (lo, hi) = uv.unwrap();
            prop_assert!(brute_force_ok(&u, &v, lo, hi));
            // transitivity: the composed bounds are valid, the direct ones are tighter
            let (lo2, hi2) = vw.unwrap();
            let (lo3, hi3) = uw.unwrap();
            prop_assert!(lo3 >= lo * lo2 * (1.0 - 1e-12));
            prop_assert!(hi3 <= hi * hi2 * (1.0 + 1e-12));
        }

        #[test]
        fn comparable_absent_iff_support_differs(
            u in prop::collection::vec(prop_oneof![Just(0.0f64), 0.5f64..2.0], 3),
            v in prop::collection::vec(prop_oneof![Just(0.0f64), 0.5f64..2.0], 3),
        ) {
            prop_assume!(u.iter().any(|&x| x > 0.0) && v.iter().any(|&x| x > 0.0));
            let same_support = u.iter().zip(&v).all(|(&a, &b)| (a > 0.0) == (b > 0.0));
            let r = comparable(&u, &v, Cone::Standard).unwrap();
            prop_assert_eq!(r.is_some(), same_support);
            prop_assert_eq!(comparable(&v, &u, Cone::Standard).unwrap().is_some(), same_support);
        }
    }
}
