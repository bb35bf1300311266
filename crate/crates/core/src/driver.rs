//! Ergodic base systems `(Ω, 𝔉, ℙ, θ_t)`.
//!
//! Three drivers are provided:
//!
//! * [`DriverKind::IidShift`]: the Bernoulli shift. The draw at integer index
//!   `n` comes from a counter-mode generator keyed by `(stream, n)`, so the
//!   shift is exactly invertible without storing history.
//! * [`DriverKind::MarkovShift`]: a stationary bi-infinite Markov chain. Indices
//!   `n > 0` follow the forward kernel from `X₀ ~ π`, indices `n < 0` follow the
//!   time-reversed kernel, so the path is again a pure function of the stream.
//! * [`DriverKind::TorusRotation`]: the linear flow `(ω₁ + t, ω₂ + ρt) mod 1` on
//!   `(0, 1]²`. `ρ` is a float, i.e. a rational stand-in for an irrational.
//!
//! In continuous time the two shifts become suspension flows: the state carries
//! a phase in `[0, 1)` and the regime index advances at every integer crossing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default rotation number, `√2 − 1`.
pub const DEFAULT_RHO: f64 = std::f64::consts::SQRT_2 - 1.0;

const SALT_RNG: u64 = 0x5851_f42d_4c95_7f2d;
const SALT_PHASE: u64 = 0x1405_7b7e_f767_814f;
const SALT_MARKOV: u64 = 0x9e37_79b9_7f4a_7c15;
const SALT_TORUS: u64 = 0xd1b5_4a32_d192_ed03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DriverKind {
    IidShift,
    MarkovShift(MarkovChain),
    TorusRotation { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    reversed: Vec<Vec<f64>>,
}

impl MarkovChain {
    /// Validates a row-stochastic, irreducible transition matrix and
    /// precomputes its stationary law and time reversal.
    pub fn new(transition: Vec<Vec<f64>>) -> Result<Self> {
        let k = transition.len();
        if k == 0 {
            return Err(Error::InvalidParameter("markov chain needs at least one state".into()));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: row.len() });
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidParameter(format!("transition row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("transition row {i} sums to {s}, not 1")));
            }
        }
        if !strongly_connected(&transition) {
            return Err(Error::InvalidParameter("transition matrix is not irreducible".into()));
        }
        let stationary = stationary_law(&transition);
        let reversed = (0..k)
            .map(|i| (0..k).map(|j| stationary[j] * transition[j][i] / stationary[i]).collect())
            .collect();
        Ok(MarkovChain { transition, stationary, reversed })
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    fn sample(probs: &[f64], u: f64) -> usize {
        let mut acc = 0.0;
        for (j, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    fn initial(&self, stream: u64) -> usize {
        Self::sample(&self.stationary, unit_f64(prf(stream, 0, SALT_MARKOV)))
    }

    /// Chain state at index `n` of the path keyed by `stream`.
    fn state_at(&self, stream: u64, n: i64) -> usize {
        self.walk(stream, 0, self.initial(stream), n)
    }

    /// Moves from the known state at `from` to index `to`. Steps that head
    /// away from the origin reuse `state`; otherwise the path is regenerated
    /// from index 0.
    fn walk(&self, stream: u64, from: i64, state: usize, to: i64) -> usize {
        let away = (from >= 0 && to >= from) || (from <= 0 && to <= from);
        if !away {
            return self.state_at(stream, to);
        }
        let mut s = state;
        if to >= from {
            for n in (from + 1)..=to {
                s = Self::sample(&self.transition[s], unit_f64(prf(stream, n, SALT_MARKOV)));
            }
        } else {
            for n in (to..from).rev() {
                s = Self::sample(&self.reversed[s], unit_f64(prf(stream, n, SALT_MARKOV)));
            }
        }
        s
    }
}

fn strongly_connected(p: &[Vec<f64>]) -> bool {
    let k = p.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let w = if forward { p[i][j] } else { p[j][i] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

fn stationary_law(p: &[Vec<f64>]) -> Vec<f64> {
    // lazy power iteration converges for every irreducible chain
    let k = p.len();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..100_000 {
        let mut next = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                next[j] += pi[i] * 0.5 * (p[i][j] + if i == j { 1.0 } else { 0.0 });
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    pi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverSystem {
    pub kind: DriverKind,
    pub time: TimeKind,
}

/// A point `ω` of the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriverState {
    /// Shift drivers: stream key, regime index and (continuous time) phase in
    /// `[0, 1)`. `chain` caches the Markov state at `index`.
    Shift { stream: u64, index: i64, phase: f64, chain: Option<usize> },
    /// Torus point in `(0, 1]²`.
    Torus { x1: f64, x2: f64 },
}

impl DriverState {
    /// Generator for the i.i.d. draw attached to the current regime index.
    pub fn rng(&self) -> ChaCha8Rng {
        let seed = match *self {
            DriverState::Shift { stream, index, .. } => prf(stream, index, SALT_RNG),
            DriverState::Torus { x1, x2 } => prf(x1.to_bits(), x2.to_bits() as i64, SALT_RNG),
        };
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn index(&self) -> i64 {
        match *self {
            DriverState::Shift { index, .. } => index,
            DriverState::Torus { .. } => 0,
        }
    }

    pub fn chain_state(&self) -> Option<usize> {
        match *self {
            DriverState::Shift { chain, .. } => chain,
            DriverState::Torus { .. } => None,
        }
    }

    pub fn torus_coords(&self) -> Option<(f64, f64)> {
        match *self {
            DriverState::Torus { x1, x2 } => Some((x1, x2)),
            DriverState::Shift { .. } => None,
        }
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-mode pseudo-random function over ℤ.
pub fn prf(stream: u64, index: i64, salt: u64) -> u64 {
    mix(mix(stream ^ salt).wrapping_add(index as u64))
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Reduces `y` into `(0, 1]`.
#[inline]
pub fn wrap_unit(y: f64) -> f64 {
    let r = y - y.ceil() + 1.0;
    if r > 1.0 {
        1.0
    } else {
        r
    }
}

/// `(x + c·t) mod 1` into `(0, 1]` with the product's rounding error carried.
fn wrap_affine(x: f64, c: f64, t: f64) -> f64 {
    let p = c * t;
    let e = c.mul_add(t, -p);
    let frac = p - p.floor();
    wrap_unit(x + frac + e)
}

/// Integers `m` in `(a, b]` (for `b ≥ a`) or `[b, a)` (for `b < a`), in the
/// order they are met when travelling from `a` to `b`.
fn integer_crossings(a: f64, b: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if b >= a {
        let mut m = a.floor() + 1.0;
        while m <= b {
            out.push(m);
            m += 1.0;
        }
    } else {
        let mut m = a.ceil() - 1.0;
        while m >= b {
            out.push(m);
            m -= 1.0;
        }
    }
    out
}

impl DriverSystem {
    pub fn new(kind: DriverKind, time: TimeKind) -> Result<Self> {
        if let DriverKind::TorusRotation { rho } = kind {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::InvalidParameter(format!("rotation number {rho} must lie in (0, 1)")));
            }
        }
        Ok(DriverSystem { kind, time })
    }

    pub fn iid(time: TimeKind) -> Self {
        DriverSystem { kind: DriverKind::IidShift, time }
    }

    pub fn markov(transition: Vec<Vec<f64>>, time: TimeKind) -> Result<Self> {
        Ok(DriverSystem { kind: DriverKind::MarkovShift(MarkovChain::new(transition)?), time })
    }

    pub fn torus(rho: f64) -> Result<Self> {
        Self::new(DriverKind::TorusRotation { rho }, TimeKind::Continuous)
    }

    pub fn is_continuous(&self) -> bool {
        self.time == TimeKind::Continuous
    }

    /// Every built-in driver is a group action, so negative time is always available.
    pub fn supports_negative_time(&self) -> bool {
        true
    }

    /// Deterministic sample of `ω ~ ℙ` for `seed`.
    pub fn sample_initial(&self, seed: u64) -> DriverState {
        let stream = mix(seed);
        match &self.kind {
            DriverKind::IidShift => DriverState::Shift {
                stream,
                index: 0,
                phase: self.initial_phase(stream),
                chain: None,
            },
            DriverKind::MarkovShift(chain) => DriverState::Shift {
                stream,
                index: 0,
                phase: self.initial_phase(stream),
                chain: Some(chain.state_at(stream, 0)),
            },
            DriverKind::TorusRotation { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(prf(stream, 0, SALT_TORUS));
                let x1 = 1.0 - rng.random::<f64>();
                let x2 = 1.0 - rng.random::<f64>();
                DriverState::Torus { x1, x2 }
            }
        }
    }

    fn initial_phase(&self, stream: u64) -> f64 {
        match self.time {
            TimeKind::Discrete => 0.0,
            TimeKind::Continuous => unit_f64(prf(stream, 0, SALT_PHASE)),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time {t} is not finite")));
        }
        if self.time == TimeKind::Discrete && t.fract() != 0.0 {
            return Err(Error::NonIntegerTime(t));
        }
        Ok(())
    }

    /// `θ_t ω`.
    pub fn advance(&self, st: &DriverState, t: f64) -> Result<DriverState> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(*st);
        }
        Ok(match (*st, &self.kind) {
            (DriverState::Torus { x1, x2 }, DriverKind::TorusRotation { rho }) => {
                DriverState::Torus { x1: wrap_affine(x1, 1.0, t), x2: wrap_affine(x2, *rho, t) }
            }
            (DriverState::Shift { stream, index, phase, chain }, kind) => {
                let whole = t.trunc();
                let mut p = phase + (t - whole);
                let mut idx = index + whole as i64;
                if p >= 1.0 {
                    p -= 1.0;
                    idx += 1;
                } else if p < 0.0 {
                    p += 1.0;
                    idx -= 1;
                }
                if p >= 1.0 {
                    p = 0.0;
                    idx += 1;
                }
                let chain = match kind {
                    DriverKind::MarkovShift(mc) => {
                        let s = chain.unwrap_or_else(|| mc.state_at(stream, index));
                        Some(mc.walk(stream, index, s, idx))
                    }
                    _ => None,
                };
                DriverState::Shift { stream, index: idx, phase: p, chain }
            }
            _ => return Err(Error::InvalidParameter("driver state does not match driver kind".into())),
        })
    }

    /// `θ_s ω` without reducing coordinates back into the fundamental domain.
    /// Only meaningful inside one smooth piece; models use it to evaluate
    /// one-sided limits at piece ends.
    pub fn flow_local(&self, st: &DriverState, s: f64) -> DriverState {
        match (*st, &self.kind) {
            (DriverState::Torus { x1, x2 }, DriverKind::TorusRotation { rho }) => {
                DriverState::Torus { x1: x1 + s, x2: x2 + rho * s }
            }
            (DriverState::Shift { stream, index, phase, chain }, _) => {
                DriverState::Shift { stream, index, phase: phase + s, chain }
            }
            (other, _) => other,
        }
    }

    /// Times in `(0, t]` (or `[t, 0)` for `t < 0`) at which `θ_τ ω` crosses
    /// the boundary of the fundamental domain, in travel order.
    pub fn crossing_times(&self, st: &DriverState, t: f64) -> Vec<f64> {
        if t == 0.0 {
            return Vec::new();
        }
        let mut times: Vec<f64> = match (*st, &self.kind) {
            (DriverState::Torus { x1, x2 }, DriverKind::TorusRotation { rho }) => {
                let mut v: Vec<f64> = integer_crossings(x1, x1 + t).into_iter().map(|m| m - x1).collect();
                v.extend(integer_crossings(x2, x2 + rho * t).into_iter().map(|m| (m - x2) / rho));
                v
            }
            (DriverState::Shift { phase, .. }, _) => {
                if self.time == TimeKind::Discrete {
                    return Vec::new();
                }
                let mut v: Vec<f64> = integer_crossings(phase, phase + t).into_iter().map(|m| m - phase).collect();
                // the regime starts at phase 0, which is not a crossing when moving forward
                v.retain(|&tau| tau != 0.0);
                v
            }
            _ => Vec::new(),
        };
        times.retain(|&tau| if t > 0.0 { tau > 0.0 && tau <= t } else { tau < 0.0 && tau >= t });
        if t > 0.0 {
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        } else {
            times.sort_by(|a, b| b.partial_cmp(a).unwrap());
        }
        times.dedup();
        times
    }

    /// `θ_t ω` together with the crossing times met on the way.
    pub fn advance_with_crossings(&self, st: &DriverState, t: f64) -> Result<(DriverState, Vec<f64>)> {
        Ok((self.advance(st, t)?, self.crossing_times(st, t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn torus_close(a: &DriverState, b: &DriverState, tol: f64) -> bool {
        let (a1, a2) = a.torus_coords().unwrap();
        let (b1, b2) = b.torus_coords().unwrap();
        let d = |x: f64, y: f64| {
            let r = (x - y).abs();
            r.min(1.0 - r)
        };
        d(a1, b1) <= tol && d(a2, b2) <= tol
    }

    #[test]
    fn torus_advance_examples() {
        let sys = DriverSystem::torus(DEFAULT_RHO).unwrap();
        let st = DriverState::Torus { x1: 0.25, x2: 0.5 };
        let one = sys.advance(&st, 1.0).unwrap();
        assert_eq!(one.torus_coords().unwrap().0, 0.25);
        let expect = wrap_unit(0.5 + DEFAULT_RHO);
        assert!((one.torus_coords().unwrap().1 - expect).abs() < 1e-16);
        assert_eq!(sys.advance(&st, 0.0).unwrap(), st);
        let back = sys.advance(&one, -1.0).unwrap();
        assert!(torus_close(&back, &st, 1e-15));
    }

    #[test]
    fn sample_initial_is_deterministic_and_in_domain() {
        let sys = DriverSystem::torus(DEFAULT_RHO).unwrap();
        let a = sys.sample_initial(7);
        assert_eq!(a, sys.sample_initial(7));
        let (x1, x2) = a.torus_coords().unwrap();
        assert!(x1 > 0.0 && x1 <= 1.0 && x2 > 0.0 && x2 <= 1.0);
        assert_ne!(a, sys.sample_initial(8));
    }

    #[test]
    fn iid_streams_differ_by_seed() {
        let sys = DriverSystem::iid(TimeKind::Discrete);
        let a: f64 = sys.sample_initial(1).rng().random();
        let b: f64 = sys.sample_initial(2).rng().random();
        assert_ne!(a, b);
    }

    #[test]
    fn single_state_markov_is_constant() {
        let sys = DriverSystem::markov(vec![vec![1.0]], TimeKind::Discrete).unwrap();
        let st = sys.sample_initial(3);
        for t in [-5.0, -1.0, 1.0, 17.0] {
            assert_eq!(sys.advance(&st, t).unwrap().chain_state(), Some(0));
        }
    }

    #[test]
    fn markov_validation() {
        assert!(DriverSystem::markov(vec![vec![0.5, 0.4], vec![0.5, 0.5]], TimeKind::Discrete).is_err());
        assert!(DriverSystem::markov(vec![vec![1.0, 0.0], vec![0.5, 0.5]], TimeKind::Discrete).is_err());
        let mc = MarkovChain::new(vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        assert!((mc.stationary()[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn discrete_rejects_fractional_time() {
        let sys = DriverSystem::iid(TimeKind::Discrete);
        let st = sys.sample_initial(1);
        assert_eq!(sys.advance(&st, 0.5), Err(Error::NonIntegerTime(0.5)));
    }

    #[test]
    fn shift_semigroup_is_exact() {
        let chain = vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![0.3, 0.3, 0.4]];
        for sys in [
            DriverSystem::iid(TimeKind::Discrete),
            DriverSystem::markov(chain, TimeKind::Discrete).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for seed in 0..20u64 {
                let st = sys.sample_initial(seed);
                let s = rng.random_range(-30i64..30) as f64;
                let t = rng.random_range(-30i64..30) as f64;
                let two = sys.advance(&sys.advance(&st, s).unwrap(), t).unwrap();
                let one = sys.advance(&st, s + t).unwrap();
                assert_eq!(two, one, "seed {seed}, s {s}, t {t}");
            }
        }
    }

    #[test]
    fn markov_path_is_consistent_in_both_directions() {
        let sys = DriverSystem::markov(vec![vec![0.5, 0.5], vec![0.2, 0.8]], TimeKind::Discrete).unwrap();
        let st = sys.sample_initial(5);
        let far = sys.advance(&st, -40.0).unwrap();
        let mut walk = far;
        for n in -39..=40 {
            walk = sys.advance(&walk, 1.0).unwrap();
            let direct = sys.advance(&st, n as f64).unwrap();
            assert_eq!(walk.chain_state(), direct.chain_state());
        }
    }

    #[test]
    fn torus_semigroup_drift_is_tiny() {
        let sys = DriverSystem::torus(DEFAULT_RHO).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..200u64 {
            let st = sys.sample_initial(seed);
            let s = rng.random_range(-1000.0..1000.0);
            let t = rng.random_range(-1000.0..1000.0);
            let two = sys.advance(&sys.advance(&st, s).unwrap(), t).unwrap();
            let one = sys.advance(&st, s + t).unwrap();
            assert!(torus_close(&two, &one, 1e-12), "{two:?} vs {one:?}");
        }
    }

    #[test]
    fn continuous_shift_semigroup() {
        let sys = DriverSystem::iid(TimeKind::Continuous);
        let st = sys.sample_initial(9);
        let a = sys.advance(&sys.advance(&st, 2.75).unwrap(), -1.5).unwrap();
        let b = sys.advance(&st, 1.25).unwrap();
        match (a, b) {
            (
                DriverState::Shift { index: i1, phase: p1, .. },
                DriverState::Shift { index: i2, phase: p2, .. },
            ) => {
                assert_eq!(i1, i2);
                assert!((p1 - p2).abs() < 1e-14);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn torus_crossings_match_wraps() {
        let sys = DriverSystem::torus(DEFAULT_RHO).unwrap();
        let st = DriverState::Torus { x1: 0.25, x2: 0.5 };
        let times = sys.crossing_times(&st, 3.0);
        // x1 wraps at 0.75, 1.75, 2.75; x2 wraps at 0.5/ρ ≈ 1.207
        assert_eq!(times.len(), 4);
        assert!((times[0] - 0.75).abs() < 1e-15);
        assert!((times[1] - 0.5 / DEFAULT_RHO).abs() < 1e-14);
        let back = sys.crossing_times(&st, -1.0);
        assert_eq!(back, vec![-0.25]);
        let shift = DriverSystem::iid(TimeKind::Continuous);
        let s = DriverState::Shift { stream: 1, index: 0, phase: 0.0, chain: None };
        assert_eq!(shift.crossing_times(&s, 2.5), vec![1.0, 2.0]);
        assert_eq!(shift.crossing_times(&s, -1.5), vec![-1.0]);
    }

    #[test]
    fn iid_draws_are_independent_across_indices() {
        // chi-square test of independence on a 4x4 contingency table of
        // (draw at index n, draw at index n + 3)
        let sys = DriverSystem::iid(TimeKind::Discrete);
        let bins = 4;
        let mut table = vec![vec![0.0f64; bins]; bins];
        let samples = 4000;
        for seed in 0..samples {
            let st = sys.sample_initial(seed);
            let a: f64 = st.rng().random();
            let b: f64 = sys.advance(&st, 3.0).unwrap().rng().random();
            table[(a * bins as f64) as usize][(b * bins as f64) as usize] += 1.0;
        }
        let n = samples as f64;
        let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..bins).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        let mut chi2 = 0.0;
        for i in 0..bins {
            for j in 0..bins {
                let e = rows[i] * cols[j] / n;
                chi2 += (table[i][j] - e).powi(2) / e;
            }
        }
        // 9 degrees of freedom, 99.9% quantile ≈ 27.88
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }
}
