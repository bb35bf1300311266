//! Ergodic averages along the base orbit, the `λ̃₁ = ∫ κ dℙ` route and the
//! divergence diagnostic for averages that drift to `−∞`.

use serde::{Deserialize, Serialize};

use super::{time_grid, warm_up, DEFAULT_WARMUP};
use crate::cocycle::Cocycle;
use crate::driver::{DriverState, DriverSystem, TimeKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::ode::quad::{self, GL5_NODES, GL5_WEIGHTS};
use crate::ode::{OdeCocycle, OdeModel};
use crate::stats::{batch_means, mean_ci, MeanEstimate};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffAverage {
    pub mean: f64,
    pub half_width: f64,
    pub batch_means: Vec<f64>,
    pub horizon: f64,
}

/// Sorted, deduplicated cut points of `[0, horizon]`.
fn cuts(mut pts: Vec<f64>, horizon: f64) -> Vec<f64> {
    pts.push(0.0);
    pts.push(horizon);
    pts.retain(|&x| (0.0..=horizon).contains(&x));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tiny = 1e-13 * (1.0 + horizon);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for x in pts {
        if out.last().is_none_or(|&l| x - l > tiny) {
            out.push(x);
        } else if x == horizon {
            *out.last_mut().unwrap() = horizon;
        }
    }
    out
}

fn batch_edges(horizon: f64, batches: usize) -> Vec<f64> {
    (1..batches).map(|k| horizon * k as f64 / batches as f64).collect()
}

fn batch_of(t_mid: f64, horizon: f64, batches: usize) -> usize {
    ((t_mid / horizon * batches as f64) as usize).min(batches - 1)
}

/// Time average of `observable` over `[0, horizon]` with a batch-means
/// interval. In continuous time the integral is taken by adaptive
/// Gauss–Kronrod on each piece between crossings of the driver.
pub fn birkhoff_average(
    observable: &dyn Fn(&DriverState) -> f64,
    driver: &DriverSystem,
    omega: &DriverState,
    horizon: f64,
    batches: usize,
) -> Result<BirkhoffAverage> {
    if batches < 2 {
        return Err(Error::InvalidParameter("at least two batches are needed".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    let mut sums = vec![0.0; batches];
    let mut lens = vec![0.0; batches];
    match driver.time {
        TimeKind::Discrete => {
            if horizon.fract() != 0.0 {
                return Err(Error::NonIntegerTime(horizon));
            }
            let mut w = *omega;
            for k in 0..horizon as u64 {
                if k > 0 {
                    w = driver.advance(&w, 1.0)?;
                }
                let b = batch_of(k as f64 + 0.5, horizon, batches);
                sums[b] += observable(&w);
                lens[b] += 1.0;
            }
        }
        TimeKind::Continuous => {
            let mut pts = driver.crossing_times(omega, horizon);
            pts.extend(batch_edges(horizon, batches));
            let c = cuts(pts, horizon);
            for win in c.windows(2) {
                let (a, b) = (win[0], win[1]);
                let mid = 0.5 * (a + b);
                let r = driver.advance(omega, mid)?;
                let v = quad::integrate(|t| observable(&driver.flow_local(&r, t - mid)), a, b, 1e-12 * (b - a), 1e-12);
                let k = batch_of(mid, horizon, batches);
                sums[k] += v;
                lens[k] += b - a;
            }
        }
    }
    let means: Vec<f64> = sums.iter().zip(&lens).map(|(s, l)| s / l).collect();
    let ci = mean_ci(&means);
    Ok(BirkhoffAverage { mean: sums.iter().sum::<f64>() / horizon, half_width: ci.half_width, batch_means: means, horizon })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceDiagnostic {
    pub horizons: Vec<f64>,
    pub means: Vec<f64>,
    pub threshold: f64,
    pub strictly_decreasing: bool,
    /// Every mean lies below the threshold.
    pub below_threshold: bool,
    /// Both of the above.
    pub diverging: bool,
}

impl DivergenceDiagnostic {
    /// Verdict on running means recorded at increasing horizons.
    pub fn from_means(horizons: Vec<f64>, means: Vec<f64>, threshold: f64) -> Self {
        let strictly_decreasing = means.windows(2).all(|w| w[1] < w[0]);
        let below_threshold = means.iter().all(|&m| m < threshold);
        DivergenceDiagnostic {
            horizons,
            means,
            threshold,
            strictly_decreasing,
            below_threshold,
            diverging: strictly_decreasing && below_threshold,
        }
    }
}

fn check_horizons(horizons: &[f64]) -> Result<()> {
    if horizons.len() < 4 {
        return Err(Error::InvalidParameter("the divergence diagnostic needs at least four horizons".into()));
    }
    if horizons.windows(2).any(|w| !(w[1] > w[0])) || !(horizons[0] > 0.0) {
        return Err(Error::InvalidParameter("horizons must be positive and increasing".into()));
    }
    Ok(())
}

/// Birkhoff averages of `observable` at increasing horizons; flags a mean
/// that keeps decreasing below `threshold`.
pub fn divergence_diagnostic(
    observable: &dyn Fn(&DriverState) -> f64,
    driver: &DriverSystem,
    omega: &DriverState,
    horizons: &[f64],
    batches: usize,
    threshold: f64,
) -> Result<DivergenceDiagnostic> {
    check_horizons(horizons)?;
    let means = horizons
        .iter()
        .map(|&t| birkhoff_average(observable, driver, omega, t, batches).map(|b| b.mean))
        .collect::<Result<Vec<_>>>()?;
    Ok(DivergenceDiagnostic::from_means(horizons.to_vec(), means, threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaOptions {
    pub warmup: f64,
    /// Propagation cell length.
    pub dt: f64,
    pub batches: usize,
    /// Times at which the running mean is recorded.
    pub checkpoints: Vec<f64>,
}

impl Default for KappaOptions {
    fn default() -> Self {
        KappaOptions { warmup: DEFAULT_WARMUP, dt: 0.1, batches: 20, checkpoints: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRoute {
    /// `(1/T) ∫₀ᵀ κ(θ_t ω) dt` with its batch-means interval.
    pub estimate: MeanEstimate,
    pub batch_means: Vec<f64>,
    /// `(1/T) ln ‖U_ω(T) w(ω)‖` along the same track.
    pub lambda1_track: f64,
    pub horizon: f64,
    /// `(t, running mean)` at the requested checkpoints.
    pub checkpoints: Vec<(f64, f64)>,
}

/// Birkhoff average of `κ(θ_t ω) = ⟨A(θ_t ω) w(θ_t ω), w(θ_t ω)⟩`.
///
/// With `μ = tr A / N`, `κ = μ + ⟨(A − μI) w, w⟩`: the first part depends on
/// the base point only and is integrated adaptively, the second is smooth
/// on each cell and integrated by 5-point Gauss–Legendre with `w`
/// propagated to every node.
pub fn lambda1_via_kappa<T: Real, M: OdeModel<T>>(
    cocycle: &OdeCocycle<T, M>,
    omega: &DriverState,
    horizon: f64,
    opts: &KappaOptions,
) -> Result<KappaRoute> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    let batches = opts.batches.max(2);
    let n = cocycle.dim();
    let driver = &cocycle.driver;
    let mut w = warm_up(cocycle, omega, opts.warmup, Some(opts.dt))?;

    let mut pts = time_grid(horizon, opts.dt, TimeKind::Continuous)?;
    pts.extend(cocycle.model.smooth_breakpoints(driver, omega, horizon));
    pts.extend(batch_edges(horizon, batches));
    pts.extend(opts.checkpoints.iter().copied().filter(|&c| c > 0.0 && c <= horizon));
    let c = cuts(pts, horizon);
    let qtol = quad::attainable(1e-13, T::epsilon().as_f64());

    let mut pos = 0.0;
    let mut log_growth = 0.0;
    let step_to = |w: &mut Vec<T>, pos: &mut f64, to: f64, log_growth: &mut f64| -> Result<()> {
        if to > *pos {
            let base = driver.advance(omega, *pos)?;
            let mut frame = Mat::from_vec(n, 1, w.clone())?;
            let lc = cocycle.propagate(&base, to - *pos, &mut frame)?;
            let mut v = frame.column(0);
            let nv = linalg::normalize(&mut v).map_err(|_| Error::Numerical("principal track vanished".into()))?;
            *log_growth += lc + nv.as_f64().ln();
            *w = v;
            *pos = to;
        }
        Ok(())
    };

    let mut sums = vec![0.0; batches];
    let mut lens = vec![0.0; batches];
    let mut total = 0.0;
    let mut checkpoints = Vec::new();
    let mut next_cp = opts.checkpoints.iter().copied().filter(|&c| c > 0.0 && c <= horizon).peekable();
    for win in c.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mid = 0.5 * (a + b);
        let r = driver.advance(omega, mid)?;
        let field = |t: f64| cocycle.model.field(driver, &r, t - mid);
        let mu = |t: f64| (field(t).trace() / T::of(n as f64)).as_f64();
        let mut v = quad::integrate(mu, a, b, qtol * (b - a), qtol);
        let h = 0.5 * (b - a);
        for (x, wt) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            let s = mid + h * x;
            step_to(&mut w, &mut pos, s, &mut log_growth)?;
            let mut f = field(s);
            let m = f.trace() / T::of(n as f64);
            for i in 0..n {
                f[(i, i)] = f[(i, i)] - m;
            }
            v += h * wt * linalg::dot(&f.mul_vec(&w)?, &w).as_f64();
        }
        step_to(&mut w, &mut pos, b, &mut log_growth)?;
        let k = batch_of(mid, horizon, batches);
        sums[k] += v;
        lens[k] += b - a;
        total += v;
        while let Some(&cp) = next_cp.peek() {
            if cp <= b + 1e-13 * (1.0 + horizon) {
                checkpoints.push((cp, total / cp));
                next_cp.next();
            } else {
                break;
            }
        }
    }
    let means: Vec<f64> = sums.iter().zip(&lens).map(|(s, l)| s / l).collect();
    let (e, _) = batch_means(&means, batches);
    Ok(KappaRoute {
        estimate: MeanEstimate { mean: total / horizon, half_width: e.half_width, n: batches },
        batch_means: means,
        lambda1_track: log_growth / horizon,
        horizon,
        checkpoints,
    })
}

/// Running means of `κ` at `horizons` along one track, with the divergence flag.
pub fn kappa_divergence<T: Real, M: OdeModel<T>>(
    cocycle: &OdeCocycle<T, M>,
    omega: &DriverState,
    horizons: &[f64],
    threshold: f64,
    opts: &KappaOptions,
) -> Result<DivergenceDiagnostic> {
    check_horizons(horizons)?;
    let mut o = opts.clone();
    o.checkpoints = horizons.to_vec();
    let route = lambda1_via_kappa(cocycle, omega, *horizons.last().unwrap(), &o)?;
    let means = route.checkpoints.iter().map(|&(_, m)| m).collect();
    Ok(DivergenceDiagnostic::from_means(horizons.to_vec(), means, threshold))
}
