//! Cooperativity, integrability and irreducibility checks for ODE models,
//! the ℓ₁ growth bound, the κ functional and type-K conjugacy.

use serde::{Deserialize, Serialize};

use super::quad::{self, GL5_NODES, GL5_WEIGHTS};
use super::{OdeModel, TypeKConjugate};
use crate::driver::{DriverState, DriverSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::report::{AssumptionReport, Condition, Moment, Witness};
use crate::stats::batch_means;
use crate::Real;

const MAX_WITNESSES: usize = 5;

/// Smooth pieces of `[0, t]`: `(start, end, reference, reference time)`.
fn pieces<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    omega: &DriverState,
    t: f64,
) -> Result<Vec<(f64, f64, DriverState, f64)>> {
    let mut cuts: Vec<f64> = model.smooth_breakpoints(driver, omega, t);
    cuts.retain(|&x| x > 0.0 && x < t);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.push(t);
    let mut out = Vec::with_capacity(cuts.len());
    let mut a = 0.0;
    for b in cuts {
        if b > a {
            let mid = 0.5 * (a + b);
            out.push((a, b, driver.advance(omega, mid)?, mid));
        }
        a = b;
    }
    Ok(out)
}

/// `A(θ_τ ω)` at `τ` inside piece `p` (one-sided at its ends).
fn eval<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    p: &(f64, f64, DriverState, f64),
    tau: f64,
) -> Mat<f64> {
    model.field(driver, &p.2, tau - p.3).to_f64()
}

/// Off-diagonal nonnegativity at `(θ_k ω₀, t)` for `k < n_samples` and `t`
/// in the grid (a default grid of 101 points on `[0, 1]` when empty).
pub fn check_o1<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    seed: u64,
    n_samples: usize,
    t_grid: &[f64],
) -> Result<AssumptionReport> {
    let default: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let grid = if t_grid.is_empty() { &default[..] } else { t_grid };
    let omega0 = driver.sample_initial(seed);
    let mut wit = Vec::new();
    for k in 0..n_samples {
        let w = driver.advance(&omega0, k as f64)?;
        for &t in grid {
            let a = super::field_at(model, driver, &w, t)?.to_f64();
            for i in 0..a.rows() {
                for j in 0..a.cols() {
                    if i != j && a[(i, j)] < 0.0 && wit.len() < MAX_WITNESSES {
                        wit.push(Witness::FieldEntry { sample: k, time: t, row: i, col: j, value: a[(i, j)] });
                    }
                }
            }
        }
    }
    Ok(if wit.is_empty() {
        AssumptionReport::holds(Condition::O1, n_samples)
    } else {
        AssumptionReport::fails(Condition::O1, n_samples, wit)
    })
}

/// Sample mean of `ω ↦ maxᵢⱼ aᵢⱼ(ω)` along one orbit. With `type_k` the
/// model is read as a type-K field `B` and the reported functional is
/// `maxᵢⱼ |bᵢⱼ|`.
pub fn check_o2<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    seed: u64,
    n_samples: usize,
    type_k: bool,
) -> Result<AssumptionReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let omega0 = driver.sample_initial(seed);
    let mut max_entry = Vec::with_capacity(n_samples);
    let mut max_abs = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let a = super::field_at(model, driver, &omega0, k as f64)?.to_f64();
        max_entry.push(a.as_slice().iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)));
        max_abs.push(a.max_abs());
    }
    let b = n_samples.clamp(1, 20);
    let (e_max, _) = batch_means(&max_entry, b);
    let (e_abs, _) = batch_means(&max_abs, b);
    let moments = vec![
        Moment { name: "max a_ij".into(), estimate: e_max },
        Moment { name: "max |a_ij|".into(), estimate: e_abs },
    ];
    let primary = if type_k { e_abs } else { e_max };
    Ok(AssumptionReport::empirical(Condition::O2, n_samples, primary).with_moments(moments))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityQuantities<T> {
    /// `ã_ii = min_{0≤t≤1} ∫₀ᵗ a_ii`.
    pub a_tilde: Vec<T>,
    /// `ā_ij = min_{0≤s≤1} ∫ₛ¹ a_ij`.
    pub a_bar: Vec<Vec<T>>,
    pub delta: T,
    /// Chain `j₁ = i, j₂, …, j_N` used for each `i`.
    pub chains: Vec<Vec<usize>>,
    pub beta_i: Vec<T>,
    pub beta_tilde_i: Vec<T>,
    /// `β̲ = minᵢ βᵢ`.
    pub beta_lower: T,
    /// `β̄ = exp ∫₀¹ Σₗ maxⱼ a_lj`.
    pub beta_upper: T,
    pub beta_tilde_lower: T,
    /// Smallest value of each entry over the evaluation nodes in `[0, 1]`.
    pub entry_min: Vec<Vec<T>>,
    /// Cells of the final quadrature grid.
    pub grid_cells: usize,
}

/// Running-integral extrema of every entry on a grid of `cells` cells.
struct GridPass {
    a_tilde: Vec<Vec<f64>>, // min_t ∫₀ᵗ a_ij
    a_bar: Vec<Vec<f64>>,   // min_s ∫ₛ¹ a_ij
    entry_min: Vec<Vec<f64>>,
    row_max_integral: f64,
}

fn grid_pass<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    ps: &[(f64, f64, DriverState, f64)],
    cells: usize,
) -> GridPass {
    let n = model.dim();
    let mut cum = vec![vec![0.0; n]; n];
    let mut run_min = vec![vec![0.0f64; n]; n];
    let mut run_max = vec![vec![0.0f64; n]; n];
    let mut entry_min = vec![vec![f64::INFINITY; n]; n];
    let mut row_max_integral = 0.0;
    for p in ps {
        let (a, b) = (p.0, p.1);
        let m = ((cells as f64 * (b - a)).ceil() as usize).max(1);
        let h = (b - a) / m as f64;
        for end in [a, b] {
            let f = eval(model, driver, p, end);
            for i in 0..n {
                for j in 0..n {
                    entry_min[i][j] = entry_min[i][j].min(f[(i, j)]);
                }
            }
        }
        for c in 0..m {
            let lo = a + c as f64 * h;
            let mid = lo + 0.5 * h;
            let mut inc = vec![vec![0.0; n]; n];
            for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
                let f = eval(model, driver, p, mid + 0.5 * h * x);
                let mut rowsum = 0.0;
                for i in 0..n {
                    let mut rmax = f64::NEG_INFINITY;
                    for j in 0..n {
                        inc[i][j] += 0.5 * h * w * f[(i, j)];
                        entry_min[i][j] = entry_min[i][j].min(f[(i, j)]);
                        rmax = rmax.max(f[(i, j)]);
                    }
                    rowsum += rmax;
                }
                row_max_integral += 0.5 * h * w * rowsum;
            }
            for i in 0..n {
                for j in 0..n {
                    cum[i][j] += inc[i][j];
                    run_min[i][j] = run_min[i][j].min(cum[i][j]);
                    run_max[i][j] = run_max[i][j].max(cum[i][j]);
                }
            }
        }
    }
    // ∫ₛ¹ = F(1) − F(s), minimized where F(s) is largest
    let a_bar = (0..n).map(|i| (0..n).map(|j| cum[i][j] - run_max[i][j]).collect()).collect();
    GridPass { a_tilde: run_min, a_bar, entry_min, row_max_integral }
}

/// Greedy chain from `i`: repeatedly step to the unvisited index with the
/// largest minimal link entry. Returns the chain and its weakest link.
pub fn discover_chain(entry_min: &[Vec<f64>], i: usize) -> (Vec<usize>, f64) {
    let n = entry_min.len();
    let mut chain = vec![i];
    let mut visited = vec![false; n];
    visited[i] = true;
    let mut weakest = f64::INFINITY;
    let mut cur = i;
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !visited[j])
            .max_by(|&a, &b| entry_min[cur][a].partial_cmp(&entry_min[cur][b]).unwrap())
            .expect("unvisited index");
        weakest = weakest.min(entry_min[cur][next]);
        visited[next] = true;
        chain.push(next);
        cur = next;
    }
    (chain, weakest)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// Quantities entering the irreducibility conditions at `ω`.
///
/// `delta = None` takes δ as the weakest link over the chains; `chains =
/// None` discovers them greedily. Running-integral minima are computed by
/// cumulative 5-point Gauss–Legendre on a grid that is doubled until they
/// change by less than `1e-8`.
pub fn irreducibility_quantities<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    omega: &DriverState,
    delta: Option<f64>,
    chains: Option<Vec<Vec<usize>>>,
) -> Result<IrreducibilityQuantities<T>> {
    let n = model.dim();
    if let Some(d) = delta {
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {d}")));
        }
    }
    if let Some(cs) = &chains {
        if cs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cs.len() });
        }
        for (i, c) in cs.iter().enumerate() {
            let mut seen = vec![false; n];
            for &j in c {
                if j < n {
                    seen[j] = true;
                }
            }
            if c.len() != n || c.first() != Some(&i) || seen.iter().any(|&s| !s) {
                return Err(Error::InvalidParameter(format!("chain for index {} does not cover 1..N starting at it", i + 1)));
            }
        }
    }
    let ps = pieces(model, driver, omega, 1.0)?;
    let mut cells = 16;
    let mut pass = grid_pass(model, driver, &ps, cells);
    loop {
        let finer = grid_pass(model, driver, &ps, 2 * cells);
        let change = pass
            .a_tilde
            .iter()
            .flatten()
            .zip(finer.a_tilde.iter().flatten())
            .chain(pass.a_bar.iter().flatten().zip(finer.a_bar.iter().flatten()))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        cells *= 2;
        pass = finer;
        if change < 1e-8 || cells >= 1 << 16 {
            break;
        }
    }

    let chains: Vec<(Vec<usize>, f64)> = match chains {
        Some(cs) => cs
            .into_iter()
            .map(|c| {
                let weakest = c.windows(2).fold(f64::INFINITY, |m, w| m.min(pass.entry_min[w[0]][w[1]]));
                (c, weakest)
            })
            .collect(),
        None => (0..n).map(|i| discover_chain(&pass.entry_min, i)).collect(),
    };
    let delta = match delta {
        Some(d) => d,
        None => {
            let d = chains.iter().fold(f64::INFINITY, |m, c| m.min(c.1));
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!("no chain with a positive lower bound (best δ = {d})")));
            }
            d
        }
    };

    let a_tilde_ii: Vec<f64> = (0..n).map(|i| pass.a_tilde[i][i]).collect();
    let beta_i: Vec<f64> = chains
        .iter()
        .map(|(c, _)| {
            let mut exponent = a_tilde_ii[c[0]];
            let mut best = exponent.exp();
            for k in 1..n {
                exponent += pass.a_bar[c[k]][c[k]];
                best = best.min(exponent.exp() * delta.powi(k as i32) / factorial(k));
            }
            best
        })
        .collect();
    let beta_tilde_i: Vec<f64> = (0..n)
        .map(|i| {
            let off = (0..n)
                .filter(|&j| j != i)
                .map(|j| (a_tilde_ii[i] + pass.a_bar[i][j]).exp())
                .fold(f64::INFINITY, f64::min);
            a_tilde_ii[i].exp().min(off * delta)
        })
        .collect();
    let to_t = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(IrreducibilityQuantities {
        a_tilde: to_t(&a_tilde_ii),
        a_bar: pass.a_bar.iter().map(|r| to_t(r)).collect(),
        delta: T::of(delta),
        chains: chains.into_iter().map(|c| c.0).collect(),
        beta_lower: T::of(min(&beta_i)),
        beta_tilde_lower: T::of(min(&beta_tilde_i)),
        beta_i: to_t(&beta_i),
        beta_tilde_i: to_t(&beta_tilde_i),
        beta_upper: T::of(pass.row_max_integral.exp()),
        entry_min: pass.entry_min.iter().map(|r| to_t(r)).collect(),
        grid_cells: cells,
    })
}

fn ln_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// Irreducibility (chain) and off-diagonal positivity on samples `θ_k ω₀`.
/// Chain links and off-diagonal bounds are checked on the quadrature grid
/// only; an almost-everywhere bound cannot be certified numerically.
pub fn check_o3<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    seed: u64,
    n_samples: usize,
) -> Result<Vec<AssumptionReport>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let n = model.dim();
    let omega0 = driver.sample_initial(seed);
    let mut chain_fail = Vec::new();
    let mut offdiag_fail = Vec::new();
    let (mut l_ratio, mut l_ratio_t, mut lm, mut lm_t) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut cells = Vec::new();
    for k in 0..n_samples {
        let w = driver.advance(&omega0, k as f64)?;
        let q = match irreducibility_quantities::<T, M>(model, driver, &w, None, None) {
            Ok(q) => q,
            Err(e) => {
                if chain_fail.len() < MAX_WITNESSES {
                    chain_fail.push(Witness::Note { message: format!("sample {k}: {e}") });
                }
                continue;
            }
        };
        cells.push(q.grid_cells as f64);
        let off_min = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, q.entry_min[i][j].as_f64()))
            .fold((0, 0, f64::INFINITY), |m, x| if x.2 < m.2 { x } else { m });
        if !(off_min.2 > 0.0) && offdiag_fail.len() < MAX_WITNESSES {
            offdiag_fail.push(Witness::FieldEntry { sample: k, time: f64::NAN, row: off_min.0, col: off_min.1, value: off_min.2 });
        }
        let up = q.beta_upper.as_f64();
        let lo = q.beta_lower.as_f64();
        let lo_t = q.beta_tilde_lower.as_f64();
        l_ratio.push((up / lo).ln());
        l_ratio_t.push((up / lo_t).ln());
        lm.push(if lo < 1.0 { -lo.ln() } else { 0.0 });
        lm_t.push(if lo_t < 1.0 { -lo_t.ln() } else { 0.0 });
    }
    let b = |s: &[f64]| batch_means(s, s.len().clamp(1, 20)).0;
    // resolution of the grid the pointwise bounds were checked on
    let grid = || if cells.is_empty() { Vec::new() } else { vec![Moment { name: "grid_cells".into(), estimate: b(&cells) }] };
    let mut out = Vec::new();
    let o3i = if chain_fail.is_empty() {
        AssumptionReport::holds(Condition::O3i, n_samples)
    } else {
        AssumptionReport::fails(Condition::O3i, n_samples, chain_fail)
    }
    .with_moments(grid());
    let o3_ok = !o3i.failed();
    out.push(o3i);
    if o3_ok {
        let pl: Vec<f64> = l_ratio.iter().map(|&x| ln_plus(x)).collect();
        out.push(AssumptionReport::empirical(Condition::O3ii, n_samples, b(&pl)).with_moments(vec![
            Moment { name: "ln(beta_upper/beta_lower)".into(), estimate: b(&l_ratio) },
            Moment { name: "ln- beta_lower".into(), estimate: b(&lm) },
        ]));
    }
    let o3p = if offdiag_fail.is_empty() {
        AssumptionReport::holds(Condition::O3Primei, n_samples)
    } else {
        AssumptionReport::fails(Condition::O3Primei, n_samples, offdiag_fail)
    }
    .with_moments(grid());
    let o3p_ok = !o3p.failed();
    out.push(o3p);
    if o3p_ok && o3_ok {
        let pl: Vec<f64> = l_ratio_t.iter().map(|&x| ln_plus(x)).collect();
        out.push(AssumptionReport::empirical(Condition::O3Primeii, n_samples, b(&pl)).with_moments(vec![
            Moment { name: "ln(beta_upper/beta_tilde_lower)".into(), estimate: b(&l_ratio_t) },
            Moment { name: "ln- beta_tilde_lower".into(), estimate: b(&lm_t) },
        ]));
    }
    Ok(out)
}

/// `exp ∫₀ᵗ Σᵢ maxⱼ aᵢⱼ(θ_τ ω) dτ`, which bounds `‖U_ω(t)u‖₁ / ‖u‖₁` for
/// `u ≥ 0` under cooperativity.
pub fn l1_growth_bound<T: Real, M: OdeModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    omega: &DriverState,
    t: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time {t} must be nonnegative")));
    }
    let qtol = quad::attainable(1e-13, T::epsilon().as_f64());
    let mut total = 0.0;
    for p in pieces(model, driver, omega, t)? {
        let f = |tau: f64| {
            let a = eval(model, driver, &p, tau);
            (0..a.rows()).map(|i| a.row(i).iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))).sum::<f64>()
        };
        total += quad::integrate(f, p.0, p.1, qtol * (p.1 - p.0), qtol);
    }
    Ok(total.exp())
}

/// `κ = ⟨A w, w⟩` for a unit vector `w`.
pub fn kappa_functional<T: Real>(a: &Mat<T>, w: &[T]) -> Result<T> {
    let norm = linalg::norm2(w).as_f64();
    let tol = 1e-10f64.max(10.0 * T::epsilon().as_f64());
    if (norm - 1.0).abs() > tol {
        return Err(Error::InvalidParameter(format!("w must be a unit vector, |w| = {norm}")));
    }
    Ok(linalg::dot(&a.mul_vec(w)?, w))
}

/// Checks type-K monotonicity of `inner` on samples and returns the
/// conjugated cooperative model.
pub fn typek_to_cooperative<T: Real, M: OdeModel<T>>(
    inner: M,
    driver: &DriverSystem,
    k: usize,
    l: usize,
    seed: u64,
    n_samples: usize,
) -> Result<TypeKConjugate<M>> {
    let n = inner.dim();
    if k == 0 || l == 0 || k + l != n {
        return Err(Error::InvalidParameter(format!("block sizes k = {k}, l = {l} must be positive with k + l = {n}")));
    }
    let omega0 = driver.sample_initial(seed);
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    for s in 0..n_samples {
        let w = driver.advance(&omega0, s as f64)?;
        for &t in &grid {
            let b = super::field_at(&inner, driver, &w, t)?.to_f64();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let same = (i < k) == (j < k);
                    let v = b[(i, j)];
                    if (same && v < 0.0) || (!same && v > 0.0) {
                        return Err(Error::SignViolation { row: i, col: j, value: v });
                    }
                }
            }
        }
    }
    Ok(TypeKConjugate { inner, k, l })
}
