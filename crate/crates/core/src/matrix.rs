//! Discrete-time matrix cocycles `S⁽ⁿ⁾(ω) = S(θⁿ⁻¹ω)⋯S(ω)`, their duals,
//! entry statistics, the focusing certificate and the sample-based checks of
//! positivity, focusing and strong positivity. Leslie models live here too.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{DriverKind, DriverState, DriverSystem, TimeKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::report::{AssumptionReport, Condition, Moment, Witness};
use crate::stats::{batch_means, MeanEstimate};
use crate::Real;

/// Reciprocal condition number below which a sample counts as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;
/// Number of witnesses kept per failing report.
const MAX_WITNESSES: usize = 5;

/// A measurable family `ω ↦ S(ω)`. Emission must be a pure function of the
/// driver state.
pub trait MatrixModel<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn emit(&self, omega: &DriverState) -> Mat<T>;

    /// Rejects drivers the model cannot be evaluated on.
    fn validate_driver(&self, _driver: &DriverSystem) -> Result<()> {
        Ok(())
    }
}

impl<T: Real, M: MatrixModel<T> + ?Sized> MatrixModel<T> for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn emit(&self, omega: &DriverState) -> Mat<T> {
        (**self).emit(omega)
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        (**self).validate_driver(driver)
    }
}

impl<T: Real, M: MatrixModel<T> + ?Sized> MatrixModel<T> for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn emit(&self, omega: &DriverState) -> Mat<T> {
        (**self).emit(omega)
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        (**self).validate_driver(driver)
    }
}

fn check_square_finite<T: Real>(m: &Mat<T>, n: usize) -> Result<()> {
    if m.rows() != n || m.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if m.rows() != n { m.rows() } else { m.cols() } });
    }
    if !m.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantMatrix<T> {
    s: Mat<T>,
}

impl<T: Real> ConstantMatrix<T> {
    pub fn new(s: Mat<T>) -> Result<Self> {
        if s.rows() < 2 {
            return Err(Error::InvalidParameter("dimension must be at least 2".into()));
        }
        check_square_finite(&s, s.rows())?;
        Ok(ConstantMatrix { s })
    }
}

impl<T: Real> MatrixModel<T> for ConstantMatrix<T> {
    fn dim(&self) -> usize {
        self.s.rows()
    }
    fn emit(&self, _omega: &DriverState) -> Mat<T> {
        self.s.clone()
    }
}

/// Independent choice among a finite list with fixed weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IidList<T> {
    mats: Vec<Mat<T>>,
    cumulative: Vec<f64>,
}

impl<T: Real> IidList<T> {
    pub fn new(mats: Vec<Mat<T>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let n = mats.first().map(|m| m.rows()).ok_or_else(|| Error::InvalidParameter("empty matrix list".into()))?;
        for m in &mats {
            check_square_finite(m, n)?;
        }
        let w = weights.unwrap_or_else(|| vec![1.0; mats.len()]);
        if w.len() != mats.len() {
            return Err(Error::DimensionMismatch { expected: mats.len(), got: w.len() });
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("weights must be nonnegative with a positive sum".into()));
        }
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let cumulative = w
            .iter()
            .map(|&x| {
                acc += x / total;
                acc
            })
            .collect();
        Ok(IidList { mats, cumulative })
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cumulative.iter().position(|&c| u < c).unwrap_or(self.mats.len() - 1)
    }
}

impl<T: Real> MatrixModel<T> for IidList<T> {
    fn dim(&self) -> usize {
        self.mats[0].rows()
    }
    fn emit(&self, omega: &DriverState) -> Mat<T> {
        self.mats[self.pick(&mut omega.rng())].clone()
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        match driver.kind {
            DriverKind::IidShift => Ok(()),
            _ => Err(Error::InvalidParameter("an iid list needs the iid shift driver".into())),
        }
    }
}

/// `S(ω) = mats[X₀(ω)]` for a Markov driver.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovList<T> {
    mats: Vec<Mat<T>>,
}

impl<T: Real> MarkovList<T> {
    pub fn new(mats: Vec<Mat<T>>) -> Result<Self> {
        let n = mats.first().map(|m| m.rows()).ok_or_else(|| Error::InvalidParameter("empty matrix list".into()))?;
        for m in &mats {
            check_square_finite(m, n)?;
        }
        Ok(MarkovList { mats })
    }
}

impl<T: Real> MatrixModel<T> for MarkovList<T> {
    fn dim(&self) -> usize {
        self.mats[0].rows()
    }
    fn emit(&self, omega: &DriverState) -> Mat<T> {
        self.mats[omega.chain_state().unwrap_or(0)].clone()
    }
    fn validate_driver(&self, driver: &DriverSystem) -> Result<()> {
        match &driver.kind {
            DriverKind::MarkovShift(mc) if mc.states() == self.mats.len() => Ok(()),
            DriverKind::MarkovShift(mc) => Err(Error::DimensionMismatch { expected: self.mats.len(), got: mc.states() }),
            _ => Err(Error::InvalidParameter("a markov list needs the markov shift driver".into())),
        }
    }
}

/// Scalar parameter law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ParamDist {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `exp(N(mu, sigma²))`.
    LogNormal { mu: f64, sigma: f64 },
}

impl ParamDist {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ParamDist::Constant { value } => value,
            ParamDist::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }
            ParamDist::LogNormal { mu, sigma } => match LogNormal::new(mu, sigma) {
                Ok(d) => d.sample(rng),
                Err(_) => f64::NAN,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ParamDist::Constant { value } => value.is_finite(),
            ParamDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            ParamDist::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("malformed distribution {self:?}")))
        }
    }

    /// Every draw is strictly positive.
    pub fn is_positive(&self) -> bool {
        match *self {
            ParamDist::Constant { value } => value > 0.0,
            ParamDist::Uniform { lo, .. } => lo > 0.0,
            ParamDist::LogNormal { .. } => true,
        }
    }
}

/// Every entry drawn independently from one law, fresh at each index.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomEntries {
    n: usize,
    dist: ParamDist,
}

impl RandomEntries {
    pub fn new(n: usize, dist: ParamDist) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("dimension must be at least 2".into()));
        }
        dist.validate()?;
        Ok(RandomEntries { n, dist })
    }
}

impl<T: Real> MatrixModel<T> for RandomEntries {
    fn dim(&self) -> usize {
        self.n
    }
    fn emit(&self, omega: &DriverState) -> Mat<T> {
        let mut rng = omega.rng();
        let data = (0..self.n * self.n).map(|_| T::of(self.dist.sample(&mut rng))).collect();
        Mat::from_vec(self.n, self.n, data).expect("sized buffer")
    }
}

/// Random Leslie matrix: fertilities `m₁..m_N` in the first row, survival
/// rates `b₁..b_{N−1}` on the subdiagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeslieModel {
    pub fertility: Vec<ParamDist>,
    pub survival: Vec<ParamDist>,
}

impl LeslieModel {
    pub fn new(fertility: Vec<ParamDist>, survival: Vec<ParamDist>) -> Result<Self> {
        let n = fertility.len();
        if n < 2 {
            return Err(Error::InvalidParameter("leslie model needs at least two age classes".into()));
        }
        if survival.len() != n - 1 {
            return Err(Error::DimensionMismatch { expected: n - 1, got: survival.len() });
        }
        for (name, list) in [("fertility", &fertility), ("survival", &survival)] {
            for (i, d) in list.iter().enumerate() {
                d.validate()?;
                if !d.is_positive() {
                    return Err(Error::InvalidParameter(format!(
                        "{name} parameter {} may be nonpositive: {d:?}",
                        i + 1
                    )));
                }
            }
        }
        Ok(LeslieModel { fertility, survival })
    }

    /// All parameters fixed.
    pub fn constant(m: &[f64], b: &[f64]) -> Result<Self> {
        Self::new(
            m.iter().map(|&value| ParamDist::Constant { value }).collect(),
            b.iter().map(|&value| ParamDist::Constant { value }).collect(),
        )
    }
}

impl<T: Real> MatrixModel<T> for LeslieModel {
    fn dim(&self) -> usize {
        self.fertility.len()
    }
    fn emit(&self, omega: &DriverState) -> Mat<T> {
        let n = self.fertility.len();
        let mut rng = omega.rng();
        let mut s = Mat::zeros(n, n);
        for (j, d) in self.fertility.iter().enumerate() {
            s[(0, j)] = T::of(d.sample(&mut rng));
        }
        for (j, d) in self.survival.iter().enumerate() {
            s[(j + 1, j)] = T::of(d.sample(&mut rng));
        }
        s
    }
}

/// Rescales `m` to unit spectral norm, returning the log of the factor.
fn normalize_spectral<T: Real>(m: &mut Mat<T>) -> f64 {
    let s = m.norm2();
    if s == T::zero() {
        return f64::NEG_INFINITY;
    }
    m.scale(T::one() / s);
    s.as_f64().ln()
}

/// `S⁽ⁿ⁾(ω) = exp(log_scale) · direction` with `‖direction‖₂ = 1`.
/// A product that vanishes exactly comes back as `(0, −∞)`.
pub fn cocycle_product<T: Real, M: MatrixModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    omega: &DriverState,
    n: u64,
) -> Result<(Mat<T>, f64)> {
    let dim = model.dim();
    let mut acc = Mat::identity(dim);
    let mut log_scale = 0.0;
    let mut w = *omega;
    for k in 0..n {
        if k > 0 {
            w = driver.advance(&w, 1.0)?;
        }
        acc = model.emit(&w).matmul(&acc)?;
        let s = acc.max_abs();
        if s == T::zero() {
            return Ok((Mat::zeros(dim, dim), f64::NEG_INFINITY));
        }
        acc.scale(T::one() / s);
        log_scale += s.as_f64().ln();
    }
    log_scale += normalize_spectral(&mut acc);
    Ok((acc, log_scale))
}

/// `S*(ω) = S(θ⁻¹ω)ᵀ`.
pub fn dual_step<T: Real, M: MatrixModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    omega: &DriverState,
) -> Result<Mat<T>> {
    if !driver.supports_negative_time() {
        return Err(Error::NoInverse("driver cannot run backwards".into()));
    }
    Ok(model.emit(&driver.advance(omega, -1.0)?).transpose())
}

/// Entry statistics of one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixStats<T> {
    /// `m_{c,i}`: minimum of column `i`.
    #[serde(rename = "m_c")]
    pub col_min: Vec<T>,
    #[serde(rename = "M_c")]
    pub col_max: Vec<T>,
    /// `m_{r,i}`: minimum of row `i`.
    #[serde(rename = "m_r")]
    pub row_min: Vec<T>,
    #[serde(rename = "M_r")]
    pub row_max: Vec<T>,
    /// Smallest row sum.
    #[serde(rename = "m_r_sum")]
    pub min_row_sum: T,
    /// Smallest column sum.
    #[serde(rename = "m_c_sum")]
    pub min_col_sum: T,
    #[serde(rename = "m")]
    pub min: T,
    #[serde(rename = "M")]
    pub max: T,
}

pub fn matrix_stats<T: Real>(s: &Mat<T>) -> MatrixStats<T> {
    let (r, c) = (s.rows(), s.cols());
    let inf = T::infinity();
    let mut st = MatrixStats {
        col_min: vec![inf; c],
        col_max: vec![-inf; c],
        row_min: vec![inf; r],
        row_max: vec![-inf; r],
        min_row_sum: inf,
        min_col_sum: inf,
        min: inf,
        max: -inf,
    };
    let mut col_sum = vec![T::zero(); c];
    for i in 0..r {
        let mut row_sum = T::zero();
        for j in 0..c {
            let x = s[(i, j)];
            st.col_min[j] = st.col_min[j].min(x);
            st.col_max[j] = st.col_max[j].max(x);
            st.row_min[i] = st.row_min[i].min(x);
            st.row_max[i] = st.row_max[i].max(x);
            st.min = st.min.min(x);
            st.max = st.max.max(x);
            row_sum = row_sum + x;
            col_sum[j] = col_sum[j] + x;
        }
        st.min_row_sum = st.min_row_sum.min(row_sum);
    }
    st.min_col_sum = col_sum.into_iter().fold(inf, |a, b| a.min(b));
    st
}

/// Constants of the focusing construction for a strictly positive matrix:
/// `β(u)·e ≤ S·u ≤ κ·β(u)·e` on the positive cone, and the row analogue
/// `β*(u)·e ≤ Sᵀ·u ≤ κ*·β*(u)·e` for the dual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusingCertificate<T> {
    pub kappa: T,
    pub kappa_star: T,
    /// `(1, …, 1)/√N`.
    pub e: Vec<T>,
    pub col_min: Vec<T>,
    pub row_min: Vec<T>,
}

impl<T: Real> FocusingCertificate<T> {
    /// `β(u) = √N Σ uᵢ m_{c,i}`.
    pub fn beta(&self, u: &[T]) -> T {
        T::of((self.e.len() as f64).sqrt()) * linalg::dot(u, &self.col_min)
    }

    /// `β*(u) = √N Σ uᵢ m_{r,i}`.
    pub fn beta_star(&self, u: &[T]) -> T {
        T::of((self.e.len() as f64).sqrt()) * linalg::dot(u, &self.row_min)
    }

    /// Componentwise check of the sandwich for `S·u`, with absolute slack
    /// `tol · κβ(u)`.
    pub fn sandwich_holds(&self, s: &Mat<T>, u: &[T], tol: T) -> Result<bool> {
        let su = s.mul_vec(u)?;
        let b = self.beta(u);
        let slack = tol * self.kappa * b;
        Ok(su.iter().zip(&self.e).all(|(&x, &e)| b * e <= x + slack && x <= self.kappa * b * e + slack))
    }
}

pub fn focusing_certificate<T: Real>(s: &Mat<T>) -> Result<FocusingCertificate<T>> {
    let n = s.rows();
    if !s.is_square() {
        return Err(Error::DimensionMismatch { expected: n, got: s.cols() });
    }
    for i in 0..n {
        for j in 0..n {
            if !(s[(i, j)] > T::zero()) {
                return Err(Error::SignViolation { row: i, col: j, value: s[(i, j)].as_f64() });
            }
        }
    }
    let st = matrix_stats(s);
    let nn = T::of(n as f64);
    let ratio = |hi: &[T], lo: &[T]| hi.iter().zip(lo).fold(T::zero(), |m, (&a, &b)| m.max(a / b));
    Ok(FocusingCertificate {
        kappa: nn * ratio(&st.col_max, &st.col_min),
        kappa_star: nn * ratio(&st.row_max, &st.row_min),
        e: vec![T::one() / nn.sqrt(); n],
        col_min: st.col_min,
        row_min: st.row_min,
    })
}

/// `ln⁺ x = max(ln x, 0)`.
fn ln_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// `ln⁻ x = max(−ln x, 0)`.
fn ln_minus(x: f64) -> f64 {
    if x < 1.0 {
        -x.ln()
    } else {
        0.0
    }
}

fn batches_for(n: usize) -> usize {
    n.clamp(1, 20)
}

fn moment(name: impl Into<String>, series: &[f64]) -> Moment {
    Moment { name: name.into(), estimate: batch_means(series, batches_for(series.len())).0 }
}

fn estimate(series: &[f64]) -> MeanEstimate {
    batch_means(series, batches_for(series.len())).0
}

/// Samples `S⁽ᵀ⁾(θ^{kT} ω₀)` for `k = 0..n_samples` along one orbit.
fn lagged_samples<T: Real, M: MatrixModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    seed: u64,
    n_samples: usize,
    lag: u64,
) -> Result<Vec<Mat<f64>>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    if lag == 0 {
        return Err(Error::InvalidParameter("lag must be at least 1".into()));
    }
    model.validate_driver(driver)?;
    let omega0 = driver.sample_initial(seed);
    (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let w = driver.advance(&omega0, (k as u64 * lag) as f64)?;
            if lag == 1 {
                return Ok(model.emit(&w).to_f64());
            }
            let (d, ls) = cocycle_product(model, driver, &w, lag)?;
            Ok(d.to_f64().scaled(ls.exp()))
        })
        .collect()
}

/// Positivity, injectivity and integrability of `ln⁺ M` on samples.
pub fn check_d1<T: Real, M: MatrixModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    seed: u64,
    n_samples: usize,
) -> Result<Vec<AssumptionReport>> {
    let samples = lagged_samples(model, driver, seed, n_samples, 1)?;
    let n = samples.len();

    let mut neg = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        for i in 0..s.rows() {
            for j in 0..s.cols() {
                if s[(i, j)] < 0.0 && neg.len() < MAX_WITNESSES {
                    neg.push(Witness::Entry { sample: k, row: i, col: j, value: s[(i, j)] });
                }
            }
        }
    }
    let d1i = if neg.is_empty() { AssumptionReport::holds(Condition::D1i, n) } else { AssumptionReport::fails(Condition::D1i, n, neg) };

    let mut sing = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        let rc = s.rcond();
        if !(rc > RCOND_THRESHOLD) && sing.len() < MAX_WITNESSES {
            sing.push(Witness::Singular { sample: k, rcond: rc, determinant: linalg::determinant(s) });
        }
    }
    let d1ii =
        if sing.is_empty() { AssumptionReport::holds(Condition::D1ii, n) } else { AssumptionReport::fails(Condition::D1ii, n, sing) };

    let d1iii = if d1i.failed() {
        AssumptionReport::fails(Condition::D1iii, n, vec![Witness::Note { message: "requires D1.i".into() }])
    } else {
        let series: Vec<f64> = samples.iter().map(|s| ln_plus(matrix_stats(s).max)).collect();
        AssumptionReport::empirical(Condition::D1iii, n, estimate(&series))
    };
    Ok(vec![d1i, d1ii, d1iii])
}

fn positivity_witnesses(samples: &[Mat<f64>]) -> Vec<Witness> {
    let mut out = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        for i in 0..s.rows() {
            for j in 0..s.cols() {
                if !(s[(i, j)] > 0.0) && out.len() < MAX_WITNESSES {
                    out.push(Witness::Entry { sample: k, row: i, col: j, value: s[(i, j)] });
                }
            }
        }
    }
    out
}

/// Focusing conditions on the time-`lag` map.
pub fn check_d2<T: Real, M: MatrixModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    seed: u64,
    n_samples: usize,
    lag: u64,
) -> Result<Vec<AssumptionReport>> {
    let samples = lagged_samples(model, driver, seed, n_samples, lag)?;
    let n = samples.len();
    let wit = positivity_witnesses(&samples);
    if !wit.is_empty() {
        return Ok([Condition::D2i, Condition::D2ii, Condition::D2iii]
            .into_iter()
            .map(|c| AssumptionReport::fails(c, n, wit.clone()))
            .collect());
    }
    let stats: Vec<MatrixStats<f64>> = samples.iter().map(matrix_stats).collect();
    let dim = samples[0].rows();
    let spread = |hi: f64, lo: f64| hi.ln() - lo.ln();
    let per_index = |f: &dyn Fn(&MatrixStats<f64>, usize) -> f64, tag: &str| -> (Vec<Moment>, Vec<f64>) {
        let mut moments = Vec::new();
        let mut worst = vec![f64::NEG_INFINITY; n];
        for i in 0..dim {
            let series: Vec<f64> = stats.iter().map(|st| f(st, i)).collect();
            for (w, &x) in worst.iter_mut().zip(&series) {
                *w = w.max(x);
            }
            moments.push(moment(format!("{tag}[{}]", i + 1), &series));
        }
        (moments, worst)
    };

    let (mc, worst_c) =
        per_index(&|st, i| ln_plus(spread(st.col_max[i], st.col_min[i])), "ln+(ln M_c - ln m_c)");
    let (mr, worst_r) =
        per_index(&|st, i| ln_plus(spread(st.row_max[i], st.row_min[i])), "ln+(ln M_r - ln m_r)");
    let (mc3, worst_c3) = per_index(&|st, i| spread(st.col_max[i], st.col_min[i]), "ln M_c - ln m_c");
    let (mr3, worst_r3) = per_index(&|st, i| spread(st.row_max[i], st.row_min[i]), "ln M_r - ln m_r");

    let global: Vec<f64> = stats.iter().map(|st| spread(st.max, st.min)).collect();
    let global_plus: Vec<f64> = global.iter().map(|&x| ln_plus(x)).collect();
    let sufficient = vec![moment("ln+(ln M - ln m)", &global_plus), moment("ln M - ln m", &global)];

    let mut d2i = mc;
    d2i.extend(sufficient.iter().cloned());
    let mut d2ii = mr;
    d2ii.extend(sufficient.iter().cloned());
    let mut d2iii = mc3;
    d2iii.extend(mr3);
    d2iii.extend(sufficient);
    let worst3: Vec<f64> = worst_c3.iter().zip(&worst_r3).map(|(a, b)| a.max(*b)).collect();
    Ok(vec![
        AssumptionReport::empirical(Condition::D2i, n, estimate(&worst_c)).with_moments(d2i),
        AssumptionReport::empirical(Condition::D2ii, n, estimate(&worst_r)).with_moments(d2ii),
        AssumptionReport::empirical(Condition::D2iii, n, estimate(&worst3)).with_moments(d2iii),
    ])
}

/// Strong positivity in one direction on the time-`lag` map. The witnesses
/// `ν = m_r` and `ν* = m_c` are reported as moments.
pub fn check_d3<T: Real, M: MatrixModel<T> + ?Sized>(
    model: &M,
    driver: &DriverSystem,
    seed: u64,
    n_samples: usize,
    lag: u64,
) -> Result<Vec<AssumptionReport>> {
    let samples = lagged_samples(model, driver, seed, n_samples, lag)?;
    let n = samples.len();
    let stats: Vec<MatrixStats<f64>> = samples.iter().map(matrix_stats).collect();
    let mins: Vec<f64> = stats.iter().map(|st| st.min).collect();
    let sufficient = if mins.iter().all(|&m| m > 0.0) {
        let s: Vec<f64> = mins.iter().map(|&m| ln_minus(m)).collect();
        vec![moment("ln- m", &s)]
    } else {
        Vec::new()
    };
    let one = |cond: Condition, name: &str, pick: &dyn Fn(&MatrixStats<f64>) -> f64| {
        let vals: Vec<f64> = stats.iter().map(pick).collect();
        let bad: Vec<Witness> = vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| !(v > 0.0))
            .take(MAX_WITNESSES)
            .map(|(k, &v)| Witness::NonPositive { sample: k, quantity: name.into(), value: v })
            .collect();
        if !bad.is_empty() {
            return AssumptionReport::fails(cond, n, bad);
        }
        let lm: Vec<f64> = vals.iter().map(|&v| ln_minus(v)).collect();
        let mut moments = vec![moment(name, &vals)];
        moments.extend(sufficient.iter().cloned());
        AssumptionReport::empirical(cond, n, estimate(&lm)).with_moments(moments)
    };
    Ok(vec![
        one(Condition::D3i, "m_r_sum", &|st| st.min_row_sum),
        one(Condition::D3ii, "m_c_sum", &|st| st.min_col_sum),
    ])
}

/// Checks that `S⁽ᴺ⁾(θ^{kN}ω₀)` is entrywise positive for every sample.
/// Returns the offending entries (empty when all positive).
pub fn leslie_n_step_positive(
    model: &LeslieModel,
    driver: &DriverSystem,
    seed: u64,
    n_samples: usize,
) -> Result<Vec<Witness>> {
    let n = MatrixModel::<f64>::dim(model) as u64;
    let samples = lagged_samples::<f64, _>(model, driver, seed, n_samples, n)?;
    Ok(positivity_witnesses(&samples))
}

/// A matrix family paired with its (discrete) driver.
pub struct MatrixCocycle<T, M> {
    pub model: M,
    pub driver: DriverSystem,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Real, M: MatrixModel<T>> MatrixCocycle<T, M> {
    pub fn new(model: M, driver: DriverSystem) -> Result<Self> {
        if driver.time != TimeKind::Discrete {
            return Err(Error::InvalidParameter("matrix cocycles need a discrete-time driver".into()));
        }
        model.validate_driver(&driver)?;
        Ok(MatrixCocycle { model, driver, _scalar: std::marker::PhantomData })
    }
}

/// Parses matrices from CSV text. The first line is the header `N` (or
/// `N=<n>`, `N,<n>`); when it carries no number the next line does. Then
/// follow `k·N` rows of `N` comma-separated entries, read as `k` matrices.
pub fn parse_matrices_csv(text: &str) -> Result<Vec<Mat<f64>>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::InvalidParameter("empty matrix file".into()))?;
    let rest = header.trim_start_matches(['N', 'n']).trim_start_matches(['=', ',', ':', ' ']).trim();
    let n_text = if rest.is_empty() {
        lines.next().ok_or_else(|| Error::InvalidParameter("missing dimension after header".into()))?.to_string()
    } else {
        rest.to_string()
    };
    let n: usize = n_text
        .trim_end_matches(',')
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad dimension `{n_text}`")))?;
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("row {}: {e}", ln + 1)))?;
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        rows.push(row);
    }
    if rows.is_empty() || rows.len() % n != 0 {
        return Err(Error::InvalidParameter(format!("{} rows is not a positive multiple of {n}", rows.len())));
    }
    rows.chunks(n).map(Mat::from_rows).collect()
}
