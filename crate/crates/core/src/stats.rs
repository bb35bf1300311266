//! Sample means with Student-t confidence intervals, batch means and
//! least-squares slopes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided confidence level used everywhere.
pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Half width of the 95% interval. Infinite when it cannot be formed.
    pub half_width: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }
}

pub fn t_quantile(dof: usize) -> f64 {
    match StudentsT::new(0.0, 1.0, dof as f64) {
        Ok(t) => t.inverse_cdf(0.5 + CONFIDENCE / 2.0),
        Err(_) => f64::INFINITY,
    }
}

/// Mean of i.i.d. samples with a t-interval. Samples equal to each other give
/// a zero-width interval regardless of `n`.
pub fn mean_ci(samples: &[f64]) -> MeanEstimate {
    let n = samples.len();
    if n == 0 {
        return MeanEstimate { mean: f64::NAN, half_width: f64::INFINITY, n };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if samples.iter().all(|&x| x == samples[0]) {
        return MeanEstimate { mean, half_width: 0.0, n };
    }
    if n < 2 {
        return MeanEstimate { mean, half_width: f64::INFINITY, n };
    }
    let var = samples.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanEstimate { mean, half_width: t_quantile(n - 1) * (var / n as f64).sqrt(), n }
}

/// Splits a correlated series into `batches` contiguous blocks and forms the
/// interval from the block means. Trailing samples that do not fill a block
/// are dropped from the interval but kept in the overall mean.
pub fn batch_means(series: &[f64], batches: usize) -> (MeanEstimate, Vec<f64>) {
    let n = series.len();
    let b = batches.max(1).min(n.max(1));
    let size = n / b;
    if size == 0 {
        return (mean_ci(series), series.to_vec());
    }
    let means: Vec<f64> =
        (0..b).map(|k| series[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let ci = mean_ci(&means);
    let overall = series.iter().sum::<f64>() / n as f64;
    (MeanEstimate { mean: overall, half_width: ci.half_width, n }, means)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return f64::NAN;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    sxy / sxx
}
