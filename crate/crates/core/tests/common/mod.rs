//! Test-side oracles, computed independently of the library's estimators.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rds_floquet::linalg::Mat;
use rds_floquet::Matrix;

pub fn mat(rows: &[&[f64]]) -> Matrix {
    Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|x| *x *= s / n);
    v
}

/// Perron root and positive unit eigenvector of a 2×2 positive matrix from
/// the characteristic polynomial `λ² − tr λ + det`.
pub fn perron_2x2(a: &Matrix) -> (f64, Vec<f64>) {
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let tr = p + s;
    let det = p * s - q * r;
    let lam = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    (lam, unit(vec![q, lam - p]))
}

/// Same for 3×3: Newton on the characteristic cubic from the row-sum
/// bound, eigenvector as the cross product of two rows of `A − λI`.
pub fn perron_3x3(a: &Matrix) -> (f64, Vec<f64>) {
    let g = |i: usize, j: usize| a[(i, j)];
    let tr = g(0, 0) + g(1, 1) + g(2, 2);
    let minors = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0) + g(0, 0) * g(2, 2) - g(0, 2) * g(2, 0) + g(1, 1) * g(2, 2)
        - g(1, 2) * g(2, 1);
    let det = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
        + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
    let p = |l: f64| l * l * l - tr * l * l + minors * l - det;
    let dp = |l: f64| 3.0 * l * l - 2.0 * tr * l + minors;
    let mut lam = (0..3).map(|i| (0..3).map(|j| g(i, j)).sum::<f64>()).fold(0.0, f64::max);
    for _ in 0..100 {
        let step = p(lam) / dp(lam);
        lam -= step;
        if step.abs() < 1e-16 * lam.abs() {
            break;
        }
    }
    let r0 = [g(0, 0) - lam, g(0, 1), g(0, 2)];
    let r1 = [g(1, 0), g(1, 1) - lam, g(1, 2)];
    let v = vec![r0[1] * r1[2] - r0[2] * r1[1], r0[2] * r1[0] - r0[0] * r1[2], r0[0] * r1[1] - r0[1] * r1[0]];
    (lam, unit(v))
}

pub fn golden() -> f64 {
    0.5 * (1.0 + 5f64.sqrt())
}

pub fn random_positive(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Matrix {
    Mat::from_vec(n, n, (0..n * n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// `k` random strictly positive `n × n` matrices for an i.i.d. list model.
pub fn random_list(seed: u64, n: usize, k: usize) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| random_positive(&mut rng, n, 0.1, 2.0)).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
