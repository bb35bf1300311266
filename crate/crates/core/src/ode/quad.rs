//! Adaptive Gauss–Kronrod (7, 15) and fixed Gauss–Legendre quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One (7, 15) panel: `(kronrod, |kronrod − gauss|)`.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Bisections allowed per call. Past this the current estimate is returned.
const MAX_SPLITS: usize = 20_000;

/// `∫_a^b f` to `max(abs_tol, rel_tol·|I|)` by recursive bisection. Nodes
/// are interior, so `f` is never evaluated at `a` or `b`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, err) = gk15(&mut f, a, b);
    let mut budget = MAX_SPLITS;
    recurse(&mut f, a, b, whole, err, abs_tol, rel_tol, 0, &mut budget)
}

/// Relative tolerance that an integrand computed in a scalar with machine
/// epsilon `eps` can actually meet.
pub fn attainable(rel_tol: f64, eps: f64) -> f64 {
    rel_tol.max(100.0 * eps)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    err: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: u32,
    budget: &mut usize,
) -> f64 {
    if err <= abs_tol.max(rel_tol * whole.abs()) || depth >= 60 || *budget == 0 || (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return whole;
    }
    *budget -= 1;
    let m = 0.5 * (a + b);
    let (l, el) = gk15(f, a, m);
    let (r, er) = gk15(f, m, b);
    recurse(f, a, m, l, el, 0.5 * abs_tol, rel_tol, depth + 1, budget)
        + recurse(f, m, b, r, er, 0.5 * abs_tol, rel_tol, depth + 1, budget)
}

/// Five-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub const GL5_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
pub const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_singular_kernels() {
        let v = integrate(|x| x.powi(6), 0.0, 2.0, 1e-14, 1e-14);
        assert!((v - 128.0 / 7.0).abs() < 1e-12);
        // ∫_0^1 -1/(c+τ)² dτ = 1/(c+1) - 1/c
        let c = 1e-6;
        let v = integrate(|t| -1.0 / (c + t).powi(2), 0.0, 1.0, 1e-10, 1e-14);
        let exact = 1.0 / (c + 1.0) - 1.0 / c;
        assert!(((v - exact) / exact).abs() < 1e-12);
        let s: f64 = GL5_WEIGHTS.iter().sum();
        assert!((s - 2.0).abs() < 1e-15);
    }
}
