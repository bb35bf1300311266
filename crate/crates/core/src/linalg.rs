//! Small dense linear algebra: row-major matrices, vector helpers, thin QR
//! and one-sided Jacobi singular values. Dimensions here are a few hundred
//! at most, so nothing is blocked or vectorised.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Mat { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Mat { rows, cols, data })
    }

    /// Builds a matrix from `f64` rows, converting every entry to `T`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            data.extend(row.iter().map(|&x| T::of(x)));
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn from_columns(cols: &[Vec<T>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            if col.len() != r {
                return Err(Error::DimensionMismatch { expected: r, got: col.len() });
            }
            m.set_column(j, col);
        }
        Ok(m)
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[T]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn to_rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.as_f64()).collect()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Mat<T>) -> Result<Mat<T>> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: rhs.rows });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] = out.data[i * rhs.cols + j] + a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x = *x * s);
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    pub fn add(&self, rhs: &Mat<T>) -> Result<Mat<T>> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch { expected: self.data.len(), got: rhs.data.len() });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, rhs: &Mat<T>) -> Result<Mat<T>> {
        self.add(&rhs.scaled(-T::one()))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Converts the entries to another scalar type.
    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| U::of(x.as_f64())).collect() }
    }

    pub fn to_f64(&self) -> Mat<f64> {
        self.cast()
    }

    /// Spectral norm (largest singular value).
    pub fn norm2(&self) -> T {
        singular_values(self).first().copied().unwrap_or_else(T::zero)
    }

    /// Reciprocal 2-norm condition number, `σ_min / σ_max`; zero for a zero matrix.
    pub fn rcond(&self) -> T {
        let sv = singular_values(self);
        match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if hi > T::zero() => lo / hi,
            _ => T::zero(),
        }
    }

    pub fn max_abs_diff(&self, other: &Mat<T>) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn norm2<T: Real>(v: &[T]) -> T {
    // scaled to avoid overflow in the squares
    let m = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if m == T::zero() || !m.is_finite() {
        return m;
    }
    m * v.iter().map(|&x| (x / m) * (x / m)).sum::<T>().sqrt()
}

/// Normalises `v` in place to unit ℓ₂ norm and returns the old norm.
pub fn normalize<T: Real>(v: &mut [T]) -> Result<T> {
    let n = norm2(v);
    if n == T::zero() {
        return Err(Error::ZeroVector);
    }
    v.iter_mut().for_each(|x| *x = *x / n);
    Ok(n)
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant<T: Real>(a: &Mat<T>) -> T {
    let n = a.rows();
    let mut m = a.clone();
    let mut det = T::one();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[(i, c)].abs().partial_cmp(&m[(j, c)].abs()).unwrap()).unwrap();
        if m[(p, c)] == T::zero() {
            return T::zero();
        }
        if p != c {
            for j in 0..n {
                let tmp = m[(p, j)];
                m[(p, j)] = m[(c, j)];
                m[(c, j)] = tmp;
            }
            det = -det;
        }
        let piv = m[(c, c)];
        det = det * piv;
        for i in c + 1..n {
            let f = m[(i, c)] / piv;
            for j in c..n {
                let v = m[(c, j)];
                m[(i, j)] = m[(i, j)] - f * v;
            }
        }
    }
    det
}

/// Orthonormal basis (as the columns of an `n × (n−1)` matrix) of `v^⊥`.
pub fn orthogonal_complement<T: Real>(v: &[T]) -> Result<Mat<T>> {
    let n = v.len();
    let mut u = v.to_vec();
    normalize(&mut u)?;
    // drop the unit vector most aligned with v so the remaining set spans ℝⁿ
    let drop = (0..n).max_by(|&i, &j| u[i].abs().partial_cmp(&u[j].abs()).unwrap()).unwrap();
    let mut m = Mat::zeros(n, n);
    m.set_column(0, &u);
    let mut c = 1;
    for i in (0..n).filter(|&i| i != drop) {
        m[(i, c)] = T::one();
        c += 1;
    }
    let (q, _) = qr(&m);
    let mut out = Mat::zeros(n, n - 1);
    for j in 1..n {
        out.set_column(j - 1, &q.column(j));
    }
    Ok(out)
}

/// Thin QR of an `n × k` matrix (`k ≤ n`) by Householder reflections.
///
/// Returns `(Q, R)` with orthonormal columns in `Q` and `R` upper triangular
/// with a nonnegative diagonal.
pub fn qr<T: Real>(a: &Mat<T>) -> (Mat<T>, Mat<T>) {
    let n = a.rows();
    let k = a.cols();
    let mut r = a.clone();
    let mut vs: Vec<Vec<T>> = Vec::with_capacity(k);
    for j in 0..k.min(n) {
        let x: Vec<T> = (j..n).map(|i| r[(i, j)]).collect();
        let alpha = norm2(&x);
        let mut v = x.clone();
        if alpha > T::zero() {
            let s = if x[0] >= T::zero() { T::one() } else { -T::one() };
            v[0] = v[0] + s * alpha;
        }
        let vnorm = norm2(&v);
        if vnorm > T::zero() {
            v.iter_mut().for_each(|e| *e = *e / vnorm);
            for c in j..k {
                let p = (j..n).map(|i| v[i - j] * r[(i, c)]).sum::<T>();
                let two_p = p + p;
                for i in j..n {
                    r[(i, c)] = r[(i, c)] - two_p * v[i - j];
                }
            }
        }
        vs.push(v);
    }
    // accumulate thin Q by applying the reflections to the first k unit vectors
    let mut q = Mat::zeros(n, k);
    for c in 0..k {
        q[(c, c)] = T::one();
    }
    for (j, v) in vs.iter().enumerate().rev() {
        for c in 0..k {
            let p = (j..n).map(|i| v[i - j] * q[(i, c)]).sum::<T>();
            let two_p = p + p;
            for i in j..n {
                q[(i, c)] = q[(i, c)] - two_p * v[i - j];
            }
        }
    }
    let mut rr = Mat::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            rr[(i, j)] = r[(i, j)];
        }
    }
    for i in 0..k {
        if rr[(i, i)] < T::zero() {
            for j in i..k {
                rr[(i, j)] = -rr[(i, j)];
            }
            for row in 0..n {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    (q, rr)
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values<T: Real>(a: &Mat<T>) -> Vec<T> {
    let work = if a.rows() >= a.cols() { a.clone() } else { a.transpose() };
    let m = work.rows();
    let n = work.cols();
    let scale = work.max_abs();
    if scale == T::zero() || n == 0 {
        return vec![T::zero(); n];
    }
    let mut u = work.scaled(T::one() / scale);
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    alpha = alpha + up * up;
                    beta = beta + uq * uq;
                    gamma = gamma + up * uq;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = (0..n).map(|j| norm2(&u.column(j)) * scale).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}
