//! Fixed-size dense matrices. Only what the 2×2 / 4×4 boundary algebra needs.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::real::Real;

/// Row-major `R × C` matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat<T, const R: usize, const C: usize>(pub [[T; C]; R]);

pub type Mat2<T> = Mat<T, 2, 2>;
pub type Mat4<T> = Mat<T, 4, 4>;

impl<T: Real, const R: usize, const C: usize> Mat<T, R, C> {
    pub fn zeros() -> Self {
        Mat([[T::zero(); C]; R])
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros();
        for i in 0..R {
            for j in 0..C {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn transpose(&self) -> Mat<T, C, R> {
        Mat::from_fn(|i, j| self.0[j][i])
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn mul_vec(&self, v: &[T; C]) -> [T; R] {
        let mut out = [T::zero(); R];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row
                .iter()
                .zip(v)
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
        out
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> T {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }
}

impl<T: Real, const N: usize> Mat<T, N, N> {
    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { T::one() } else { T::zero() })
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..N {
            for j in 0..N {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst
    }

    /// Eigenvalues of a symmetric matrix (ascending) by cyclic Jacobi rotations.
    pub fn symmetric_eigenvalues(&self) -> [T; N] {
        let mut a = self.0;
        let eps = T::epsilon();
        for _sweep in 0..64 {
            let mut off = T::zero();
            let mut diag = T::zero();
            for i in 0..N {
                diag = diag + a[i][i] * a[i][i];
                for j in 0..N {
                    if i != j {
                        off = off + a[i][j] * a[i][j];
                    }
                }
            }
            if off <= eps * eps * diag.max(T::min_positive_value()) {
                break;
            }
            for p in 0..N {
                for q in (p + 1)..N {
                    if a[p][q] == T::zero() {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (T::two() * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..N {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..N {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev = [T::zero(); N];
        for i in 0..N {
            ev[i] = a[i][i];
        }
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }
}

impl<T: Real> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Mat([[a, b], [c, d]])
    }

    pub fn det(&self) -> T {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let [[a, b], [c, e]] = self.0;
        Some(Mat2::new(e / d, -b / d, -c / d, a / d))
    }

    /// Spectral norm via the closed-form eigenvalues of `MᵀM`.
    pub fn spectral_norm(&self) -> T {
        let mtm = self.transpose() * *self;
        let [l0, l1] = mtm.symmetric_eigenvalues_closed();
        l0.max(l1).max(T::zero()).sqrt()
    }

    /// Eigenvalues of a symmetric 2×2 matrix, ascending.
    pub fn symmetric_eigenvalues_closed(&self) -> [T; 2] {
        let [[a, b], [_, d]] = self.0;
        let mean = (a + d) * T::half();
        let rad = (((a - d) * T::half()).powi(2) + b * b).sqrt();
        [mean - rad, mean + rad]
    }

    /// Solves `self · x = rhs`.
    pub fn solve(&self, rhs: [T; 2]) -> Option<[T; 2]> {
        self.inverse().map(|inv| inv.mul_vec(&rhs))
    }
}

impl<T: Real, const R: usize, const K: usize, const C: usize> Mul<Mat<T, K, C>> for Mat<T, R, K> {
    type Output = Mat<T, R, C>;
    fn mul(self, rhs: Mat<T, K, C>) -> Mat<T, R, C> {
        Mat::from_fn(|i, j| (0..K).fold(T::zero(), |acc, k| acc + self.0[i][k] * rhs.0[k][j]))
    }
}

impl<T: Real, const R: usize, const C: usize> Add for Mat<T, R, C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl<T: Real, const R: usize, const C: usize> Sub for Mat<T, R, C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

impl<T, const R: usize, const C: usize> Index<(usize, usize)> for Mat<T, R, C> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T, const R: usize, const C: usize> IndexMut<(usize, usize)> for Mat<T, R, C> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

/// Euclidean norm of a small vector.
pub fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}
