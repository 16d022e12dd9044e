//! Dense square real matrices and the handful of kernels the oracles need.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude are treated as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

/// A dense `n × n` matrix of `f64`, stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries. Fails unless `data.len() == n²`
    /// and every entry is finite.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, actual: data.len() });
        }
        if let Some(&bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), n, "from_rows needs a square literal");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise ℓ₁ norm, Σ|aᵢⱼ|.
    pub fn l1_entrywise(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `self + s·I`
    pub fn add_identity(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out[(i, i)] += s;
        }
        out
    }

    /// `a·self + b·other`
    pub fn axpby(&self, a: f64, other: &Matrix, b: f64) -> Self {
        assert_eq!(self.n, other.n);
        Self { n: self.n, data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect() }
    }

    /// Frobenius distance `‖self − other‖_F`.
    pub fn distance(&self, other: &Matrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Matrix::identity(n).data;
        for col in 0..n {
            let (piv_row, piv) = (col..n)
                .map(|r| (r, a[r * n + col]))
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .expect("non-empty pivot column");
            if piv.abs() < PIVOT_THRESHOLD || !piv.is_finite() {
                return Err(Error::Singular { pivot: piv });
            }
            if piv_row != col {
                for j in 0..n {
                    a.swap(col * n + j, piv_row * n + j);
                    inv.swap(col * n + j, piv_row * n + j);
                }
            }
            let r = 1.0 / piv;
            for j in 0..n {
                a[col * n + j] *= r;
                inv[col * n + j] *= r;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let f = a[row * n + col];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[row * n + j] -= f * a[col * n + j];
                    inv[row * n + j] -= f * inv[col * n + j];
                }
            }
        }
        Ok(Matrix { n, data: inv })
    }

    /// Determinant via LU with partial pivoting. Exact zero pivots yield 0.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let piv_row = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .expect("non-empty pivot column");
            let piv = a[piv_row * n + col];
            if piv == 0.0 {
                return 0.0;
            }
            if piv_row != col {
                for j in 0..n {
                    a.swap(col * n + j, piv_row * n + j);
                }
                det = -det;
            }
            det *= piv;
            for row in col + 1..n {
                let f = a[row * n + col] / piv;
                for j in col..n {
                    a[row * n + j] -= f * a[col * n + j];
                }
            }
        }
        det
    }
}

/// Dense product `a·b`.
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { expected: a.n, actual: b.n });
    }
    let n = a.n;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for l in 0..n {
            let ail = a.data[i * n + l];
            if ail == 0.0 {
                continue;
            }
            let brow = &b.data[l * n..(l + 1) * n];
            for (o, &blj) in row.iter_mut().zip(brow) {
                *o += ail * blj;
            }
        }
    }
    Ok(Matrix { n, data: out })
}

/// Inverse of `a`, failing when a pivot drops below [`PIVOT_THRESHOLD`].
pub fn mat_inverse(a: &Matrix) -> Result<Matrix> {
    a.inverse()
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        mat_mul(self, rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.axpby(1.0, rhs, 1.0)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.axpby(1.0, rhs, -1.0)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}×{})", self.n, self.n)?;
        for i in 0..self.n {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_vec(n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(&Matrix::identity(2) * &a, a);
    }

    #[test]
    fn diagonal_product() {
        let p = &Matrix::from_diag(&[2.0, 3.0]) * &Matrix::from_diag(&[5.0, 7.0]);
        assert_eq!(p, Matrix::from_diag(&[10.0, 21.0]));
    }

    #[test]
    fn product_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, b) = (random(3, &mut rng), random(3, &mut rng));
        let c = mat_mul(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += a[(i, l)] * b[(l, j)];
                }
                assert!((c[(i, j)] - s).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mismatch_is_an_error() {
        assert!(matches!(mat_mul(&Matrix::zeros(2), &Matrix::zeros(3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn inverse_cases() {
        assert_eq!(Matrix::identity(3).inverse().unwrap(), Matrix::identity(3));
        assert_eq!(Matrix::from_diag(&[2.0, 4.0]).inverse().unwrap(), Matrix::from_diag(&[0.5, 0.25]));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(4, &mut rng).add_identity(3.0);
        let r = &(&a * &a.inverse().unwrap()) - &Matrix::identity(4);
        assert!(r.frobenius_norm() <= 1e-8 * 4.0);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(a.inverse(), Err(Error::Singular { .. })));
    }

    #[test]
    fn determinant() {
        let a = Matrix::from_rows(&[[0.0, 2.0], [3.0, 1.0]]);
        assert!((a.det() + 6.0).abs() < 1e-15);
        assert_eq!(Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).det(), 0.0);
    }

    #[test]
    fn from_vec_rejects_nan() {
        assert!(Matrix::from_vec(1, vec![f64::NAN]).is_err());
        assert!(Matrix::from_vec(2, vec![1.0; 3]).is_err());
    }
}
