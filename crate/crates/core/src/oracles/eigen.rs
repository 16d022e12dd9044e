//! Eigenvalues of small real matrices: Householder reduction to upper
//! Hessenberg form followed by the Francis double-shift QR iteration.

#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest dimension accepted by [`eigenvalues`].
pub const MAX_EIGEN_DIM: usize = 16;

const MAX_QR_ITERATIONS: usize = 60;

/// Eigenvalues plus the two distances used to decide whether a matrix lies in
/// the domain of the sign and logarithm functions.
#[derive(Clone, Debug)]
pub struct SpectrumInfo {
    pub eigenvalues: Vec<Complex64>,
    /// `min |Re λ|`: distance of the spectrum from the imaginary axis.
    pub min_real_abs: f64,
    /// Distance of the spectrum from the closed negative real axis `(-∞, 0]`.
    pub min_negreal_dist: f64,
}

impl SpectrumInfo {
    fn from_eigenvalues(eigenvalues: Vec<Complex64>) -> Self {
        let min_real_abs = eigenvalues.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        let min_negreal_dist =
            eigenvalues.iter().map(|l| if l.re <= 0.0 { l.im.abs() } else { l.norm() }).fold(f64::INFINITY, f64::min);
        Self { eigenvalues, min_real_abs, min_negreal_dist }
    }
}

/// All `n` eigenvalues of `a`, complex pairs adjacent.
pub fn eigenvalues(a: &Matrix) -> Result<SpectrumInfo> {
    let n = a.n();
    if n > MAX_EIGEN_DIM {
        return Err(Error::InvalidArgument(format!("eigenvalues supports n ≤ {MAX_EIGEN_DIM}, got {n}")));
    }
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    hessenberg(&mut h);
    let eig = hqr(&mut h)?;
    Ok(SpectrumInfo::from_eigenvalues(eig))
}

/// In-place Householder reduction to upper Hessenberg form (similarity).
fn hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for m in 1..n - 1 {
        let scale: f64 = (m..n).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut sigma = 0.0;
        for i in (m..n).rev() {
            v[i] = h[i][m - 1] / scale;
            sigma += v[i] * v[i];
        }
        let g = if v[m] > 0.0 { -sigma.sqrt() } else { sigma.sqrt() };
        let beta = sigma - v[m] * g;
        v[m] -= g;

        // H ← (I − v vᵀ/β) H
        for j in m - 1..n {
            let f: f64 = (m..n).map(|i| v[i] * h[i][j]).sum::<f64>() / beta;
            for i in m..n {
                h[i][j] -= f * v[i];
            }
        }
        // H ← H (I − v vᵀ/β)
        for row in h.iter_mut() {
            let f: f64 = (m..n).map(|j| v[j] * row[j]).sum::<f64>() / beta;
            for j in m..n {
                row[j] -= f * v[j];
            }
        }
        h[m][m - 1] = scale * g;
        for row in h.iter_mut().skip(m + 1) {
            row[m - 1] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix; destroys `h`.
fn hqr(h: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = h.len();
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    let anorm: f64 =
        (0..n).flat_map(|i| (i.saturating_sub(1)..n).map(move |j| (i, j))).map(|(i, j)| h[i][j].abs()).sum();

    let mut hi = n as isize - 1;
    let mut shift = 0.0;
    let mut its = 0;
    while hi >= 0 {
        let nn = hi as usize;
        // Find the lowest row l with a negligible subdiagonal entry.
        let mut l = nn;
        while l >= 1 {
            let mut s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = anorm;
            }
            if h[l][l - 1].abs() + s == s {
                h[l][l - 1] = 0.0;
                break;
            }
            l -= 1;
        }

        let x = h[nn][nn];
        if l == nn {
            eig[nn] = Complex64::new(x + shift, 0.0);
            hi -= 1;
            its = 0;
            continue;
        }
        let y = h[nn - 1][nn - 1];
        let w = h[nn][nn - 1] * h[nn - 1][nn];
        if l + 1 == nn {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let z = q.abs().sqrt();
            let x = x + shift;
            if q >= 0.0 {
                let z = p + sign(z, p);
                let big = x + z;
                let small = if z != 0.0 { x - w / z } else { big };
                eig[nn - 1] = Complex64::new(big, 0.0);
                eig[nn] = Complex64::new(small, 0.0);
            } else {
                eig[nn - 1] = Complex64::new(x + p, z);
                eig[nn] = Complex64::new(x + p, -z);
            }
            hi -= 2;
            its = 0;
            continue;
        }

        if its == MAX_QR_ITERATIONS {
            return Err(Error::NonConvergence { what: "Hessenberg QR", iterations: its });
        }
        let (mut x, mut y, mut w) = (x, y, w);
        if its == 10 || its == 20 || its == 40 {
            // Exceptional shift.
            shift += x;
            for (i, row) in h.iter_mut().enumerate().take(nn + 1) {
                row[i] -= x;
            }
            let s = h[nn][nn - 1].abs() + h[nn - 1][nn - 2].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;

        // Look for two consecutive small subdiagonal elements.
        let (mut p, mut q, mut r);
        let mut m = nn - 2;
        loop {
            let z = h[m][m];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / h[m + 1][m] + h[m][m + 1];
            q = h[m + 1][m + 1] - z - rr - ss;
            r = h[m + 2][m + 1];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = h[m][m - 1].abs() * (q.abs() + r.abs());
            let v = p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs());
            if u + v == v {
                break;
            }
            m -= 1;
        }
        for i in m + 2..=nn {
            h[i][i - 2] = 0.0;
            if i != m + 2 {
                h[i][i - 3] = 0.0;
            }
        }

        // Double-shift QR sweep on rows l..=nn, columns m..=nn.
        let mut k = m;
        while k < nn {
            let mut xk = 0.0;
            if k != m {
                p = h[k][k - 1];
                q = h[k + 1][k - 1];
                r = if k + 1 != nn { h[k + 2][k - 1] } else { 0.0 };
                xk = p.abs() + q.abs() + r.abs();
                if xk != 0.0 {
                    p /= xk;
                    q /= xk;
                    r /= xk;
                }
            }
            let s = sign((p * p + q * q + r * r).sqrt(), p);
            if s != 0.0 {
                if k == m {
                    if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                } else {
                    h[k][k - 1] = -s * xk;
                }
                p += s;
                let xx = p / s;
                let yy = q / s;
                let zz = r / s;
                q /= p;
                r /= p;
                for j in k..=nn {
                    let mut pp = h[k][j] + q * h[k + 1][j];
                    if k + 1 != nn {
                        pp += r * h[k + 2][j];
                        h[k + 2][j] -= pp * zz;
                    }
                    h[k + 1][j] -= pp * yy;
                    h[k][j] -= pp * xx;
                }
                let mmin = if nn < k + 3 { nn } else { k + 3 };
                for row in h.iter_mut().take(mmin + 1).skip(l) {
                    let mut pp = xx * row[k] + yy * row[k + 1];
                    if k + 1 != nn {
                        pp += zz * row[k + 2];
                        row[k + 2] -= pp * r;
                    }
                    row[k + 1] -= pp * q;
                    row[k] -= pp;
                }
            }
            k += 1;
        }
    }
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted_re(info: &SpectrumInfo) -> Vec<f64> {
        let mut v: Vec<f64> = info.eigenvalues.iter().map(|l| l.re).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// det(A − λI) evaluated by complex Gaussian elimination, independent of
    /// the QR path.
    fn char_poly(a: &Matrix, lambda: Complex64) -> Complex64 {
        let n = a.n();
        let mut m: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n).map(|j| Complex64::new(a[(i, j)], 0.0) - if i == j { lambda } else { 0.0.into() }).collect()
            })
            .collect();
        let mut det = Complex64::new(1.0, 0.0);
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| m[x][c].norm().total_cmp(&m[y][c].norm())).unwrap();
            if p != c {
                m.swap(p, c);
                det = -det;
            }
            let piv = m[c][c];
            if piv.norm() == 0.0 {
                return 0.0.into();
            }
            det *= piv;
            for r in c + 1..n {
                let f = m[r][c] / piv;
                for j in c..n {
                    let t = m[c][j];
                    m[r][j] -= f * t;
                }
            }
        }
        det
    }

    #[test]
    fn diagonal_spectrum() {
        let info = eigenvalues(&Matrix::from_diag(&[1.0, -2.0, 3.0])).unwrap();
        assert_eq!(sorted_re(&info), vec![-2.0, 1.0, 3.0]);
        assert!(info.eigenvalues.iter().all(|l| l.im == 0.0));
        assert_eq!(info.min_real_abs, 1.0);
        assert_eq!(info.min_negreal_dist, 0.0);
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let info = eigenvalues(&Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])).unwrap();
        let mut ims: Vec<f64> = info.eigenvalues.iter().map(|l| l.im).collect();
        ims.sort_by(f64::total_cmp);
        assert_eq!(ims, vec![-1.0, 1.0]);
        assert_eq!(info.min_real_abs, 0.0);
        assert_eq!(info.min_negreal_dist, 1.0);
    }

    #[test]
    fn characteristic_polynomial_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3, 4, 6, 10, 16] {
            for _ in 0..20 {
                let a = Matrix::from_vec(n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
                let info = eigenvalues(&a).unwrap();
                assert_eq!(info.eigenvalues.len(), n);
                let tr: f64 = info.eigenvalues.iter().map(|l| l.re).sum();
                assert!((tr - a.trace()).abs() < 1e-10 * n as f64);
                if n == 3 {
                    for &l in &info.eigenvalues {
                        assert!(char_poly(&a, l).norm() <= 1e-6, "residual at {l}");
                    }
                }
            }
        }
    }

    #[test]
    fn triangular_and_repeated() {
        let a = Matrix::from_rows(&[[2.0, 1.0, 0.0], [0.0, 2.0, 1.0], [0.0, 0.0, 2.0]]);
        let info = eigenvalues(&a).unwrap();
        for l in &info.eigenvalues {
            assert!((l - Complex64::new(2.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn too_large_rejected() {
        assert!(eigenvalues(&Matrix::identity(17)).is_err());
    }
}
