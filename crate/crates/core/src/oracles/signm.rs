//! Matrix sign function by the determinant-scaled Newton iteration.

use super::eigen::eigenvalues;
use super::DOMAIN_MARGIN;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;

/// `sign(A)` via `X ← ½(μX + (μX)⁻¹)`, `μ = |det X|^{-1/n}`.
pub fn mat_sign(a: &Matrix) -> Result<Matrix> {
    let spectrum = eigenvalues(a)?;
    if spectrum.min_real_abs <= DOMAIN_MARGIN {
        return Err(Error::Domain {
            function: "sign",
            reason: format!("eigenvalue within {:e} of the imaginary axis", spectrum.min_real_abs),
        });
    }
    let n = a.n() as f64;
    let mut x = a.clone();
    let mut scaling = true;
    for _ in 0..NEWTON_MAX_ITER {
        let mu = if scaling {
            let d = x.det().abs();
            if d > 0.0 && d.is_finite() {
                d.powf(-1.0 / n)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let scaled = x.scale(mu);
        let next = scaled.axpby(0.5, &scaled.inverse()?, 0.5);
        let change = next.distance(&x);
        let size = x.frobenius_norm();
        x = next;
        if change <= NEWTON_TOL * size {
            return Ok(x);
        }
        // Once close, scaling only disturbs quadratic convergence.
        if change <= 1e-2 * size {
            scaling = false;
        }
    }
    Err(Error::NonConvergence { what: "Newton sign iteration", iterations: NEWTON_MAX_ITER })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_sign() {
        assert_eq!(mat_sign(&Matrix::from_diag(&[2.0, -3.0])).unwrap(), Matrix::from_diag(&[1.0, -1.0]));
    }

    #[test]
    fn positive_spectrum_gives_identity() {
        let a = Matrix::from_rows(&[[3.0, 1.0, 0.2], [0.0, 2.0, 0.5], [0.1, 0.0, 1.0]]);
        assert!(mat_sign(&a).unwrap().distance(&Matrix::identity(3)) < 1e-12);
    }

    /// sign(Z D Z⁻¹) = Z sign(D) Z⁻¹ for a known real, well separated spectrum.
    #[test]
    fn matches_spectral_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let z =
                Matrix::from_vec(3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap().add_identity(2.0);
            let d: Vec<f64> = (0..3)
                .map(|_| {
                    let mag = rng.random_range(0.5..3.0);
                    if rng.random_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            let zi = z.inverse().unwrap();
            let a = &(&z * &Matrix::from_diag(&d)) * &zi;
            let signs: Vec<f64> = d.iter().map(|v| v.signum()).collect();
            let expected = &(&z * &Matrix::from_diag(&signs)) * &zi;
            assert!(mat_sign(&a).unwrap().distance(&expected) <= 1e-6);
        }
    }

    #[test]
    fn imaginary_axis_rejected() {
        let rot = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
        assert!(matches!(mat_sign(&rot), Err(Error::Domain { .. })));
    }
}
