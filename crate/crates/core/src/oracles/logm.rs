//! Principal square root and logarithm (inverse scaling and squaring).

use super::eigen::eigenvalues;
use super::DOMAIN_MARGIN;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const SQRT_TOL: f64 = 1e-13;
const SQRT_MAX_ITER: usize = 60;
/// Square roots are taken until `‖A − I‖_F` drops below this.
const LOG_SERIES_RADIUS: f64 = 0.5;
const MAX_SQRTS: usize = 64;
const MAX_SERIES_TERMS: usize = 400;

/// Principal square root by the determinant-scaled Denman–Beavers iteration
/// `Y ← ½(μY + (μZ)⁻¹)`, `Z ← ½(μZ + (μY)⁻¹)`, `Y₀ = A`, `Z₀ = I`.
pub fn mat_sqrt(a: &Matrix) -> Result<Matrix> {
    let n = a.n();
    let mut y = a.clone();
    let mut z = Matrix::identity(n);
    let mut scaling = true;
    for _ in 0..SQRT_MAX_ITER {
        let mu = if scaling {
            let d = (y.det() * z.det()).abs();
            if d > 0.0 && d.is_finite() {
                d.powf(-1.0 / (2.0 * n as f64))
            } else {
                1.0
            }
        } else {
            1.0
        };
        let y_inv = y.scale(mu).inverse()?;
        let z_inv = z.scale(mu).inverse()?;
        let y_next = y.axpby(0.5 * mu, &z_inv, 0.5);
        let z_next = z.axpby(0.5 * mu, &y_inv, 0.5);
        let change = y_next.distance(&y);
        let size = y_next.frobenius_norm();
        y = y_next;
        z = z_next;
        if !y.is_finite() {
            break;
        }
        if change <= SQRT_TOL * size {
            return Ok(y);
        }
        // Scaling only helps far from convergence.
        if change <= 1e-2 * size {
            scaling = false;
        }
    }
    Err(Error::NonConvergence { what: "Denman–Beavers square root", iterations: SQRT_MAX_ITER })
}

/// `log(I + X) = Σ_{k≥1} (−1)^{k+1} X^k / k` for `‖X‖ < 1`.
fn log_series(x: &Matrix) -> Matrix {
    let mut sum = x.clone();
    let mut power = x.clone();
    for k in 2..=MAX_SERIES_TERMS {
        power = &power * x;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        let term = power.scale(sign / k as f64);
        sum = &sum + &term;
        if term.frobenius_norm() <= 1e-18 * sum.frobenius_norm().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    sum
}

/// Principal logarithm. Rejects matrices with spectrum within the domain
/// margin of the closed negative real axis.
pub fn mat_log(a: &Matrix) -> Result<Matrix> {
    let spectrum = eigenvalues(a)?;
    if spectrum.min_negreal_dist <= DOMAIN_MARGIN {
        return Err(Error::Domain {
            function: "log",
            reason: format!("spectrum within {:e} of the closed negative real axis", spectrum.min_negreal_dist),
        });
    }
    let n = a.n();
    let mut root = a.clone();
    let mut sqrts = 0;
    while root.add_identity(-1.0).frobenius_norm() >= LOG_SERIES_RADIUS {
        if sqrts == MAX_SQRTS {
            return Err(Error::NonConvergence { what: "inverse scaling", iterations: sqrts });
        }
        root = mat_sqrt(&root)?;
        sqrts += 1;
    }
    let x = &root - &Matrix::identity(n);
    Ok(log_series(&x).scale(2f64.powi(sqrts as i32)))
}
