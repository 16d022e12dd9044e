//! Exponential, sine and cosine by argument reduction and Taylor series.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Scaled arguments satisfy `‖A‖_F / 2^s ≤ SCALE_TARGET`.
const SCALE_TARGET: f64 = 0.5;
const MAX_TERMS: usize = 60;
/// Terms are summed until they fall below this fraction of the partial sum.
const TAIL_TOL: f64 = 1e-18;

/// Number of halvings needed to bring `‖a‖_F` down to [`SCALE_TARGET`].
pub(crate) fn scaling_exponent(a: &Matrix) -> u32 {
    let norm = a.frobenius_norm();
    if norm <= SCALE_TARGET {
        0
    } else {
        (norm / SCALE_TARGET).log2().ceil() as u32
    }
}

fn check_finite(m: Matrix, what: &'static str) -> Result<Matrix> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::Overflow(what))
    }
}

fn check_input(a: &Matrix) -> Result<()> {
    match a.as_slice().iter().find(|v| !v.is_finite()) {
        Some(&v) => Err(Error::NonFinite(v)),
        None => Ok(()),
    }
}

/// Taylor series of `e^x` summed to machine precision; `x` must be small.
fn exp_taylor(x: &Matrix) -> Matrix {
    let n = x.n();
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=MAX_TERMS {
        term = (&term * x).scale(1.0 / k as f64);
        sum = &sum + &term;
        if term.frobenius_norm() <= TAIL_TOL * sum.frobenius_norm() {
            break;
        }
    }
    sum
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn mat_exp(a: &Matrix) -> Result<Matrix> {
    check_input(a)?;
    let s = scaling_exponent(a);
    let mut e = exp_taylor(&a.scale(0.5f64.powi(s as i32)));
    for _ in 0..s {
        e = &e * &e;
        if !e.is_finite() {
            return Err(Error::Overflow("matrix exponential"));
        }
    }
    check_finite(e, "matrix exponential")
}

/// Taylor series of sine and cosine sharing the powers of `x`.
fn sin_cos_taylor(x: &Matrix) -> (Matrix, Matrix) {
    let n = x.n();
    let mut sin = x.clone();
    let mut cos = Matrix::identity(n);
    let x2 = x * x;
    // Odd and even terms: A^(2k+1)/(2k+1)! and A^(2k)/(2k)!, alternating sign.
    let mut odd = x.clone();
    let mut even = Matrix::identity(n);
    for k in 1..=MAX_TERMS / 2 {
        let kk = (2 * k) as f64;
        even = (&even * &x2).scale(-1.0 / ((kk - 1.0) * kk));
        odd = (&odd * &x2).scale(-1.0 / (kk * (kk + 1.0)));
        cos = &cos + &even;
        sin = &sin + &odd;
        let tail = even.frobenius_norm() + odd.frobenius_norm();
        if tail <= TAIL_TOL * (cos.frobenius_norm() + sin.frobenius_norm()) {
            break;
        }
    }
    (sin, cos)
}

/// `(sin A, cos A)` by halving, Taylor, and the double-angle recurrences
/// `sin 2X = 2 sin X cos X`, `cos 2X = 2 cos² X − I`.
pub fn mat_sin_cos(a: &Matrix) -> Result<(Matrix, Matrix)> {
    check_input(a)?;
    let s = scaling_exponent(a);
    let (mut sin, mut cos) = sin_cos_taylor(&a.scale(0.5f64.powi(s as i32)));
    for _ in 0..s {
        let new_sin = (&sin * &cos).scale(2.0);
        let new_cos = (&cos * &cos).scale(2.0).add_identity(-1.0);
        sin = new_sin;
        cos = new_cos;
        if !sin.is_finite() || !cos.is_finite() {
            return Err(Error::Overflow("matrix sine/cosine"));
        }
    }
    Ok((check_finite(sin, "matrix sine")?, check_finite(cos, "matrix cosine")?))
}

pub fn mat_sin(a: &Matrix) -> Result<Matrix> {
    mat_sin_cos(a).map(|(s, _)| s)
}

pub fn mat_cos(a: &Matrix) -> Result<Matrix> {
    mat_sin_cos(a).map(|(_, c)| c)
}
