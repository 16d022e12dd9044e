//! Reference implementations of the five matrix functions.
//!
//! Every routine here is a pure function of its input. These are the ground
//! truth for generated datasets and for certifying the explicit ReLU
//! networks, so they favour accuracy over speed:
//!
//! * `exp` — scaling and squaring around a Taylor kernel summed to machine
//!   precision;
//! * `sin`/`cos` — the same halving, then double-angle recurrences;
//! * `log` — repeated principal square roots (Denman–Beavers) until
//!   `‖A − I‖_F < ½`, the Mercator series, then rescaling by `2^s`;
//! * `sign` — Newton's iteration with determinant scaling.
//!
//! Domain conditions are checked on the spectrum, computed by Hessenberg
//! reduction and shifted QR.

mod eigen;
mod logm;
mod series;
mod signm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use eigen::{eigenvalues, SpectrumInfo, MAX_EIGEN_DIM};
pub use logm::{mat_log, mat_sqrt};
pub use series::{mat_cos, mat_exp, mat_sin, mat_sin_cos};
pub use signm::mat_sign;

pub use crate::matrix::{mat_inverse, mat_mul};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Spectra closer than this to a branch cut or the imaginary axis are
/// rejected.
pub const DOMAIN_MARGIN: f64 = 1e-6;

/// The five matrix functions handled by the toolkit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFunction {
    Exp,
    Log,
    Sign,
    Sin,
    Cos,
}

impl MatrixFunction {
    pub const ALL: [MatrixFunction; 5] = [Self::Exp, Self::Log, Self::Sign, Self::Sin, Self::Cos];

    pub fn name(self) -> &'static str {
        match self {
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sign => "sign",
            Self::Sin => "sin",
            Self::Cos => "cos",
        }
    }

    pub fn apply(self, a: &Matrix) -> Result<Matrix> {
        match self {
            Self::Exp => mat_exp(a),
            Self::Log => mat_log(a),
            Self::Sign => mat_sign(a),
            Self::Sin => mat_sin(a),
            Self::Cos => mat_cos(a),
        }
    }

    /// Whether `a` satisfies this function's spectral domain condition with
    /// margin [`DOMAIN_MARGIN`]. Entire functions accept everything.
    pub fn in_domain(self, a: &Matrix) -> Result<bool> {
        Ok(match self {
            Self::Log => eigenvalues(a)?.min_negreal_dist > DOMAIN_MARGIN,
            Self::Sign => eigenvalues(a)?.min_real_abs > DOMAIN_MARGIN,
            Self::Exp | Self::Sin | Self::Cos => true,
        })
    }
}

impl fmt::Display for MatrixFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MatrixFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Ok(Self::Exp),
            "log" | "logarithm" => Ok(Self::Log),
            "sign" => Ok(Self::Sign),
            "sin" | "sine" => Ok(Self::Sin),
            "cos" | "cosine" => Ok(Self::Cos),
            other => Err(Error::InvalidArgument(format!("unknown matrix function `{other}`"))),
        }
    }
}
