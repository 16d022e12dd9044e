//! Empirical sup-error certification of constructed networks.
//!
//! One-dimensional boxes are sampled on a uniform grid including both
//! endpoints. Higher-dimensional boxes use the Halton sequence plus every
//! corner of the box (corners only up to 16 dimensions).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::construct::ExpNetSpec;
use super::network::ReluNetwork;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::oracles::{mat_exp, mat_mul};

const MAX_CORNER_DIM: usize = 16;
const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131,
];

/// Reference function a network is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    /// `x ↦ x`.
    Identity,
    /// `x ↦ x²` (scalar).
    Square,
    /// `x ↦ ∏ x_i`.
    Product,
    /// Row-major `A ↦ A^k`.
    MatrixPower { n: usize, k: usize },
    /// Row-major `A ↦ e^A`.
    MatrixExp { n: usize },
}

impl Oracle {
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match *self {
            Oracle::Identity => x.to_vec(),
            Oracle::Square => vec![x[0] * x[0]],
            Oracle::Product => vec![x.iter().product()],
            Oracle::MatrixPower { n, k } => {
                let a = Matrix::from_vec(n, x.to_vec())?;
                let mut p = Matrix::identity(n);
                for _ in 0..k {
                    p = mat_mul(&p, &a)?;
                }
                p.into_vec()
            }
            Oracle::MatrixExp { n } => mat_exp(&Matrix::from_vec(n, x.to_vec())?)?.into_vec(),
        })
    }
}

/// The symmetric box `[-bound, bound]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub dim: usize,
    pub bound: f64,
}

/// `i`-th element (from 1) of the van der Corput sequence in `base`.
fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = f64::from(base);
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % u64::from(base)) as f64 * inv;
        i /= u64::from(base);
        inv /= b;
    }
    out
}

impl SampleBox {
    /// Deterministic sample points: grid for `dim == 1`, otherwise corners
    /// followed by `samples` Halton points.
    pub fn points(&self, samples: usize) -> Vec<Vec<f64>> {
        let m = self.bound;
        if self.dim == 1 {
            if samples == 1 {
                return vec![vec![0.0]];
            }
            return (0..samples).map(|i| vec![-m + 2.0 * m * i as f64 / (samples - 1) as f64]).collect();
        }
        assert!(self.dim <= PRIMES.len(), "Halton sampling supports at most {} dimensions", PRIMES.len());
        let mut pts = Vec::new();
        if self.dim <= MAX_CORNER_DIM {
            for mask in 0u64..1 << self.dim {
                pts.push((0..self.dim).map(|d| if mask >> d & 1 == 1 { m } else { -m }).collect());
            }
        }
        pts.extend(
            (1..=samples as u64).map(|i| (0..self.dim).map(|d| -m + 2.0 * m * radical_inverse(i, PRIMES[d])).collect()),
        );
        pts
    }
}

/// Width and depth shapes of the exponential-network bounds and the
/// constants this implementation attains against them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpBounds {
    #[serde(rename = "K")]
    pub k: usize,
    pub width_shape: f64,
    pub depth_shape: f64,
    /// `width / width_shape`.
    pub c1: f64,
    /// `depth / depth_shape`.
    pub c2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub oracle: Oracle,
    pub points: usize,
    pub max_error: f64,
    pub mean_error: f64,
    pub worst_input: Vec<f64>,
    pub width: usize,
    pub depth: usize,
    pub weights: u64,
    pub bounds: Option<ExpBounds>,
}

impl CertReport {
    /// Fails with [`Error::Certification`] when the measured error exceeds `target`.
    pub fn ensure_within(&self, target: f64) -> Result<()> {
        if self.max_error <= target {
            Ok(())
        } else {
            Err(Error::Certification { measured: self.max_error, target })
        }
    }
}

/// Euclidean (Frobenius for matrices) distance between network and oracle
/// outputs at every sample point.
pub fn certify(net: &ReluNetwork, oracle: Oracle, domain: SampleBox, samples: usize) -> Result<CertReport> {
    if net.input_dim() != domain.dim {
        return Err(Error::DimensionMismatch { expected: net.input_dim(), actual: domain.dim });
    }
    let pts = domain.points(samples);
    let errors: Vec<f64> = pts
        .par_iter()
        .map(|x| {
            let got = net.forward(x)?;
            let want = oracle.evaluate(x)?;
            if got.len() != want.len() {
                return Err(Error::DimensionMismatch { expected: want.len(), actual: got.len() });
            }
            Ok(got.iter().zip(&want).map(|(g, w)| (g - w) * (g - w)).sum::<f64>().sqrt())
        })
        .collect::<Result<_>>()?;
    let (worst, max_error) =
        errors.iter().enumerate().fold((0, f64::MIN), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
    Ok(CertReport {
        oracle,
        points: pts.len(),
        max_error,
        mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
        worst_input: pts[worst].clone(),
        width: net.width(),
        depth: net.depth(),
        weights: net.weight_count(),
        bounds: None,
    })
}

/// [`certify`] against `e^A` on `[-M, M]^{n×n}`, with the bound constants filled in.
pub fn certify_exp(net: &ReluNetwork, spec: &ExpNetSpec, samples: usize) -> Result<CertReport> {
    let domain = SampleBox { dim: spec.n * spec.n, bound: spec.m };
    let mut report = certify(net, Oracle::MatrixExp { n: spec.n }, domain, samples)?;
    let (ws, ds) = (spec.width_shape(), spec.depth_shape());
    report.bounds = Some(ExpBounds {
        k: spec.k,
        width_shape: ws,
        depth_shape: ds,
        c1: report.width as f64 / ws,
        c2: report.depth as f64 / ds,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_network_certifies_exactly() {
        let net = ReluNetwork::identity(3, 2);
        let r = certify(&net, Oracle::Identity, SampleBox { dim: 3, bound: 2.0 }, 500).unwrap();
        assert_eq!(r.max_error, 0.0);
        assert_eq!(r.points, 508);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(2, 3) - 2.0 / 3.0).abs() < 1e-15);
        let pts = SampleBox { dim: 1, bound: 1.0 }.points(3);
        assert_eq!(pts, vec![vec![-1.0], vec![0.0], vec![1.0]]);
    }

    #[test]
    fn mismatched_domain_is_rejected() {
        let net = ReluNetwork::identity(2, 0);
        assert!(certify(&net, Oracle::Identity, SampleBox { dim: 3, bound: 1.0 }, 10).is_err());
    }
}
