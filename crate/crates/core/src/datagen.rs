//! Synthetic datasets: clipped Gaussian matrices paired with oracle targets.
//!
//! A dataset is fully determined by `(function, n, count, seed, sampling)`.
//! Sample `i` draws from [`stream_rng`](crate::rng::stream_rng) with label
//! `"{function}/n{n}"` and stream `i`; draws that violate the domain
//! condition, make the oracle fail, or (for `sign`) miss `‖S² − I‖_F ≤ 1e-6`
//! are discarded and redrawn from the same stream.
//!
//! Files are JSON lines: a `{"manifest": …}` header, then one
//! `{"index", "input", "target"}` record per sample with row-major entries.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::oracles::MatrixFunction;
use crate::rng::stream_rng;

pub const REJECTION_CAP: usize = 1000;
pub const SIGN_RESIDUAL_TOL: f64 = 1e-6;
pub const PRNG_NAME: &str = "ChaCha20 (rand_chacha), key = SHA-256(seed_le || label), stream = sample index";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub sigma: f64,
    pub clip: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { sigma: 1.0, clip: 5.0 }
    }
}

/// `σ·N(0,1)` entries clipped to `[-clip, clip]`.
pub fn sample_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R, sampling: Sampling) -> Matrix {
    let data = (0..n * n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            (sampling.sigma * z).clamp(-sampling.clip, sampling.clip)
        })
        .collect();
    Matrix::from_vec(n, data).expect("finite n² entries")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Matrix,
    pub target: Matrix,
    pub function: MatrixFunction,
    pub seed_index: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejections {
    pub domain: u64,
    pub oracle_failure: u64,
    pub postcondition: u64,
}

impl Rejections {
    pub fn total(&self) -> u64 {
        self.domain + self.oracle_failure + self.postcondition
    }

    fn add(&mut self, other: &Rejections) {
        self.domain += other.domain;
        self.oracle_failure += other.oracle_failure;
        self.postcondition += other.postcondition;
    }
}

/// Why a draw was discarded, if it was.
fn screen(function: MatrixFunction, input: &Matrix) -> std::result::Result<Matrix, fn(&mut Rejections)> {
    match function.in_domain(input) {
        Ok(true) => {}
        Ok(false) => return Err(|r| r.domain += 1),
        Err(_) => return Err(|r| r.oracle_failure += 1),
    }
    let target = match function.apply(input) {
        Ok(t) if t.is_finite() => t,
        _ => return Err(|r| r.oracle_failure += 1),
    };
    if function == MatrixFunction::Sign {
        let residual = (&target * &target).add_identity(-1.0).frobenius_norm();
        if residual > SIGN_RESIDUAL_TOL {
            return Err(|r| r.postcondition += 1);
        }
    }
    Ok(target)
}

/// Target for a given input, or the reason it would be rejected.
pub fn target_for(function: MatrixFunction, input: &Matrix) -> Result<Matrix> {
    screen(function, input).map_err(|_| Error::Domain {
        function: function.name(),
        reason: "input rejected by domain, oracle or postcondition check".into(),
    })
}

/// Draws until an admissible input appears, at most [`REJECTION_CAP`] times.
pub fn make_sample<R: Rng + ?Sized>(
    n: usize,
    function: MatrixFunction,
    rng: &mut R,
    sampling: Sampling,
) -> Result<(Sample, Rejections)> {
    let mut rejections = Rejections::default();
    for _ in 0..REJECTION_CAP {
        let input = sample_matrix(n, rng, sampling);
        match screen(function, &input) {
            Ok(target) => return Ok((Sample { input, target, function, seed_index: 0 }, rejections)),
            Err(count) => count(&mut rejections),
        }
    }
    Err(Error::RejectionCap { function: function.name(), cap: REJECTION_CAP })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub function: MatrixFunction,
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub sigma: f64,
    pub clip: f64,
    /// Accepted plus rejected draws.
    pub draws: u64,
    pub rejections: Rejections,
    pub prng: String,
}

fn stream_label(function: MatrixFunction, n: usize) -> String {
    format!("{function}/n{n}")
}

/// Generates `count` samples in parallel; output order and content depend
/// only on the arguments.
pub fn generate(
    function: MatrixFunction,
    n: usize,
    count: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<(DatasetManifest, Vec<Sample>)> {
    if n == 0 || count == 0 {
        return Err(Error::InvalidArgument("dataset needs n ≥ 1 and count ≥ 1".into()));
    }
    let label = stream_label(function, n);
    let drawn: Vec<(Sample, Rejections)> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, &label, i);
            let (mut s, r) = make_sample(n, function, &mut rng, sampling)?;
            s.seed_index = i;
            Ok((s, r))
        })
        .collect::<Result<_>>()?;
    let mut rejections = Rejections::default();
    drawn.iter().for_each(|(_, r)| rejections.add(r));
    let manifest = DatasetManifest {
        function,
        n,
        count,
        seed,
        sigma: sampling.sigma,
        clip: sampling.clip,
        draws: count as u64 + rejections.total(),
        rejections,
        prng: PRNG_NAME.into(),
    };
    Ok((manifest, drawn.into_iter().map(|(s, _)| s).collect()))
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    manifest: DatasetManifest,
}

#[derive(Serialize, Deserialize)]
struct Record {
    index: u64,
    input: Vec<f64>,
    target: Vec<f64>,
}

pub fn write_dataset<W: Write>(mut w: W, manifest: &DatasetManifest, samples: &[Sample]) -> Result<()> {
    if samples.len() != manifest.count {
        return Err(Error::Manifest(format!("manifest count {} but {} samples", manifest.count, samples.len())));
    }
    serde_json::to_writer(&mut w, &HeaderLine { manifest: manifest.clone() })?;
    w.write_all(b"\n")?;
    for s in samples {
        let rec =
            Record { index: s.seed_index, input: s.input.as_slice().to_vec(), target: s.target.as_slice().to_vec() };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<(DatasetManifest, Vec<Sample>)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Manifest("empty dataset file".into()))??;
    let manifest = serde_json::from_str::<HeaderLine>(&header)
        .map_err(|e| Error::Manifest(format!("bad manifest line: {e}")))?
        .manifest;
    let n = manifest.n;
    let mut samples = Vec::with_capacity(manifest.count);
    for (line_no, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| Error::Corrupt(format!("record {}: {e}", line_no + 1)))?;
        let input =
            Matrix::from_vec(n, rec.input).map_err(|e| Error::Corrupt(format!("record {}: {e}", line_no + 1)))?;
        let target =
            Matrix::from_vec(n, rec.target).map_err(|e| Error::Corrupt(format!("record {}: {e}", line_no + 1)))?;
        samples.push(Sample { input, target, function: manifest.function, seed_index: rec.index });
    }
    if samples.len() != manifest.count {
        return Err(Error::Manifest(format!("manifest count {} but file holds {}", manifest.count, samples.len())));
    }
    Ok((manifest, samples))
}

/// Deterministic train/held-out split: a seeded shuffle of `0..len` with
/// the last `⌈fraction·len⌉` indices held out.
pub fn holdout_split(len: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut stream_rng(seed, "holdout", 0));
    let held = ((fraction * len as f64).ceil() as usize).min(len);
    let test = idx.split_off(len - held);
    (idx, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_holds() {
        let mut rng = stream_rng(1, "t", 0);
        let wide = Sampling { sigma: 10.0, clip: 5.0 };
        for _ in 0..100 {
            assert!(sample_matrix(3, &mut rng, wide).as_slice().iter().all(|v| v.abs() <= 5.0));
        }
    }

    #[test]
    fn exp_never_rejects() {
        let (m, _) = generate(MatrixFunction::Exp, 3, 200, 9, Sampling::default()).unwrap();
        assert_eq!(m.rejections.total(), 0);
        assert_eq!(m.draws, 200);
    }

    #[test]
    fn injected_sign_target() {
        let t = target_for(MatrixFunction::Sign, &Matrix::from_diag(&[2.0, -3.0])).unwrap();
        assert!(t.distance(&Matrix::from_diag(&[1.0, -1.0])) < 1e-12);
        assert!(target_for(MatrixFunction::Log, &Matrix::from_diag(&[-1.0, 2.0])).is_err());
    }

    #[test]
    fn holdout_is_a_partition() {
        let (train, test) = holdout_split(100, 0.1, 5);
        assert_eq!(test.len(), 10);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(holdout_split(100, 0.1, 5), (train, test));
    }
}
