//! Tolerance-based accuracy.
//!
//! A prediction `Ŷ` of `Y` is correct at tolerance `τ` when
//! `Σ|Ŷ − Y| / (Σ|Y| + ε) < τ`, sums running over all entries. Accuracy is
//! the fraction of correct predictions; missing (malformed) predictions are
//! incorrect at every `τ`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_EPS: f64 = 1e-7;
pub const DEFAULT_TAUS: [f64; 4] = [0.05, 0.02, 0.01, 0.005];

/// `Σ|Ŷ − Y| / (Σ|Y| + ε)`.
pub fn relative_l1_error(prediction: &Matrix, target: &Matrix, eps: f64) -> Result<f64> {
    if prediction.n() != target.n() {
        return Err(Error::DimensionMismatch { expected: target.n(), actual: prediction.n() });
    }
    let diff: f64 = prediction.as_slice().iter().zip(target.as_slice()).map(|(p, t)| (p - t).abs()).sum();
    Ok(diff / (target.l1_entrywise() + eps))
}

pub fn tolerance_accuracy(predictions: &[Matrix], targets: &[Matrix], tau: f64, eps: f64) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", predictions.len(), targets.len())));
    }
    if targets.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let mut hits = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        if relative_l1_error(p, t, eps)? < tau {
            hits += 1;
        }
    }
    Ok(hits as f64 / targets.len() as f64)
}

/// Per-sample relative errors of one (function, model) evaluation; `None`
/// marks a malformed prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub function: String,
    pub arch_or_scheme: String,
    pub n: usize,
    pub errors: Vec<Option<f64>>,
}

impl EvalResult {
    pub fn from_predictions(
        function: impl Into<String>,
        arch_or_scheme: impl Into<String>,
        n: usize,
        predictions: &[Option<Matrix>],
        targets: &[Matrix],
        eps: f64,
    ) -> Result<Self> {
        if predictions.len() != targets.len() {
            return Err(Error::Shape(format!("{} predictions for {} targets", predictions.len(), targets.len())));
        }
        let errors = predictions
            .iter()
            .zip(targets)
            .map(|(p, t)| p.as_ref().map(|p| relative_l1_error(p, t, eps)).transpose())
            .collect::<Result<_>>()?;
        Ok(Self { function: function.into(), arch_or_scheme: arch_or_scheme.into(), n, errors })
    }

    pub fn malformed(&self) -> usize {
        self.errors.iter().filter(|e| e.is_none()).count()
    }

    pub fn accuracy(&self, tau: f64) -> f64 {
        let hits = self.errors.iter().filter(|e| matches!(e, Some(v) if *v < tau)).count();
        hits as f64 / self.errors.len() as f64
    }
}

/// One CSV row: `function,arch_or_scheme,n,tau,accuracy,n_eval,malformed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub function: String,
    pub arch_or_scheme: String,
    pub n: usize,
    pub tau: f64,
    pub accuracy: f64,
    pub n_eval: usize,
    pub malformed: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccuracyReport {
    pub rows: Vec<AccuracyRow>,
}

impl AccuracyReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let rows = csv::Reader::from_reader(r).deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(Self { rows })
    }
}

/// One row per result and tolerance, in input order.
pub fn report(results: &[EvalResult], taus: &[f64]) -> Result<AccuracyReport> {
    if results.is_empty() || results.iter().any(|r| r.errors.is_empty()) {
        return Err(Error::InvalidArgument("report needs non-empty results".into()));
    }
    let rows = results
        .iter()
        .flat_map(|r| {
            taus.iter().map(move |&tau| AccuracyRow {
                function: r.function.clone(),
                arch_or_scheme: r.arch_or_scheme.clone(),
                n: r.n,
                tau,
                accuracy: r.accuracy(tau),
                n_eval: r.errors.len(),
                malformed: r.malformed(),
            })
        })
        .collect();
    Ok(AccuracyReport { rows })
}
