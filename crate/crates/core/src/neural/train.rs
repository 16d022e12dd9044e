//! Training loops, held-out evaluation and loss selection.
//!
//! Randomness per run comes from the config seed: epoch `e` shuffles with
//! stream `("shuffle", e)` and step `s` draws dropout masks from
//! `("dropout", s)`, so a run is a pure function of its inputs.

use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::models::{teacher_forcing, Regressor, Seq2Seq};
use super::optim::{Adam, Schedule};
use super::tape::{Gradients, Tape, Tensor};
use crate::datagen::{holdout_split, Sample};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{EvalResult, DEFAULT_EPS};
use crate::numcodec::{decode_matrix, encode_matrix, Scheme, TokenSequence, PAD};
use crate::oracles::MatrixFunction;
use crate::rng::stream_rng;

/// Guard in the relative-ℓ₁ loss denominator.
pub const LOSS_EPS: f64 = 1e-7;
pub const HOLDOUT_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    RelL1,
    Frobenius,
    Mse,
    CrossEntropy,
}

impl LossKind {
    /// Regression loss for a task: relative ℓ₁ for `exp`, Frobenius for the
    /// other matrix tasks, squared error for scalars.
    pub fn for_task(function: MatrixFunction, n: usize) -> Self {
        match (function, n) {
            (MatrixFunction::Exp, _) => LossKind::RelL1,
            (_, 1) => LossKind::Mse,
            _ => LossKind::Frobenius,
        }
    }

    pub(crate) fn apply(self, tape: &mut Tape, pred: Tensor, target: Array2<f64>) -> Tensor {
        match self {
            LossKind::RelL1 => tape.rel_l1(pred, target, LOSS_EPS),
            LossKind::Frobenius => tape.frobenius(pred, target),
            LossKind::Mse => tape.mse(pred, target),
            LossKind::CrossEntropy => panic!("cross-entropy takes token targets"),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rel_l1" => Ok(LossKind::RelL1),
            "frobenius" => Ok(LossKind::Frobenius),
            "mse" => Ok(LossKind::Mse),
            "cross_entropy" => Ok(LossKind::CrossEntropy),
            other => Err(Error::InvalidArgument(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// Loss between matrix batches stored as rows of `prediction` and `target`.
pub fn loss(kind: LossKind, prediction: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if prediction.dim() != target.dim() {
        return Err(Error::Shape(format!("prediction {:?} against target {:?}", prediction.dim(), target.dim())));
    }
    if kind == LossKind::CrossEntropy {
        return Err(Error::InvalidArgument("cross-entropy takes token targets".into()));
    }
    let store = super::params::ParamStore::default();
    let mut tape = Tape::new(&store);
    let p = tape.constant(prediction.clone());
    let l = kind.apply(&mut tape, p, target.clone());
    Ok(tape.scalar(l))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub seed: u64,
    /// Rescales gradients whose global norm exceeds this value.
    pub clip_norm: Option<f64>,
    /// Stops once this many optimizer steps have run.
    pub max_steps: Option<u64>,
    pub holdout: f64,
    /// Held-out evaluation every this many epochs and after the last; 0
    /// evaluates only after the last.
    pub eval_every: usize,
    pub taus: Vec<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::InvalidArgument(format!("holdout fraction {} outside [0, 1)", self.holdout)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    pub train_loss: f64,
    /// `(τ, accuracy)` on the held-out split, when evaluated.
    pub heldout: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub train_size: usize,
    pub heldout_size: usize,
    /// Samples that could not be tokenized under the scheme.
    pub skipped: usize,
}

/// Optimizer state and step counter across epochs.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub adam: Adam,
    pub step: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, adam: Adam::default(), step: 0 })
    }

    fn budget_left(&self) -> bool {
        self.config.max_steps.is_none_or(|m| self.step < m)
    }

    fn batches(&self, idx: &[usize], epoch: usize) -> Vec<Vec<usize>> {
        let mut order = idx.to_vec();
        order.shuffle(&mut stream_rng(self.config.seed, "shuffle", epoch as u64));
        order.chunks(self.config.batch_size).map(<[usize]>::to_vec).collect()
    }

    fn apply(&mut self, params: &mut super::params::ParamStore, loss: f64, mut grads: Gradients) -> Result<()> {
        self.step += 1;
        if !loss.is_finite() {
            return Err(Error::Divergence { step: self.step as usize, loss });
        }
        if let Some(c) = self.config.clip_norm {
            let norm = grads.global_norm();
            if norm > c {
                grads.scale(c / norm);
            }
        }
        let lr = self.config.schedule.lr(self.step);
        self.adam.step(params, &grads, lr);
        Ok(())
    }

    /// One pass over `idx`; returns the mean batch loss.
    pub fn regression_epoch<M: Regressor>(
        &mut self,
        model: &mut M,
        data: &RegressionData,
        idx: &[usize],
        loss: LossKind,
        epoch: usize,
    ) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0;
        for batch in self.batches(idx, epoch) {
            if !self.budget_left() {
                break;
            }
            let x = data.x.select(ndarray::Axis(0), &batch);
            let y = data.y.select(ndarray::Axis(0), &batch);
            let mut drop = stream_rng(self.config.seed, "dropout", self.step + 1);
            let (l, grads) = {
                let mut tape = Tape::new(model.params());
                let pred = model.forward(&mut tape, &x, Some(&mut drop));
                let lt = loss.apply(&mut tape, pred, y);
                (tape.scalar(lt), tape.backward(lt))
            };
            self.apply(model.params_mut(), l, grads)?;
            total += l;
            count += 1;
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    /// One teacher-forced pass over `idx`; returns the mean batch loss.
    pub fn seq2seq_epoch(&mut self, model: &mut Seq2Seq, data: &SeqData, idx: &[usize], epoch: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0;
        for batch in self.batches(idx, epoch) {
            if !self.budget_left() {
                break;
            }
            let (l, grads) = seq2seq_loss(model, data, &batch)?;
            self.apply(&mut model.params, l, grads)?;
            total += l;
            count += 1;
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }
}

/// Teacher-forced cross-entropy and its gradients on the samples `batch`.
pub fn seq2seq_loss(model: &Seq2Seq, data: &SeqData, batch: &[usize]) -> Result<(f64, Gradients)> {
    let src: Vec<Vec<u32>> = batch.iter().map(|&i| data.src[i].clone()).collect();
    let (dec_in, labels): (Vec<_>, Vec<_>) = batch.iter().map(|&i| teacher_forcing(&data.tgt[i])).unzip();
    let t = labels.iter().map(Vec::len).max().unwrap_or(0);
    let flat: Vec<u32> =
        labels.iter().flat_map(|l| l.iter().copied().chain(std::iter::repeat_n(PAD, t - l.len()))).collect();
    let mut tape = Tape::new(&model.params);
    let logits = model.forward(&mut tape, &src, &dec_in)?;
    let lt = tape.cross_entropy(logits, &flat, PAD);
    Ok((tape.scalar(lt), tape.backward(lt)))
}

/// Flattened inputs and targets, one matrix per row.
#[derive(Clone, Debug)]
pub struct RegressionData {
    pub n: usize,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl RegressionData {
    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let n = samples.first().ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?.input.n();
        let k = n * n;
        let mut x = Array2::zeros((samples.len(), k));
        let mut y = Array2::zeros((samples.len(), k));
        for (i, s) in samples.iter().enumerate() {
            if s.input.n() != n || s.target.n() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: s.input.n() });
            }
            x.row_mut(i).assign(&ndarray::ArrayView1::from(s.input.as_slice()));
            y.row_mut(i).assign(&ndarray::ArrayView1::from(s.target.as_slice()));
        }
        Ok(Self { n, x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn targets(&self, idx: &[usize]) -> Vec<Matrix> {
        idx.iter().map(|&i| Matrix::from_vec(self.n, self.y.row(i).to_vec()).expect("finite target")).collect()
    }
}

/// Tokenized pairs. Samples whose input or target cannot be encoded under
/// the scheme are dropped and counted in `skipped`.
#[derive(Clone, Debug)]
pub struct SeqData {
    pub n: usize,
    pub scheme: Scheme,
    pub src: Vec<Vec<u32>>,
    pub tgt: Vec<Vec<u32>>,
    pub targets: Vec<Matrix>,
    pub skipped: usize,
}

impl SeqData {
    pub fn from_samples(samples: &[Sample], scheme: Scheme) -> Result<Self> {
        let n = samples.first().ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?.input.n();
        let mut out = Self { n, scheme, src: Vec::new(), tgt: Vec::new(), targets: Vec::new(), skipped: 0 };
        for s in samples {
            match (encode_matrix(&s.input, scheme), encode_matrix(&s.target, scheme)) {
                (Ok(a), Ok(b)) => {
                    out.src.push(a.tokens);
                    out.tgt.push(b.tokens);
                    out.targets.push(s.target.clone());
                }
                _ => out.skipped += 1,
            }
        }
        if out.src.is_empty() {
            return Err(Error::InvalidArgument(format!("no sample is encodable under {}", scheme.name())));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Longest encoded matrix for this `n` and scheme: `2 + n²·tokens_per_coeff`.
    pub fn max_target_len(&self) -> usize {
        max_sequence_len(self.n, self.scheme)
    }
}

pub fn max_sequence_len(n: usize, scheme: Scheme) -> usize {
    2 + n * n * scheme.tokens_per_coeff()
}

const EVAL_CHUNK: usize = 256;

/// Eval-mode predictions; non-finite rows are `None`.
pub fn predict_regression<M: Regressor + Sync>(model: &M, x: &Array2<f64>, n: usize) -> Vec<Option<Matrix>> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    rows.par_chunks(EVAL_CHUNK)
        .flat_map_iter(|chunk| {
            let xb = x.select(ndarray::Axis(0), chunk);
            let mut tape = Tape::new(model.params());
            let y = model.forward(&mut tape, &xb, None);
            tape.value(y).rows().into_iter().map(|r| Matrix::from_vec(n, r.to_vec()).ok()).collect::<Vec<_>>()
        })
        .collect()
}

/// Greedy decodes of `src`, parsed back to matrices; unparseable outputs are
/// `None`.
pub fn predict_seq2seq(model: &Seq2Seq, src: &[Vec<u32>], n: usize, scheme: Scheme) -> Result<Vec<Option<Matrix>>> {
    let cap = max_sequence_len(n, scheme);
    let decoded: Vec<Vec<Vec<u32>>> =
        src.par_chunks(EVAL_CHUNK).map(|chunk| model.greedy_decode(chunk, cap)).collect::<Result<_>>()?;
    Ok(decoded
        .into_iter()
        .flatten()
        .map(|tokens| decode_matrix(&TokenSequence { scheme, tokens }, n).ok().filter(Matrix::is_finite))
        .collect())
}

fn accuracies(result: &EvalResult, taus: &[f64]) -> Vec<(f64, f64)> {
    taus.iter().map(|&t| (t, result.accuracy(t))).collect()
}

fn should_eval(cfg: &TrainConfig, epoch: usize) -> bool {
    epoch == cfg.epochs || (cfg.eval_every > 0 && epoch.is_multiple_of(cfg.eval_every))
}

/// Trains a regressor on a seeded split of `samples`; returns the history
/// and the held-out evaluation of the final model.
pub fn train_regression<M: Regressor + Sync>(
    model: &mut M,
    samples: &[Sample],
    loss: LossKind,
    config: &TrainConfig,
    label: &str,
) -> Result<(History, EvalResult)> {
    let data = RegressionData::from_samples(samples)?;
    let (train, held) = holdout_split(data.len(), config.holdout, config.seed);
    let function = samples[0].function;
    let mut trainer = Trainer::new(config.clone())?;
    let mut history = History { train_size: train.len(), heldout_size: held.len(), ..History::default() };
    let evaluate = |model: &M| {
        let preds = predict_regression(model, &data.x.select(ndarray::Axis(0), &held), data.n);
        EvalResult::from_predictions(function.name(), label, data.n, &preds, &data.targets(&held), DEFAULT_EPS)
    };
    let mut last = None;
    for epoch in 1..=config.epochs {
        let train_loss = trainer.regression_epoch(model, &data, &train, loss, epoch)?;
        let heldout = if should_eval(config, epoch) && !held.is_empty() {
            let r = evaluate(model)?;
            let acc = accuracies(&r, &config.taus);
            last = Some(r);
            Some(acc)
        } else {
            None
        };
        history.epochs.push(EpochRecord { epoch, steps: trainer.step, train_loss, heldout });
        if !trainer.budget_left() {
            break;
        }
    }
    let result = match last {
        Some(r) if history.epochs.last().is_some_and(|e| e.heldout.is_some()) => r,
        _ => evaluate(model)?,
    };
    Ok((history, result))
}

/// Trains the encoder-decoder on a seeded split of `samples`.
pub fn train_seq2seq(
    model: &mut Seq2Seq,
    samples: &[Sample],
    scheme: Scheme,
    config: &TrainConfig,
) -> Result<(History, EvalResult)> {
    let data = SeqData::from_samples(samples, scheme)?;
    let (train, held) = holdout_split(data.len(), config.holdout, config.seed);
    let function = samples[0].function;
    let mut trainer = Trainer::new(config.clone())?;
    let mut history =
        History { train_size: train.len(), heldout_size: held.len(), skipped: data.skipped, ..History::default() };
    let evaluate = |model: &Seq2Seq| -> Result<EvalResult> {
        let src: Vec<Vec<u32>> = held.iter().map(|&i| data.src[i].clone()).collect();
        let targets: Vec<Matrix> = held.iter().map(|&i| data.targets[i].clone()).collect();
        let preds = predict_seq2seq(model, &src, data.n, scheme)?;
        EvalResult::from_predictions(function.name(), scheme.name(), data.n, &preds, &targets, DEFAULT_EPS)
    };
    let mut last = None;
    for epoch in 1..=config.epochs {
        let train_loss = trainer.seq2seq_epoch(model, &data, &train, epoch)?;
        let done = !trainer.budget_left();
        let heldout = if (should_eval(config, epoch) || done) && !held.is_empty() {
            let r = evaluate(model)?;
            let acc = accuracies(&r, &config.taus);
            last = Some(r);
            Some(acc)
        } else {
            None
        };
        history.epochs.push(EpochRecord { epoch, steps: trainer.step, train_loss, heldout });
        if done {
            break;
        }
    }
    let result = match last {
        Some(r) if history.epochs.last().is_some_and(|e| e.heldout.is_some()) => r,
        _ => evaluate(model)?,
    };
    Ok((history, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn loss_examples() {
        let y = array![[1.0, 0.0, 0.0, 1.0]];
        for k in [LossKind::RelL1, LossKind::Frobenius, LossKind::Mse] {
            assert_eq!(loss(k, &y, &y).unwrap(), 0.0);
        }
        assert!((loss(LossKind::RelL1, &(&y * 2.0), &y).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(loss(LossKind::Frobenius, &Array2::zeros((1, 4)), &y).unwrap(), 2f64.sqrt());
        assert!(loss(LossKind::Mse, &y, &Array2::zeros((1, 3))).is_err());
        assert!(loss(LossKind::CrossEntropy, &y, &y).is_err());
        assert!("hinge".parse::<LossKind>().is_err());
        assert_eq!("rel_l1".parse::<LossKind>().unwrap(), LossKind::RelL1);
    }

    #[test]
    fn task_losses() {
        assert_eq!(LossKind::for_task(MatrixFunction::Exp, 1), LossKind::RelL1);
        assert_eq!(LossKind::for_task(MatrixFunction::Exp, 3), LossKind::RelL1);
        assert_eq!(LossKind::for_task(MatrixFunction::Sign, 1), LossKind::Mse);
        assert_eq!(LossKind::for_task(MatrixFunction::Log, 2), LossKind::Frobenius);
    }
}
