//! The baseline regressors and the encoder-decoder transformer.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::layers::{DecoderLayer, EncoderLayer, LayerNorm, Linear};
use super::params::{fan_in_uniform, normal, ParamStore};
use super::tape::{AttnSpec, Tape, Tensor};
use crate::error::{Error, Result};
use crate::numcodec::{BOS, EOS, PAD};
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
}

impl MlpConfig {
    /// Three hidden layers 128-256-128, no dropout.
    pub fn shallow(n: usize) -> Self {
        Self { input_dim: n * n, output_dim: n * n, hidden: vec![128, 256, 128], dropout: 0.0 }
    }

    /// Seven hidden layers 128-256-512-1024-512-256-128 with dropout 0.2.
    pub fn deep(n: usize) -> Self {
        Self { input_dim: n * n, output_dim: n * n, hidden: vec![128, 256, 512, 1024, 512, 256, 128], dropout: 0.2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("MLP widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// A model mapping a batch of flattened matrices (`batch × n²`) to
/// predictions of the same shape.
pub trait Regressor {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    /// `dropout` is the train-mode randomness; `None` is eval mode.
    fn forward(&self, tape: &mut Tape, x: &Array2<f64>, dropout: Option<&mut ChaCha20Rng>) -> Tensor;
}

#[derive(Clone, Debug)]
pub struct Mlp {
    pub config: MlpConfig,
    pub params: ParamStore,
    layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, "init/mlp", 0);
        let mut params = ParamStore::default();
        let mut widths = vec![config.input_dim];
        widths.extend(&config.hidden);
        widths.push(config.output_dim);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let lin = Linear::new(&mut params, &format!("mlp.{i}"), fan_in_uniform(&mut rng, w[0], w[1], w[0]));
                *params.get_mut(lin.b) = fan_in_uniform(&mut rng, 1, w[1], w[0]);
                lin
            })
            .collect();
        Ok(Self { config, params, layers })
    }
}

impl Regressor for Mlp {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, x: &Array2<f64>, mut dropout: Option<&mut ChaCha20Rng>) -> Tensor {
        let mut h = tape.constant(x.clone());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h);
            if i < last {
                h = tape.relu(h);
                if let (Some(rng), p) = (dropout.as_deref_mut(), self.config.dropout) {
                    if p > 0.0 {
                        let keep = 1.0 - p;
                        let mask = tape.value(h).mapv(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
                        h = tape.mask_mul(h, mask);
                    }
                }
            }
        }
        h
    }
}

/// `γ(x) = [cos(2πxBᵀ), sin(2πxBᵀ)]` row-wise: `x` is `N × k`, `B` is `m × k`,
/// the result `N × 2m`.
pub fn fourier_features(x: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != b.ncols() {
        return Err(Error::Shape(format!("features of width {} against B with {} columns", x.ncols(), b.ncols())));
    }
    let proj = x.dot(&b.t()) * (2.0 * PI);
    Ok(ndarray::concatenate![ndarray::Axis(1), proj.mapv(f64::cos), proj.mapv(f64::sin)])
}

/// Divisor of `d` closest to `target`, the smaller on ties.
pub fn nearest_divisor(d: usize, target: usize) -> usize {
    (1..=d).filter(|k| d.is_multiple_of(*k)).min_by_key(|&k| (k.abs_diff(target), k)).unwrap_or(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierConfig {
    pub n: usize,
    /// Rows of `B`; the lifted feature has `2·features` entries per token.
    pub features: usize,
    pub sigma: f64,
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
}

impl FourierConfig {
    /// One token per matrix entry; the head count is `n²` moved to the
    /// nearest divisor of `d_model`.
    pub fn desk(n: usize) -> Self {
        let d_model = 64;
        Self {
            n,
            features: 32,
            sigma: 1.0,
            d_model,
            layers: 2,
            heads: nearest_divisor(d_model, n * n),
            ffn_dim: 4 * d_model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0
            || self.features == 0
            || self.d_model == 0
            || self.heads == 0
            || !self.d_model.is_multiple_of(self.heads)
        {
            return Err(Error::InvalidArgument(format!(
                "Fourier encoder needs positive sizes and d_model divisible by heads, got {self:?}"
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma {} must be finite and ≥ 0", self.sigma)));
        }
        Ok(())
    }
}

/// Transformer encoder over the `n²` entries of a matrix, each lifted by
/// fixed random Fourier features.
#[derive(Clone, Debug)]
pub struct FourierEncoder {
    pub config: FourierConfig,
    pub params: ParamStore,
    /// `features × 1`, drawn once from `N(0, σ²)` and never trained.
    pub b: Array2<f64>,
    embed: Linear,
    pos: crate::neural::params::ParamId,
    layers: Vec<EncoderLayer>,
    ln: LayerNorm,
    head: Linear,
}

impl FourierEncoder {
    pub fn new(config: FourierConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let b = normal(&mut stream_rng(seed, "init/fourier-B", 0), config.features, 1, config.sigma);
        let mut rng = stream_rng(seed, "init/fourier", 0);
        let mut params = ParamStore::default();
        let d = config.d_model;
        let t = config.n * config.n;
        let embed = Linear::xavier(&mut params, "fourier.embed", 2 * config.features, d, &mut rng);
        let pos = params.add("fourier.pos", normal(&mut rng, t, d, 0.02));
        let layers = (0..config.layers)
            .map(|i| {
                EncoderLayer::new(&mut params, &format!("fourier.enc{i}"), d, config.heads, config.ffn_dim, &mut rng)
            })
            .collect();
        let ln = LayerNorm::new(&mut params, "fourier.ln", d);
        let head = Linear::xavier(&mut params, "fourier.head", d, 1, &mut rng);
        Ok(Self { config, params, b, embed, pos, layers, ln, head })
    }
}

impl Regressor for FourierEncoder {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, x: &Array2<f64>, _dropout: Option<&mut ChaCha20Rng>) -> Tensor {
        let t = self.config.n * self.config.n;
        let batch = x.nrows();
        let entries = x.as_standard_layout().into_owned().into_shape_with_order((batch * t, 1)).expect("batch × n²");
        let lifted = fourier_features(&entries, &self.b).expect("one input column");
        let h = tape.constant(lifted);
        let h = self.embed.forward(tape, h);
        let table = tape.param(self.pos);
        let ids: Vec<u32> = (0..batch).flat_map(|_| 0..t as u32).collect();
        let p = tape.embedding(table, &ids);
        let mut h = tape.add(h, p);
        let spec = AttnSpec { batch, tq: t, tk: t, heads: self.config.heads, causal: false, key_mask: None };
        for layer in &self.layers {
            h = layer.forward(tape, h, &spec);
        }
        let h = self.ln.forward(tape, h);
        let y = self.head.forward(tape, h);
        tape.reshape(y, batch, t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    /// Feed-forward hidden width.
    pub ffn_dim: usize,
    /// Longest source or target sequence, BOS included.
    pub max_len: usize,
}

impl TransformerConfig {
    /// 2 encoder layers, 1 decoder layer, 4 heads, width 64.
    pub fn desk(vocab_size: usize, max_len: usize) -> Self {
        Self { vocab_size, d_model: 64, enc_layers: 2, dec_layers: 1, heads: 4, ffn_dim: 256, max_len }
    }

    /// 8 encoder layers, 1 decoder layer, 8 heads, width 512.
    pub fn paper(vocab_size: usize, max_len: usize) -> Self {
        Self { vocab_size, d_model: 512, enc_layers: 8, dec_layers: 1, heads: 8, ffn_dim: 2048, max_len }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= EOS as usize || self.d_model == 0 || self.heads == 0 || self.max_len == 0 {
            return Err(Error::InvalidArgument(format!("invalid transformer config {self:?}")));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }
}

/// Padded batch of token sequences stacked row-wise.
struct Batch {
    ids: Vec<u32>,
    valid: Vec<bool>,
    len: usize,
}

/// Encoder-decoder transformer with tied input embeddings for source and
/// target, learned positions and an untied output projection.
#[derive(Clone, Debug)]
pub struct Seq2Seq {
    pub config: TransformerConfig,
    pub params: ParamStore,
    tok: crate::neural::params::ParamId,
    src_pos: crate::neural::params::ParamId,
    tgt_pos: crate::neural::params::ParamId,
    encoder: Vec<EncoderLayer>,
    enc_ln: LayerNorm,
    decoder: Vec<DecoderLayer>,
    dec_ln: LayerNorm,
    out: Linear,
}

/// Encoder output for a batch.
pub struct Memory {
    pub states: Tensor,
    batch: usize,
    len: usize,
    valid: Vec<bool>,
}

impl Seq2Seq {
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, "init/seq2seq", 0);
        let mut params = ParamStore::default();
        let (d, h, f) = (config.d_model, config.heads, config.ffn_dim);
        let std = 1.0 / (d as f64).sqrt();
        let tok = params.add("tok", normal(&mut rng, config.vocab_size, d, std));
        let src_pos = params.add("src_pos", normal(&mut rng, config.max_len, d, std));
        let tgt_pos = params.add("tgt_pos", normal(&mut rng, config.max_len, d, std));
        let encoder = (0..config.enc_layers)
            .map(|i| EncoderLayer::new(&mut params, &format!("enc{i}"), d, h, f, &mut rng))
            .collect();
        let enc_ln = LayerNorm::new(&mut params, "enc_ln", d);
        let decoder = (0..config.dec_layers)
            .map(|i| DecoderLayer::new(&mut params, &format!("dec{i}"), d, h, f, &mut rng))
            .collect();
        let dec_ln = LayerNorm::new(&mut params, "dec_ln", d);
        let out = Linear::xavier(&mut params, "out", d, config.vocab_size, &mut rng);
        Ok(Self { config, params, tok, src_pos, tgt_pos, encoder, enc_ln, decoder, dec_ln, out })
    }

    fn pad(&self, seqs: &[Vec<u32>]) -> Result<Batch> {
        if seqs.is_empty() || seqs.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidArgument("empty batch or sequence".into()));
        }
        let len = seqs.iter().map(Vec::len).max().unwrap_or(0);
        if len > self.config.max_len {
            return Err(Error::InvalidArgument(format!("sequence length {len} exceeds max {}", self.config.max_len)));
        }
        let mut ids = Vec::with_capacity(seqs.len() * len);
        let mut valid = Vec::with_capacity(seqs.len() * len);
        for s in seqs {
            if let Some(&bad) = s.iter().find(|&&t| t as usize >= self.config.vocab_size) {
                return Err(Error::InvalidArgument(format!(
                    "token {bad} outside vocabulary of {}",
                    self.config.vocab_size
                )));
            }
            ids.extend(s);
            ids.extend(std::iter::repeat_n(PAD, len - s.len()));
            valid.extend(s.iter().map(|_| true));
            valid.extend(std::iter::repeat_n(false, len - s.len()));
        }
        Ok(Batch { ids, valid, len })
    }

    fn embed(&self, tape: &mut Tape, batch: &Batch, pos: crate::neural::params::ParamId) -> Tensor {
        let tok = tape.param(self.tok);
        let e = tape.embedding(tok, &batch.ids);
        let table = tape.param(pos);
        let rows = batch.ids.len() / batch.len;
        let pos_ids: Vec<u32> = (0..rows).flat_map(|_| 0..batch.len as u32).collect();
        let p = tape.embedding(table, &pos_ids);
        tape.add(e, p)
    }

    pub fn encode(&self, tape: &mut Tape, src: &[Vec<u32>]) -> Result<Memory> {
        let b = self.pad(src)?;
        let mut h = self.embed(tape, &b, self.src_pos);
        let spec = AttnSpec {
            batch: src.len(),
            tq: b.len,
            tk: b.len,
            heads: self.config.heads,
            causal: false,
            key_mask: Some(b.valid.clone()),
        };
        for layer in &self.encoder {
            h = layer.forward(tape, h, &spec);
        }
        let states = self.enc_ln.forward(tape, h);
        Ok(Memory { states, batch: src.len(), len: b.len, valid: b.valid })
    }

    /// Next-token logits, `(batch·T) × vocab` with `T` the longest `dec_in`.
    pub fn decode(&self, tape: &mut Tape, memory: &Memory, dec_in: &[Vec<u32>]) -> Result<Tensor> {
        if dec_in.len() != memory.batch {
            return Err(Error::Shape(format!("{} decoder inputs for {} sources", dec_in.len(), memory.batch)));
        }
        let b = self.pad(dec_in)?;
        let mut h = self.embed(tape, &b, self.tgt_pos);
        let self_spec = AttnSpec {
            batch: memory.batch,
            tq: b.len,
            tk: b.len,
            heads: self.config.heads,
            causal: true,
            key_mask: None,
        };
        let cross_spec = AttnSpec {
            batch: memory.batch,
            tq: b.len,
            tk: memory.len,
            heads: self.config.heads,
            causal: false,
            key_mask: Some(memory.valid.clone()),
        };
        for layer in &self.decoder {
            h = layer.forward(tape, h, memory.states, &self_spec, &cross_spec);
        }
        let h = self.dec_ln.forward(tape, h);
        Ok(self.out.forward(tape, h))
    }

    pub fn forward(&self, tape: &mut Tape, src: &[Vec<u32>], dec_in: &[Vec<u32>]) -> Result<Tensor> {
        let memory = self.encode(tape, src)?;
        self.decode(tape, &memory, dec_in)
    }

    /// Argmax decoding from `<BOS>` until every sequence has emitted `<EOS>`
    /// or holds `max_len` tokens. Outputs exclude `<BOS>` and include `<EOS>`
    /// when it was produced.
    pub fn greedy_decode(&self, src: &[Vec<u32>], max_len: usize) -> Result<Vec<Vec<u32>>> {
        let max_len = max_len.min(self.config.max_len - 1);
        let mut tape = Tape::new(&self.params);
        let memory = self.encode(&mut tape, src)?;
        let mut prefixes: Vec<Vec<u32>> = vec![vec![BOS]; src.len()];
        let mut done = vec![false; src.len()];
        let v = self.config.vocab_size;
        for step in 0..max_len {
            let logits = self.decode(&mut tape, &memory, &prefixes)?;
            let l = tape.value(logits);
            let t = step + 1;
            for (i, p) in prefixes.iter_mut().enumerate() {
                let next = if done[i] {
                    PAD
                } else {
                    let row = l.row(i * t + step);
                    let mut best = 0;
                    for k in 1..v {
                        if row[k] > row[best] {
                            best = k;
                        }
                    }
                    best as u32
                };
                done[i] |= next == EOS;
                p.push(next);
            }
            if done.iter().all(|&d| d) {
                break;
            }
        }
        Ok(prefixes
            .into_iter()
            .map(|p| {
                let mut out: Vec<u32> = p.into_iter().skip(1).take_while(|&t| t != PAD).collect();
                if let Some(e) = out.iter().position(|&t| t == EOS) {
                    out.truncate(e + 1);
                }
                out
            })
            .collect())
    }
}

/// Decoder input and labels for teacher forcing: `[<BOS>, t₀, …, t_{L−2}]`
/// predicts `[t₀, …, t_{L−1}]`.
pub fn teacher_forcing(target: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut input = Vec::with_capacity(target.len());
    input.push(BOS);
    input.extend(&target[..target.len().saturating_sub(1)]);
    (input, target.to_vec())
}
