//! Parameterized building blocks. Each block registers its parameters in a
//! [`ParamStore`] at construction and replays them onto a [`Tape`].

use ndarray::Array2;
use rand::Rng;

use super::params::{xavier_uniform, ParamId, ParamStore};
use super::tape::{AttnSpec, Tape, Tensor};

pub const LN_EPS: f64 = 1e-5;

/// `x·W + b` with `W: in × out`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, w: Array2<f64>) -> Self {
        let out = w.ncols();
        Self { w: store.add(format!("{name}.w"), w), b: store.add(format!("{name}.b"), Array2::zeros((1, out))) }
    }

    pub fn xavier<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, out: usize, rng: &mut R) -> Self {
        Self::new(store, name, xavier_uniform(rng, input, out))
    }

    pub fn forward(&self, tape: &mut Tape, x: Tensor) -> Tensor {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        let y = tape.matmul(x, w);
        tape.add_row(y, b)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Array2::ones((1, d))),
            beta: store.add(format!("{name}.beta"), Array2::zeros((1, d))),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Tensor) -> Tensor {
        let g = tape.param(self.gamma);
        let b = tape.param(self.beta);
        tape.layer_norm(x, g, b, LN_EPS)
    }
}

/// `Concat(head₁, …, head_h)·W_O` over learned projections of queries and
/// key/value sources.
#[derive(Clone, Debug)]
pub struct MultiHead {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl MultiHead {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut R) -> Self {
        assert!(heads > 0 && d.is_multiple_of(heads), "width {d} not divisible by {heads} heads");
        Self {
            q: Linear::xavier(store, &format!("{name}.q"), d, d, rng),
            k: Linear::xavier(store, &format!("{name}.k"), d, d, rng),
            v: Linear::xavier(store, &format!("{name}.v"), d, d, rng),
            o: Linear::xavier(store, &format!("{name}.o"), d, d, rng),
            heads,
        }
    }

    /// `spec.heads` is overridden by this block's head count.
    pub fn forward(&self, tape: &mut Tape, xq: Tensor, xkv: Tensor, mut spec: AttnSpec) -> Tensor {
        spec.heads = self.heads;
        let q = self.q.forward(tape, xq);
        let k = self.k.forward(tape, xkv);
        let v = self.v.forward(tape, xkv);
        let a = tape.attention(q, k, v, spec);
        self.o.forward(tape, a)
    }
}

/// `ReLU(x·W₁ + b₁)·W₂ + b₂`.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, d: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            up: Linear::xavier(store, &format!("{name}.up"), d, hidden, rng),
            down: Linear::xavier(store, &format!("{name}.down"), hidden, d, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Tensor) -> Tensor {
        let h = self.up.forward(tape, x);
        let h = tape.relu(h);
        self.down.forward(tape, h)
    }
}

/// Pre-norm self-attention block followed by a pre-norm feed-forward block.
#[derive(Clone, Debug)]
pub struct EncoderLayer {
    ln1: LayerNorm,
    attn: MultiHead,
    ln2: LayerNorm,
    ffn: FeedForward,
}

impl EncoderLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d: usize,
        heads: usize,
        ffn: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), d),
            attn: MultiHead::new(store, &format!("{name}.attn"), d, heads, rng),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), d),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), d, ffn, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Tensor, spec: &AttnSpec) -> Tensor {
        let h = self.ln1.forward(tape, x);
        let a = self.attn.forward(tape, h, h, spec.clone());
        let x = tape.add(x, a);
        let h = self.ln2.forward(tape, x);
        let f = self.ffn.forward(tape, h);
        tape.add(x, f)
    }
}

/// Pre-norm causal self-attention, cross-attention and feed-forward blocks.
#[derive(Clone, Debug)]
pub struct DecoderLayer {
    ln1: LayerNorm,
    self_attn: MultiHead,
    ln2: LayerNorm,
    cross: MultiHead,
    ln3: LayerNorm,
    ffn: FeedForward,
}

impl DecoderLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d: usize,
        heads: usize,
        ffn: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), d),
            self_attn: MultiHead::new(store, &format!("{name}.self"), d, heads, rng),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), d),
            cross: MultiHead::new(store, &format!("{name}.cross"), d, heads, rng),
            ln3: LayerNorm::new(store, &format!("{name}.ln3"), d),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), d, ffn, rng),
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        x: Tensor,
        memory: Tensor,
        self_spec: &AttnSpec,
        cross_spec: &AttnSpec,
    ) -> Tensor {
        let h = self.ln1.forward(tape, x);
        let a = self.self_attn.forward(tape, h, h, self_spec.clone());
        let x = tape.add(x, a);
        let h = self.ln2.forward(tape, x);
        let c = self.cross.forward(tape, h, memory, cross_spec.clone());
        let x = tape.add(x, c);
        let h = self.ln3.forward(tape, x);
        let f = self.ffn.forward(tape, h);
        tape.add(x, f)
    }
}
