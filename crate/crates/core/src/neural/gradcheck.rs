//! Central finite-difference checks of tape gradients.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::layers::{MultiHead, LN_EPS};
use super::models::{
    teacher_forcing, FourierConfig, FourierEncoder, Mlp, MlpConfig, Regressor, Seq2Seq, TransformerConfig,
};
use super::params::{normal, ParamStore};
use super::tape::{AttnSpec, Tape, Tensor};
use super::train::LossKind;
use crate::numcodec::{Scheme, PAD};
use crate::rng::stream_rng;

/// Worst relative error over all parameters, each compared as a whole:
/// `‖g − ĝ‖ / max(‖g‖, ‖ĝ‖, 0.01·‖G‖, floor)` with `G` the analytic gradient
/// over every checked entry, so parameters whose true gradient vanishes are
/// judged on the scale of the whole gradient rather than on roundoff.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub checked_entries: usize,
    /// Entries whose one-sided differences disagree, i.e. where a ReLU or
    /// absolute-value kink lies within `h`; they are excluded.
    pub kink_entries: usize,
}

/// Relative errors below this denominator are measured absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// Fraction of the whole-gradient norm used as a per-parameter floor.
pub const GLOBAL_FLOOR: f64 = 1e-2;

/// At a kink the analytic slope matches one one-sided difference; on a
/// smooth stretch it sits midway between them.
const KINK_SIDE_FRACTION: f64 = 0.1;

/// Compares analytic gradients of the scalar built by `loss` against
/// `(f(θ + h) − f(θ − h)) / 2h`, perturbing at most `max_entries` evenly
/// spaced entries per parameter.
pub fn check_gradients<F>(params: &mut ParamStore, loss: F, h: f64, max_entries: usize) -> GradCheck
where
    F: Fn(&mut Tape) -> Tensor,
{
    let grads = {
        let mut tape = Tape::new(params);
        let l = loss(&mut tape);
        tape.backward(l)
    };
    let eval = |p: &ParamStore| {
        let mut tape = Tape::new(p);
        let l = loss(&mut tape);
        tape.scalar(l)
    };
    let base = eval(params);
    let mut report = GradCheck { max_rel_error: 0.0, worst_param: String::new(), checked_entries: 0, kink_entries: 0 };
    let mut sums = Vec::new();
    for id in params.ids().collect::<Vec<_>>() {
        let len = params.get(id).len();
        let stride = len.div_ceil(max_entries.max(1)).max(1);
        let (mut diff, mut an, mut num) = (0.0, 0.0, 0.0);
        let cols = params.get(id).ncols();
        for e in (0..len).step_by(stride) {
            let at = [e / cols, e % cols];
            let original = params.get(id)[at];
            params.get_mut(id)[at] = original + h;
            let up = eval(params);
            params.get_mut(id)[at] = original - h;
            let down = eval(params);
            params.get_mut(id)[at] = original;
            let a = grads.get(id).map_or(0.0, |g| g[at]);
            let (fwd, bwd) = ((up - base) / h, (base - down) / h);
            let gap = (fwd - bwd).abs();
            if gap > 1e-9 && (a - fwd).abs().min((a - bwd).abs()) < KINK_SIDE_FRACTION * gap {
                report.kink_entries += 1;
                continue;
            }
            let fd = (up - down) / (2.0 * h);
            diff += (a - fd) * (a - fd);
            an += a * a;
            num += fd * fd;
            report.checked_entries += 1;
        }
        sums.push((id, diff, an, num));
    }
    let global = sums.iter().map(|s| s.2).sum::<f64>().sqrt();
    for (id, diff, an, num) in sums {
        let rel = diff.sqrt() / an.sqrt().max(num.sqrt()).max(GLOBAL_FLOOR * global).max(REL_FLOOR);
        if report.worst_param.is_empty() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = params.name(id).to_string();
        }
    }
    report
}

/// Largest relative error of one check over several random configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseResult {
    pub name: &'static str,
    pub configs: usize,
    pub max_rel_error: f64,
    pub checked_entries: usize,
    pub kink_entries: usize,
}

type LossFn = Box<dyn Fn(&mut Tape) -> Tensor>;

const H: f64 = 1e-5;

fn run_case(
    name: &'static str,
    configs: usize,
    seed: u64,
    entries: usize,
    build: impl Fn(&mut ChaCha20Rng) -> (ParamStore, LossFn),
) -> CaseResult {
    let mut out = CaseResult { name, configs, max_rel_error: 0.0, checked_entries: 0, kink_entries: 0 };
    for c in 0..configs {
        let mut rng = stream_rng(seed, &format!("gradcheck/{name}"), c as u64);
        let (mut store, loss) = build(&mut rng);
        let r = check_gradients(&mut store, loss, H, entries);
        out.max_rel_error = out.max_rel_error.max(r.max_rel_error);
        out.checked_entries += r.checked_entries;
        out.kink_entries += r.kink_entries;
    }
    out
}

fn randn(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Array2<f64> {
    normal(rng, rows, cols, 1.0)
}

/// `Σ out ⊙ R` for a fixed random `R`.
fn readout(tape: &mut Tape, t: Tensor, r: &Array2<f64>) -> Tensor {
    let c = tape.constant(r.clone());
    let m = tape.mul(t, c);
    tape.sum(m)
}

macro_rules! unary {
    ($name:literal, $op:ident, $configs:expr, $seed:expr, $fix:expr) => {
        run_case($name, $configs, $seed, usize::MAX, |rng| {
            let (r, c) = (rng.random_range(1..5), rng.random_range(1..6));
            let mut s = ParamStore::default();
            let a = s.add("a", randn(rng, r, c).mapv($fix));
            let w = randn(rng, r, c);
            let f: LossFn = Box::new(move |t| {
                let x = t.param(a);
                let y = t.$op(x);
                readout(t, y, &w)
            });
            (s, f)
        })
    };
}

macro_rules! binary {
    ($name:literal, $op:ident, $configs:expr, $seed:expr) => {
        run_case($name, $configs, $seed, usize::MAX, |rng| {
            let (r, c) = (rng.random_range(1..5), rng.random_range(1..6));
            let mut s = ParamStore::default();
            let a = s.add("a", randn(rng, r, c));
            let b = s.add("b", randn(rng, r, c));
            let w = randn(rng, r, c);
            let f: LossFn = Box::new(move |t| {
                let (x, y) = (t.param(a), t.param(b));
                let z = t.$op(x, y);
                readout(t, z, &w)
            });
            (s, f)
        })
    };
}

/// Every differentiable tape primitive on `configs` random shapes each.
pub fn primitive_suite(configs: usize, seed: u64) -> Vec<CaseResult> {
    let away_from_kink = |v: f64| v + 0.05 * v.signum();
    let mut out = vec![
        binary!("add", add, configs, seed),
        binary!("sub", sub, configs, seed),
        binary!("mul", mul, configs, seed),
        unary!("relu", relu, configs, seed, away_from_kink),
        unary!("sin", sin, configs, seed, |v| v),
        unary!("cos", cos, configs, seed, |v| v),
    ];
    out.push(run_case("matmul", configs, seed, usize::MAX, |rng| {
        let (r, k, c) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
        let mut s = ParamStore::default();
        let a = s.add("a", randn(rng, r, k));
        let b = s.add("b", randn(rng, k, c));
        let w = randn(rng, r, c);
        let f: LossFn = Box::new(move |t| {
            let (x, y) = (t.param(a), t.param(b));
            let z = t.matmul(x, y);
            readout(t, z, &w)
        });
        (s, f)
    }));
    out.push(run_case("add_row", configs, seed, usize::MAX, |rng| {
        let (r, c) = (rng.random_range(1..5), rng.random_range(1..6));
        let mut s = ParamStore::default();
        let a = s.add("a", randn(rng, r, c));
        let b = s.add("row", randn(rng, 1, c));
        let w = randn(rng, r, c);
        let f: LossFn = Box::new(move |t| {
            let (x, y) = (t.param(a), t.param(b));
            let z = t.add_row(x, y);
            readout(t, z, &w)
        });
        (s, f)
    }));
    out.push(run_case("scale_mask_reshape", configs, seed, usize::MAX, |rng| {
        let (r, c) = (rng.random_range(1..5), rng.random_range(1..6));
        let k: f64 = rng.random_range(-3.0..3.0);
        let mut s = ParamStore::default();
        let a = s.add("a", randn(rng, r, c));
        let mask = randn(rng, r, c);
        let w = randn(rng, 1, r * c);
        let f: LossFn = Box::new(move |t| {
            let x = t.param(a);
            let y = t.scale(x, k);
            let y = t.mask_mul(y, mask.clone());
            let y = t.reshape(y, 1, r * c);
            readout(t, y, &w)
        });
        (s, f)
    }));
    out.push(run_case("layer_norm", configs, seed, usize::MAX, |rng| {
        let (r, c) = (rng.random_range(1..5), rng.random_range(2..7));
        let mut s = ParamStore::default();
        let a = s.add("x", randn(rng, r, c));
        let g = s.add("gamma", randn(rng, 1, c));
        let b = s.add("beta", randn(rng, 1, c));
        let w = randn(rng, r, c);
        let f: LossFn = Box::new(move |t| {
            let (x, gg, bb) = (t.param(a), t.param(g), t.param(b));
            let y = t.layer_norm(x, gg, bb, LN_EPS);
            readout(t, y, &w)
        });
        (s, f)
    }));
    out.push(run_case("embedding_concat", configs, seed, usize::MAX, |rng| {
        let (v, d, n) = (rng.random_range(2..7), rng.random_range(1..5), rng.random_range(1..8));
        let ids: Vec<u32> = (0..n).map(|_| rng.random_range(0..v as u32)).collect();
        let mut s = ParamStore::default();
        let table = s.add("table", randn(rng, v, d));
        let extra = s.add("extra", randn(rng, n, 2));
        let w = randn(rng, n, d + 2);
        let f: LossFn = Box::new(move |t| {
            let tb = t.param(table);
            let e = t.embedding(tb, &ids);
            let x = t.param(extra);
            let y = t.concat_cols(&[e, x]);
            readout(t, y, &w)
        });
        (s, f)
    }));
    for (name, causal, masked) in
        [("attention", false, false), ("attention_causal", true, false), ("attention_key_mask", false, true)]
    {
        out.push(run_case(name, configs, seed, usize::MAX, |rng| {
            let batch = rng.random_range(1..3);
            let heads = rng.random_range(1..3);
            let d = heads * rng.random_range(1..4);
            let tq = rng.random_range(1..5);
            let tk = if causal { tq } else { rng.random_range(1..5) };
            let key_mask =
                masked.then(|| (0..batch * tk).map(|i| i % tk == 0 || rng.random_bool(0.6)).collect::<Vec<bool>>());
            let spec = AttnSpec { batch, tq, tk, heads, causal, key_mask };
            let mut s = ParamStore::default();
            let q = s.add("q", randn(rng, batch * tq, d));
            let k = s.add("k", randn(rng, batch * tk, d));
            let v = s.add("v", randn(rng, batch * tk, d));
            let w = randn(rng, batch * tq, d);
            let f: LossFn = Box::new(move |t| {
                let (qq, kk, vv) = (t.param(q), t.param(k), t.param(v));
                let y = t.attention(qq, kk, vv, spec.clone());
                readout(t, y, &w)
            });
            (s, f)
        }));
    }
    out.push(run_case("multi_head", configs, seed, usize::MAX, |rng| {
        let heads = rng.random_range(1..3);
        let d = heads * rng.random_range(1..3);
        let (tq, tk) = (rng.random_range(1..4), rng.random_range(1..4));
        let mut s = ParamStore::default();
        let mh = MultiHead::new(&mut s, "mh", d, heads, rng);
        for id in [mh.q.b, mh.k.b, mh.v.b, mh.o.b] {
            *s.get_mut(id) = randn(rng, 1, d);
        }
        let xq = randn(rng, tq, d);
        let xkv = randn(rng, tk, d);
        let w = randn(rng, tq, d);
        let spec = AttnSpec { batch: 1, tq, tk, heads, causal: false, key_mask: None };
        let f: LossFn = Box::new(move |t| {
            let (a, b) = (t.constant(xq.clone()), t.constant(xkv.clone()));
            let y = mh.forward(t, a, b, spec.clone());
            readout(t, y, &w)
        });
        (s, f)
    }));
    out.push(run_case("cross_entropy", configs, seed, usize::MAX, |rng| {
        let (n, v) = (rng.random_range(1..6), rng.random_range(2..7));
        let mut targets: Vec<u32> = (0..n).map(|_| rng.random_range(0..v as u32)).collect();
        targets[0] = 1;
        let mut s = ParamStore::default();
        let l = s.add("logits", randn(rng, n, v));
        let f: LossFn = Box::new(move |t| {
            let x = t.param(l);
            t.cross_entropy(x, &targets, 0)
        });
        (s, f)
    }));
    for kind in [LossKind::RelL1, LossKind::Frobenius, LossKind::Mse] {
        let name = match kind {
            LossKind::RelL1 => "rel_l1",
            LossKind::Frobenius => "frobenius",
            _ => "mse",
        };
        out.push(run_case(name, configs, seed, usize::MAX, |rng| {
            let (r, c) = (rng.random_range(1..5), rng.random_range(1..6));
            let mut s = ParamStore::default();
            let p = s.add("pred", randn(rng, r, c));
            let y = randn(rng, r, c);
            let f: LossFn = Box::new(move |t| {
                let x = t.param(p);
                kind.apply(t, x, y.clone())
            });
            (s, f)
        }));
    }
    out.push(run_case("sum_mean", configs, seed, usize::MAX, |rng| {
        let (r, c) = (rng.random_range(1..5), rng.random_range(1..6));
        let mut s = ParamStore::default();
        let a = s.add("a", randn(rng, r, c));
        let b = s.add("b", randn(rng, r, c));
        let f: LossFn = Box::new(move |t| {
            let (x, y) = (t.param(a), t.param(b));
            let sx = t.sum(x);
            let my = t.mean(y);
            let p = t.mul(sx, my);
            t.add(p, sx)
        });
        (s, f)
    }));
    out
}

/// Entries perturbed per parameter array in the model checks.
const MODEL_ENTRIES: usize = 4;

fn regression_case<M: Regressor + 'static>(
    name: &'static str,
    configs: usize,
    seed: u64,
    make: impl Fn(usize, u64) -> M,
) -> CaseResult {
    run_case(name, configs, seed, MODEL_ENTRIES, |rng| {
        let n = rng.random_range(1..4);
        let batch = rng.random_range(1..4);
        let model = make(n, rng.random());
        let store = model.params().clone();
        let x = randn(rng, batch, n * n);
        let y = randn(rng, batch, n * n);
        let kind = [LossKind::RelL1, LossKind::Frobenius, LossKind::Mse][rng.random_range(0..3)];
        let f: LossFn = Box::new(move |t| {
            let p = model.forward(t, &x, None);
            kind.apply(t, p, y.clone())
        });
        (store, f)
    })
}

/// The assembled models with dropout off: mlp3, mlp7, fourier-enc and the
/// desk encoder-decoder.
pub fn model_suite(configs: usize, seed: u64) -> Vec<CaseResult> {
    let mut out = vec![
        regression_case("mlp3", configs, seed, |n, s| Mlp::new(MlpConfig::shallow(n), s).expect("valid config")),
        regression_case("mlp7", configs, seed, |n, s| Mlp::new(MlpConfig::deep(n), s).expect("valid config")),
        regression_case("fourier-enc", configs, seed, |n, s| {
            FourierEncoder::new(FourierConfig::desk(n), s).expect("valid config")
        }),
    ];
    out.push(run_case("encdec-desk", configs, seed, MODEL_ENTRIES, |rng| {
        let scheme = Scheme::ALL[rng.random_range(0..3)];
        let cfg = TransformerConfig::desk(scheme.vocab_size(), 10);
        let model = Seq2Seq::new(cfg, rng.random()).expect("valid config");
        let store = model.params.clone();
        let batch = rng.random_range(1..3);
        let vocab = scheme.vocab_size() as u32;
        let mut seq = |lo: usize| -> Vec<u32> {
            let len = rng.random_range(lo..8);
            (0..len).map(|_| rng.random_range(3..vocab)).collect()
        };
        let src: Vec<Vec<u32>> = (0..batch).map(|_| seq(1)).collect();
        let tgt: Vec<Vec<u32>> = (0..batch).map(|_| seq(1)).collect();
        let (dec_in, labels): (Vec<_>, Vec<_>) = tgt.iter().map(|t| teacher_forcing(t)).unzip();
        let t_len = labels.iter().map(Vec::len).max().unwrap_or(0);
        let flat: Vec<u32> =
            labels.iter().flat_map(|l| l.iter().copied().chain(std::iter::repeat_n(PAD, t_len - l.len()))).collect();
        let f: LossFn = Box::new(move |t| {
            let logits = model.forward(t, &src, &dec_in).expect("valid batch");
            t.cross_entropy(logits, &flat, PAD)
        });
        (store, f)
    }));
    out
}
