//! Reverse-mode automatic differentiation over 2-D `f64` arrays.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters are
//! read from a borrowed [`ParamStore`] rather than copied; [`Tape::backward`]
//! returns gradients indexed by [`ParamId`].

#![allow(clippy::needless_range_loop)]

use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};

use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tensor(usize);

/// Layout of a batched attention call. Sequences are stacked along rows:
/// query block `b` is rows `b·tq..(b+1)·tq`, key block `b` is `b·tk..(b+1)·tk`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttnSpec {
    pub batch: usize,
    pub tq: usize,
    pub tk: usize,
    pub heads: usize,
    /// Query `i` may only see keys `j ≤ i`.
    pub causal: bool,
    /// `batch·tk` flags, `true` where the key may be attended to.
    pub key_mask: Option<Vec<bool>>,
}

impl AttnSpec {
    fn allowed(&self, b: usize, i: usize, j: usize) -> bool {
        (!self.causal || j <= i) && self.key_mask.as_ref().is_none_or(|m| m[b * self.tk + j])
    }
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Tensor, Tensor),
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    AddRow(Tensor, Tensor),
    Scale(Tensor, f64),
    Relu(Tensor),
    Sin(Tensor),
    Cos(Tensor),
    MaskMul(Tensor, Array2<f64>),
    LayerNorm { x: Tensor, gamma: Tensor, beta: Tensor, xhat: Array2<f64>, inv_std: Vec<f64> },
    Embedding { table: Tensor, ids: Vec<u32> },
    ConcatCols(Vec<Tensor>),
    Reshape(Tensor),
    Attention { q: Tensor, k: Tensor, v: Tensor, spec: AttnSpec, probs: Vec<f64> },
    CrossEntropy { logits: Tensor, targets: Vec<u32>, ignore: u32, probs: Array2<f64>, count: usize },
    RelL1 { pred: Tensor, target: Array2<f64>, dens: Vec<f64> },
    Frobenius { pred: Tensor, target: Array2<f64>, norms: Vec<f64> },
    Mse { pred: Tensor, target: Array2<f64> },
    Sum(Tensor),
    Mean(Tensor),
}

struct Node {
    value: Option<Array2<f64>>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every parameter it depends on.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.grads.get(id.index()).and_then(|g| g.as_ref())
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().flatten().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.grads.iter_mut().flatten().for_each(|g| g.mapv_inplace(|v| v * s));
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One head of scaled dot-product attention. `probs` receives the `tq × tk`
/// attention weights, exactly zero where `allowed` is false.
fn attend(
    q: ArrayView2<f64>,
    k: ArrayView2<f64>,
    v: ArrayView2<f64>,
    allowed: impl Fn(usize, usize) -> bool,
    mut out: ArrayViewMut2<f64>,
    probs: &mut [f64],
) {
    let (tq, tk, dk) = (q.nrows(), k.nrows(), q.ncols());
    let scale = 1.0 / (dk as f64).sqrt();
    let qrows: Vec<Vec<f64>> = q.rows().into_iter().map(|r| r.to_vec()).collect();
    let krows: Vec<Vec<f64>> = k.rows().into_iter().map(|r| r.to_vec()).collect();
    for i in 0..tq {
        let row = &mut probs[i * tk..(i + 1) * tk];
        let mut max = f64::NEG_INFINITY;
        for j in 0..tk {
            if allowed(i, j) {
                row[j] = dot(&qrows[i], &krows[j]) * scale;
                max = max.max(row[j]);
            }
        }
        let mut o = out.row_mut(i);
        o.fill(0.0);
        if max == f64::NEG_INFINITY {
            row.fill(0.0);
            continue;
        }
        let mut sum = 0.0;
        for j in 0..tk {
            if allowed(i, j) {
                row[j] = (row[j] - max).exp();
                sum += row[j];
            } else {
                row[j] = 0.0;
            }
        }
        for j in 0..tk {
            if allowed(i, j) {
                row[j] /= sum;
                o.scaled_add(row[j], &v.row(j));
            }
        }
    }
}

/// `softmax(QKᵀ/√d_k)V` for one sequence; `mask[i][j] = false` hides key `j`
/// from query `i`.
pub fn attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
    mask: Option<&Array2<bool>>,
) -> Result<Array2<f64>> {
    if q.ncols() != k.ncols() || k.nrows() != v.nrows() || q.ncols() == 0 {
        return Err(Error::Shape(format!("attention shapes Q {:?}, K {:?}, V {:?}", q.dim(), k.dim(), v.dim())));
    }
    if let Some(m) = mask {
        if m.dim() != (q.nrows(), k.nrows()) {
            return Err(Error::Shape(format!("mask {:?} for {}×{} logits", m.dim(), q.nrows(), k.nrows())));
        }
    }
    let mut out = Array2::zeros((q.nrows(), v.ncols()));
    let mut probs = vec![0.0; q.nrows() * k.nrows()];
    attend(q.view(), k.view(), v.view(), |i, j| mask.is_none_or(|m| m[[i, j]]), out.view_mut(), &mut probs);
    Ok(out)
}

/// `mask[i][j] = j ≤ i`.
pub fn causal_mask(t: usize) -> Array2<bool> {
    Array2::from_shape_fn((t, t), |(i, j)| j <= i)
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn value(&self, t: Tensor) -> &Array2<f64> {
        let node = &self.nodes[t.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("only parameter nodes omit their value"),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Tensor {
        self.nodes.push(Node { value: Some(value), op });
        Tensor(self.nodes.len() - 1)
    }

    fn same_shape(&self, a: Tensor, b: Tensor, what: &str) {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "{what}: shape mismatch");
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Tensor {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Tensor {
        self.nodes.push(Node { value: None, op: Op::Param(id) });
        Tensor(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Tensor {
        self.same_shape(a, b, "add");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Tensor {
        self.same_shape(a, b, "sub");
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        self.same_shape(a, b, "mul");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    /// Adds the `1 × d` row `row` to every row of `a`.
    pub fn add_row(&mut self, a: Tensor, row: Tensor) -> Tensor {
        let r = self.value(row);
        assert!(r.nrows() == 1 && r.ncols() == self.value(a).ncols(), "add_row: expected a 1×d row");
        let v = self.value(a) + r;
        self.push(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Tensor, s: f64) -> Tensor {
        let v = self.value(a) * s;
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn sin(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).mapv(f64::sin);
        self.push(v, Op::Sin(a))
    }

    pub fn cos(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).mapv(f64::cos);
        self.push(v, Op::Cos(a))
    }

    /// Multiplies by a constant array, e.g. a scaled dropout mask.
    pub fn mask_mul(&mut self, a: Tensor, mask: Array2<f64>) -> Tensor {
        let v = self.value(a) * &mask;
        self.push(v, Op::MaskMul(a, mask))
    }

    /// Row-wise normalization with learned `1 × d` gain and bias.
    pub fn layer_norm(&mut self, x: Tensor, gamma: Tensor, beta: Tensor, eps: f64) -> Tensor {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let v = &xhat * self.value(gamma) + self.value(beta);
        self.push(v, Op::LayerNorm { x, gamma, beta, xhat, inv_std })
    }

    /// Rows of `table` selected by `ids`.
    pub fn embedding(&mut self, table: Tensor, ids: &[u32]) -> Tensor {
        let t = self.value(table);
        let mut v = Array2::zeros((ids.len(), t.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            v.row_mut(r).assign(&t.row(id as usize));
        }
        self.push(v, Op::Embedding { table, ids: ids.to_vec() })
    }

    pub fn concat_cols(&mut self, parts: &[Tensor]) -> Tensor {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Tensor, rows: usize, cols: usize) -> Tensor {
        let v = self.value(a).as_standard_layout().into_owned();
        let v = v.into_shape_with_order((rows, cols)).expect("reshape: element count differs");
        self.push(v, Op::Reshape(a))
    }

    /// Multi-head attention core on already projected `q`, `k`, `v`; heads
    /// split the columns evenly.
    pub fn attention(&mut self, q: Tensor, k: Tensor, v: Tensor, spec: AttnSpec) -> Tensor {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.ncols();
        assert!(d % spec.heads == 0, "attention: width {d} not divisible by {} heads", spec.heads);
        assert_eq!(qv.nrows(), spec.batch * spec.tq, "attention: query rows");
        assert_eq!(kv.nrows(), spec.batch * spec.tk, "attention: key rows");
        assert!(kv.ncols() == d && vv.dim() == kv.dim(), "attention: projection widths");
        assert!(!spec.causal || spec.tq == spec.tk, "attention: causal masking needs square blocks");
        let dk = d / spec.heads;
        let block = spec.tq * spec.tk;
        let mut out = Array2::zeros((qv.nrows(), d));
        let mut probs = vec![0.0; spec.batch * spec.heads * block];
        for b in 0..spec.batch {
            let (rq, rk) = (b * spec.tq..(b + 1) * spec.tq, b * spec.tk..(b + 1) * spec.tk);
            for h in 0..spec.heads {
                let cols = h * dk..(h + 1) * dk;
                let off = (b * spec.heads + h) * block;
                attend(
                    qv.slice(s![rq.clone(), cols.clone()]),
                    kv.slice(s![rk.clone(), cols.clone()]),
                    vv.slice(s![rk.clone(), cols.clone()]),
                    |i, j| spec.allowed(b, i, j),
                    out.slice_mut(s![rq.clone(), cols]),
                    &mut probs[off..off + block],
                );
            }
        }
        self.push(out, Op::Attention { q, k, v, spec, probs })
    }

    /// Mean token cross-entropy over rows whose target is not `ignore`.
    pub fn cross_entropy(&mut self, logits: Tensor, targets: &[u32], ignore: u32) -> Tensor {
        let l = self.value(logits);
        assert_eq!(l.nrows(), targets.len(), "cross_entropy: one target per row");
        let mut probs = l.clone();
        let mut total = 0.0;
        let mut count = 0;
        for (mut row, &t) in probs.rows_mut().into_iter().zip(targets) {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
            if t != ignore {
                total -= row[t as usize].ln();
                count += 1;
            }
        }
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy { logits, targets: targets.to_vec(), ignore, probs, count },
        )
    }

    /// Mean over rows of `Σ|ŷ − y| / (Σ|y| + eps)`.
    pub fn rel_l1(&mut self, pred: Tensor, target: Array2<f64>, eps: f64) -> Tensor {
        let p = self.value(pred);
        assert_eq!(p.dim(), target.dim(), "rel_l1: shape mismatch");
        let dens: Vec<f64> = target.rows().into_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>() + eps).collect();
        let total: f64 = p
            .rows()
            .into_iter()
            .zip(target.rows())
            .zip(&dens)
            .map(|((pr, tr), den)| pr.iter().zip(tr).map(|(a, b)| (a - b).abs()).sum::<f64>() / den)
            .sum();
        let loss = total / p.nrows() as f64;
        self.push(Array2::from_elem((1, 1), loss), Op::RelL1 { pred, target, dens })
    }

    /// Mean over rows of `‖ŷ − y‖₂` (the Frobenius norm of each flattened matrix).
    pub fn frobenius(&mut self, pred: Tensor, target: Array2<f64>) -> Tensor {
        let p = self.value(pred);
        assert_eq!(p.dim(), target.dim(), "frobenius: shape mismatch");
        let norms: Vec<f64> = p
            .rows()
            .into_iter()
            .zip(target.rows())
            .map(|(pr, tr)| pr.iter().zip(tr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        let loss = norms.iter().sum::<f64>() / p.nrows() as f64;
        self.push(Array2::from_elem((1, 1), loss), Op::Frobenius { pred, target, norms })
    }

    /// Mean of `(ŷ − y)²` over all entries.
    pub fn mse(&mut self, pred: Tensor, target: Array2<f64>) -> Tensor {
        let p = self.value(pred);
        assert_eq!(p.dim(), target.dim(), "mse: shape mismatch");
        let loss = (p - &target).mapv(|d| d * d).mean().unwrap_or(0.0);
        self.push(Array2::from_elem((1, 1), loss), Op::Mse { pred, target })
    }

    pub fn sum(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).sum();
        self.push(Array2::from_elem((1, 1), v), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).mean().unwrap_or(0.0);
        self.push(Array2::from_elem((1, 1), v), Op::Mean(a))
    }

    /// Scalar value of a `1 × 1` tensor.
    pub fn scalar(&self, t: Tensor) -> f64 {
        let v = self.value(t);
        assert_eq!(v.dim(), (1, 1), "scalar: not a 1×1 tensor");
        v[[0, 0]]
    }

    /// Reverse pass from the `1 × 1` tensor `loss`.
    pub fn backward(&self, loss: Tensor) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut out = Gradients { grads: (0..self.params.len()).map(|_| None).collect() };
        assert_eq!(self.value(loss).dim(), (1, 1), "backward: loss must be 1×1");
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let mut acc = |t: Tensor, delta: Array2<f64>| match &mut grads[t.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(id) => match &mut out.grads[id.index()] {
                    Some(existing) => *existing += &g,
                    slot @ None => *slot = Some(g),
                },
                Op::MatMul(a, b) => {
                    acc(*a, g.dot(&self.value(*b).t()));
                    acc(*b, self.value(*a).t().dot(&g));
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, -g);
                }
                Op::Mul(a, b) => {
                    acc(*a, &g * self.value(*b));
                    acc(*b, &g * self.value(*a));
                }
                Op::AddRow(a, row) => {
                    acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, g);
                }
                Op::Scale(a, s) => acc(*a, g * *s),
                Op::Relu(a) => {
                    let mut d = g;
                    d.zip_mut_with(self.value(*a), |gv, &x| {
                        if x <= 0.0 {
                            *gv = 0.0
                        }
                    });
                    acc(*a, d);
                }
                Op::Sin(a) => acc(*a, g * self.value(*a).mapv(f64::cos)),
                Op::Cos(a) => acc(*a, g * self.value(*a).mapv(|x| -x.sin())),
                Op::MaskMul(a, mask) => acc(*a, g * mask),
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    acc(*beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * self.value(*gamma);
                    let d = xhat.ncols() as f64;
                    let mut dx = Array2::zeros(g.dim());
                    for r in 0..g.nrows() {
                        let (dh, xh) = (dxhat.row(r), xhat.row(r));
                        let s1 = dh.sum();
                        let s2 = dh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>();
                        let k = inv_std[r] / d;
                        for c in 0..g.ncols() {
                            dx[[r, c]] = k * (d * dh[c] - s1 - xh[c] * s2);
                        }
                    }
                    acc(*x, dx);
                }
                Op::Embedding { table, ids } => {
                    let mut d = Array2::zeros(self.value(*table).dim());
                    for (r, &id) in ids.iter().enumerate() {
                        let mut row = d.row_mut(id as usize);
                        row += &g.row(r);
                    }
                    acc(*table, d);
                }
                Op::ConcatCols(parts) => {
                    let mut c0 = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(p, g.slice(s![.., c0..c0 + w]).to_owned());
                        c0 += w;
                    }
                }
                Op::Reshape(a) => {
                    let dim = self.value(*a).dim();
                    acc(*a, g.into_shape_with_order(dim).expect("reshape: element count"));
                }
                Op::Attention { q, k, v, spec, probs } => {
                    let (dq, dk, dv) = self.attention_backward(*q, *k, *v, spec, probs, &g);
                    acc(*q, dq);
                    acc(*k, dk);
                    acc(*v, dv);
                }
                Op::CrossEntropy { logits, targets, ignore, probs, count } => {
                    let mut d = probs.clone();
                    let scale = if *count == 0 { 0.0 } else { g[[0, 0]] / *count as f64 };
                    for (r, &t) in targets.iter().enumerate() {
                        let mut row = d.row_mut(r);
                        if t == *ignore {
                            row.fill(0.0);
                        } else {
                            row[t as usize] -= 1.0;
                            row.mapv_inplace(|v| v * scale);
                        }
                    }
                    acc(*logits, d);
                }
                Op::RelL1 { pred, target, dens } => {
                    let p = self.value(*pred);
                    let rows = p.nrows() as f64;
                    let mut d = p - target;
                    for (mut row, den) in d.rows_mut().into_iter().zip(dens) {
                        row.mapv_inplace(|v| {
                            let s = if v > 0.0 {
                                1.0
                            } else if v < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            g[[0, 0]] * s / (den * rows)
                        });
                    }
                    acc(*pred, d);
                }
                Op::Frobenius { pred, target, norms } => {
                    let p = self.value(*pred);
                    let rows = p.nrows() as f64;
                    let mut d = p - target;
                    for (mut row, &nrm) in d.rows_mut().into_iter().zip(norms) {
                        let k = if nrm > 0.0 { g[[0, 0]] / (nrm * rows) } else { 0.0 };
                        row.mapv_inplace(|v| v * k);
                    }
                    acc(*pred, d);
                }
                Op::Mse { pred, target } => {
                    let p = self.value(*pred);
                    let k = 2.0 * g[[0, 0]] / p.len() as f64;
                    acc(*pred, (p - target) * k);
                }
                Op::Sum(a) => acc(*a, Array2::from_elem(self.value(*a).dim(), g[[0, 0]])),
                Op::Mean(a) => {
                    let dim = self.value(*a).dim();
                    acc(*a, Array2::from_elem(dim, g[[0, 0]] / (dim.0 * dim.1) as f64));
                }
            }
        }
        out
    }

    fn attention_backward(
        &self,
        q: Tensor,
        k: Tensor,
        v: Tensor,
        spec: &AttnSpec,
        probs: &[f64],
        g: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.ncols();
        let dkh = d / spec.heads;
        let scale = 1.0 / (dkh as f64).sqrt();
        let (mut dq, mut dk, mut dv) = (Array2::zeros(qv.dim()), Array2::zeros(kv.dim()), Array2::zeros(vv.dim()));
        let block = spec.tq * spec.tk;
        let mut dp = vec![0.0; spec.tk];
        for b in 0..spec.batch {
            for h in 0..spec.heads {
                let off = (b * spec.heads + h) * block;
                let c = h * dkh..(h + 1) * dkh;
                for i in 0..spec.tq {
                    let qi = b * spec.tq + i;
                    let p = &probs[off + i * spec.tk..off + (i + 1) * spec.tk];
                    let go = g.slice(s![qi, c.clone()]);
                    let mut weighted = 0.0;
                    for j in 0..spec.tk {
                        if p[j] == 0.0 {
                            dp[j] = 0.0;
                            continue;
                        }
                        let kj = b * spec.tk + j;
                        dp[j] = go.dot(&vv.slice(s![kj, c.clone()]));
                        weighted += p[j] * dp[j];
                        dv.slice_mut(s![kj, c.clone()]).scaled_add(p[j], &go);
                    }
                    for j in 0..spec.tk {
                        if p[j] == 0.0 {
                            continue;
                        }
                        let kj = b * spec.tk + j;
                        let ds = p[j] * (dp[j] - weighted) * scale;
                        dq.slice_mut(s![qi, c.clone()]).scaled_add(ds, &kv.slice(s![kj, c.clone()]));
                        dk.slice_mut(s![kj, c.clone()]).scaled_add(ds, &qv.slice(s![qi, c.clone()]));
                    }
                }
            }
        }
        (dq, dk, dv)
    }
}
