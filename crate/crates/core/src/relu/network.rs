//! Feed-forward ReLU networks with sparse (CSR) layers and the algebra used
//! to assemble them: composition, parallel stacking and depth padding.
//!
//! Composition merges the inner network's final affine map into the outer
//! network's first one, so `depth(f ∘ g) = depth(f) + depth(g)`, where depth
//! counts ReLU layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// One affine map `x ↦ σ(Wx + b)` with `W` stored in compressed rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseLayer {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl SparseLayer {
    /// Builds a layer from `(row, col, value)` triplets. Duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Self {
        assert_eq!(bias.len(), rows, "bias length must equal the row count");
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}×{cols}");
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(c as u32);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut layer = Self { rows, cols, row_ptr, col_idx, values, bias, activation };
        layer.drop_zeros();
        layer
    }

    /// Row-major dense constructor.
    pub fn from_dense(rows: usize, cols: usize, weights: &[f64], bias: Vec<f64>, activation: Activation) -> Self {
        assert_eq!(weights.len(), rows * cols);
        let t = weights.iter().enumerate().map(|(i, &v)| (i / cols, i % cols, v));
        Self::from_triplets(rows, cols, t, bias, activation)
    }

    pub(crate) fn from_raw_parts(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let ok = row_ptr.len() == rows + 1
            && row_ptr.first() == Some(&0)
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && row_ptr[rows] == values.len()
            && col_idx.len() == values.len()
            && bias.len() == rows
            && col_idx.iter().all(|&c| (c as usize) < cols);
        if !ok {
            return Err(Error::Corrupt("inconsistent sparse layer".into()));
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values, bias, activation })
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut row_ptr = vec![0; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.values.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != 0.0 {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = values.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn raw_parts(&self) -> (&[usize], &[u32], &[f64]) {
        (&self.row_ptr, &self.col_idx, &self.values)
    }

    /// `(col, value)` pairs of one row.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().map(|&c| c as usize).zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                d[r * self.cols + c] = v;
            }
        }
        d
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.rows);
        for r in 0..self.rows {
            let mut acc = self.bias[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            out.push(match self.activation {
                Activation::Relu => acc.max(0.0),
                Activation::Identity => acc,
            });
        }
    }

    /// `self ∘ inner` as affine maps, keeping `self`'s activation.
    fn after(&self, inner: &SparseLayer) -> SparseLayer {
        assert_eq!(self.cols, inner.rows, "composed layers must agree on the interface");
        let mut scratch = vec![0.0; inner.cols];
        let mut seen = vec![false; inner.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = vec![0; self.rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut bias = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut b = self.bias[r];
            for (k, w) in self.row_entries(r) {
                b += w * inner.bias[k];
                for (c, v) in inner.row_entries(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    scratch[c] += w * v;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if scratch[c] != 0.0 {
                    col_idx.push(c as u32);
                    values.push(scratch[c]);
                }
                scratch[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
            row_ptr[r + 1] = values.len();
            bias.push(b);
        }
        SparseLayer { rows: self.rows, cols: inner.cols, row_ptr, col_idx, values, bias, activation: self.activation }
    }

    /// Block-diagonal stacking of same-activation layers.
    fn block_diag(layers: &[&SparseLayer]) -> SparseLayer {
        let activation = layers[0].activation;
        assert!(layers.iter().all(|l| l.activation == activation), "mixed activations in one layer");
        let rows = layers.iter().map(|l| l.rows).sum();
        let cols = layers.iter().map(|l| l.cols).sum();
        let nnz = layers.iter().map(|l| l.nnz()).sum();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        let mut bias = Vec::with_capacity(rows);
        let mut col_off = 0u32;
        for l in layers {
            for r in 0..l.rows {
                for (c, v) in l.row_entries(r) {
                    col_idx.push(c as u32 + col_off);
                    values.push(v);
                }
                row_ptr.push(values.len());
            }
            bias.extend_from_slice(&l.bias);
            col_off += l.cols as u32;
        }
        SparseLayer { rows, cols, row_ptr, col_idx, values, bias, activation }
    }
}

/// A ReLU network: affine layers, every one but the last followed by ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork {
    input_dim: usize,
    layers: Vec<SparseLayer>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<SparseLayer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::Shape("network needs at least one layer".into()))?;
        let input_dim = first.cols;
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].rows != w[1].cols {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    w[0].rows,
                    i + 1,
                    w[1].cols
                )));
            }
        }
        let (last, hidden) = layers.split_last().expect("non-empty");
        if last.activation != Activation::Identity || hidden.iter().any(|l| l.activation != Activation::Relu) {
            return Err(Error::Shape("hidden layers must be ReLU and the output layer identity".into()));
        }
        Ok(Self { input_dim, layers })
    }

    /// A single affine layer `x ↦ Wx + b` (depth 0).
    pub fn affine(layer: SparseLayer) -> Self {
        assert_eq!(layer.activation, Activation::Identity);
        Self { input_dim: layer.cols, layers: vec![layer] }
    }

    /// `x ↦ Wx` from dense row-major weights.
    pub fn linear(rows: usize, cols: usize, weights: &[f64]) -> Self {
        Self::affine(SparseLayer::from_dense(rows, cols, weights, vec![0.0; rows], Activation::Identity))
    }

    /// Exact identity on `dim` values realized with `depth` ReLU layers via
    /// `x = ReLU(x) − ReLU(−x)`.
    pub fn identity(dim: usize, depth: usize) -> Self {
        let eye = |rows, sign: f64| (0..dim).map(move |i| (i + rows, i, sign));
        if depth == 0 {
            return Self::affine(SparseLayer::from_triplets(
                dim,
                dim,
                eye(0, 1.0),
                vec![0.0; dim],
                Activation::Identity,
            ));
        }
        let mut layers = vec![SparseLayer::from_triplets(
            2 * dim,
            dim,
            eye(0, 1.0).chain(eye(dim, -1.0)),
            vec![0.0; 2 * dim],
            Activation::Relu,
        )];
        for _ in 1..depth {
            layers.push(SparseLayer::from_triplets(
                2 * dim,
                2 * dim,
                (0..2 * dim).map(|i| (i, i, 1.0)),
                vec![0.0; 2 * dim],
                Activation::Relu,
            ));
        }
        layers.push(SparseLayer::from_triplets(
            dim,
            2 * dim,
            (0..dim).map(|i| (i, i, 1.0)).chain((0..dim).map(|i| (i, i + dim, -1.0))),
            vec![0.0; dim],
            Activation::Identity,
        ));
        Self { input_dim: dim, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").rows
    }

    pub fn layers(&self) -> &[SparseLayer] {
        &self.layers
    }

    /// Number of ReLU layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Largest layer output dimension.
    pub fn width(&self) -> usize {
        self.layers.iter().map(|l| l.rows).max().unwrap_or(0)
    }

    /// Stored weights plus biases.
    pub fn weight_count(&self) -> u64 {
        self.layers.iter().map(|l| (l.nnz() + l.rows) as u64).sum()
    }

    /// Exact layer-by-layer evaluation.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cur = self.check_input(x)?;
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.apply(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Which ReLU units are active (pre-activation `> 0`) at `x`, per hidden layer.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Vec<Vec<bool>>> {
        let mut pattern = Vec::with_capacity(self.depth());
        let mut cur = self.check_input(x)?;
        let mut next = Vec::new();
        for layer in &self.layers[..self.depth()] {
            layer.apply(&cur, &mut next);
            pattern.push(next.iter().map(|&v| v > 0.0).collect());
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(pattern)
    }

    /// Evaluates the affine map obtained by freezing every ReLU to `pattern`.
    /// Agrees with [`forward`](Self::forward) wherever `x` has that pattern.
    pub fn forward_with_pattern(&self, x: &[f64], pattern: &[Vec<bool>]) -> Result<Vec<f64>> {
        if pattern.len() != self.depth() {
            return Err(Error::Shape("pattern must cover every hidden layer".into()));
        }
        let mut cur = self.check_input(x)?;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.rows);
            for r in 0..layer.rows {
                let v = layer.bias[r] + layer.row_entries(r).map(|(c, w)| w * cur[c]).sum::<f64>();
                next.push(if i < pattern.len() && !pattern[i][r] { 0.0 } else { v });
            }
            cur = next;
        }
        Ok(cur)
    }

    fn check_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, actual: x.len() });
        }
        Ok(x.to_vec())
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &ReluNetwork, inner: &ReluNetwork) -> Result<ReluNetwork> {
        if outer.input_dim != inner.output_dim() {
            return Err(Error::DimensionMismatch { expected: outer.input_dim, actual: inner.output_dim() });
        }
        let (inner_last, inner_hidden) = inner.layers.split_last().expect("non-empty");
        let mut layers: Vec<SparseLayer> = inner_hidden.to_vec();
        layers.push(outer.layers[0].after(inner_last));
        layers.extend_from_slice(&outer.layers[1..]);
        Ok(ReluNetwork { input_dim: inner.input_dim, layers })
    }

    /// Extends the network with identity layers to exactly `depth` ReLU layers.
    pub fn padded_to(&self, depth: usize) -> ReluNetwork {
        assert!(depth >= self.depth(), "cannot pad a network to a smaller depth");
        if depth == self.depth() {
            return self.clone();
        }
        Self::compose(&Self::identity(self.output_dim(), depth - self.depth()), self)
            .expect("identity matches output dimension")
    }

    /// Block-diagonal combination: inputs and outputs are concatenated.
    /// Shallower networks are padded with identity layers first.
    pub fn parallel(nets: &[ReluNetwork]) -> ReluNetwork {
        assert!(!nets.is_empty());
        let depth = nets.iter().map(|n| n.depth()).max().expect("non-empty");
        let padded: Vec<ReluNetwork> = nets.iter().map(|n| n.padded_to(depth)).collect();
        let layers = (0..=depth)
            .map(|i| SparseLayer::block_diag(&padded.iter().map(|n| &n.layers[i]).collect::<Vec<_>>()))
            .collect();
        ReluNetwork { input_dim: padded.iter().map(|n| n.input_dim).sum(), layers }
    }

    /// Runs every network on the same input and concatenates the outputs.
    pub fn fan_out(nets: &[ReluNetwork]) -> Result<ReluNetwork> {
        let dim = nets[0].input_dim;
        if let Some(bad) = nets.iter().find(|n| n.input_dim != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.input_dim });
        }
        let copies = nets.len();
        let dup = SparseLayer::from_triplets(
            dim * copies,
            dim,
            (0..copies).flat_map(|c| (0..dim).map(move |i| (c * dim + i, i, 1.0))),
            vec![0.0; dim * copies],
            Activation::Identity,
        );
        Self::compose(&Self::parallel(nets), &Self::affine(dup))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu_layer(rows: usize, cols: usize, w: &[f64], b: &[f64]) -> SparseLayer {
        SparseLayer::from_dense(rows, cols, w, b.to_vec(), Activation::Relu)
    }

    #[test]
    fn identity_layer_passes_through() {
        let net = ReluNetwork::linear(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(net.forward(&[-1.5, 2.0]).unwrap(), vec![-1.5, 2.0]);
        assert_eq!(net.depth(), 0);
    }

    #[test]
    fn relu_layer_clips_negatives() {
        let net = ReluNetwork::new(vec![
            relu_layer(2, 2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]),
            SparseLayer::from_dense(2, 2, &[1.0, 0.0, 0.0, 1.0], vec![0.0; 2], Activation::Identity),
        ])
        .unwrap();
        assert_eq!(net.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn two_layer_matches_hand_unrolled() {
        let w1 = [0.5, -1.25, 2.0, 0.75, -0.3, 1.1];
        let b1 = [0.1, -0.2, 0.05];
        let w2 = [1.5, -2.0, 0.25];
        let b2 = [0.3];
        let net = ReluNetwork::new(vec![
            relu_layer(3, 2, &w1, &b1),
            SparseLayer::from_dense(1, 3, &w2, b2.to_vec(), Activation::Identity),
        ])
        .unwrap();
        for x in [[0.3, -0.7], [1.0, 2.0], [-2.0, 0.4]] {
            let mut h = [0.0; 3];
            for r in 0..3 {
                let mut acc = b1[r];
                acc += w1[r * 2] * x[0];
                acc += w1[r * 2 + 1] * x[1];
                h[r] = acc.max(0.0);
            }
            let mut y = b2[0];
            for r in 0..3 {
                y += w2[r] * h[r];
            }
            assert_eq!(net.forward(&x).unwrap(), vec![y]);
        }
    }

    #[test]
    fn deep_identity_is_exact() {
        for depth in 0..4 {
            let net = ReluNetwork::identity(3, depth);
            assert_eq!(net.depth(), depth);
            assert_eq!(net.forward(&[-2.5, 0.0, 7.25]).unwrap(), vec![-2.5, 0.0, 7.25]);
        }
    }

    #[test]
    fn composition_adds_depths() {
        let abs = ReluNetwork::new(vec![
            relu_layer(2, 1, &[1.0, -1.0], &[0.0, 0.0]),
            SparseLayer::from_dense(1, 2, &[1.0, 1.0], vec![0.0], Activation::Identity),
        ])
        .unwrap();
        let shift = ReluNetwork::affine(SparseLayer::from_dense(1, 1, &[2.0], vec![-1.0], Activation::Identity));
        let f = ReluNetwork::compose(&abs, &shift).unwrap();
        assert_eq!(f.depth(), 1);
        assert_eq!(f.forward(&[0.0]).unwrap(), vec![1.0]);
        assert_eq!(f.forward(&[2.0]).unwrap(), vec![3.0]);
        let g = ReluNetwork::compose(&abs, &abs).unwrap();
        assert_eq!(g.depth(), 2);
        assert_eq!(g.forward(&[-4.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn parallel_and_fan_out() {
        let abs = ReluNetwork::new(vec![
            relu_layer(2, 1, &[1.0, -1.0], &[0.0, 0.0]),
            SparseLayer::from_dense(1, 2, &[1.0, 1.0], vec![0.0], Activation::Identity),
        ])
        .unwrap();
        let neg = ReluNetwork::linear(1, 1, &[-1.0]);
        let p = ReluNetwork::parallel(&[abs.clone(), neg.clone()]);
        assert_eq!(p.depth(), 1);
        assert_eq!(p.forward(&[-3.0, 5.0]).unwrap(), vec![3.0, -5.0]);
        let f = ReluNetwork::fan_out(&[abs, neg]).unwrap();
        assert_eq!(f.input_dim(), 1);
        assert_eq!(f.forward(&[-3.0]).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn shape_errors() {
        let bad = ReluNetwork::new(vec![
            relu_layer(2, 1, &[1.0, 1.0], &[0.0, 0.0]),
            SparseLayer::from_dense(1, 3, &[1.0; 3], vec![0.0], Activation::Identity),
        ]);
        assert!(bad.is_err());
        let relu_out = ReluNetwork::new(vec![relu_layer(1, 1, &[1.0], &[0.0])]);
        assert!(relu_out.is_err());
        let net = ReluNetwork::identity(2, 1);
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let l =
            SparseLayer::from_triplets(1, 2, [(0, 0, 1.0), (0, 0, 2.0), (0, 1, 0.0)], vec![0.0], Activation::Identity);
        assert_eq!(l.nnz(), 1);
        assert_eq!(l.to_dense(), vec![3.0, 0.0]);
    }
}
