//! Explicit ReLU approximations: sawtooth squarer, products, matrix powers
//! and the truncated-Taylor matrix exponential.

use serde::{Deserialize, Serialize};

use super::network::{Activation, ReluNetwork, SparseLayer};
use crate::error::{Error, Result};

/// Default cap on stored weights plus biases for a single build.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

fn check_tolerance(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance {delta} outside (0, 1)")))
    }
}

fn check_bound(m: f64) -> Result<()> {
    if m.is_finite() && m >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("range bound {m} must be finite and ≥ 1")))
    }
}

/// Number of sawtooth levels so that `B²·4^{-(m+1)} ≤ delta`.
pub fn squarer_levels(delta: f64, bound: f64) -> usize {
    let mut m = 0;
    while bound * bound * 0.25f64.powi(m as i32 + 1) > delta {
        m += 1;
    }
    m
}

/// Approximates `z²` on `[-bound, bound]` with `levels` sawtooth levels.
///
/// With `t = |z|/B`, the output is `B²·(t − Σ_{s≤m} g_s(t)/4^s)` where `g_s`
/// is the `s`-fold hat function. The error lies in `[0, B²·4^{-(m+1)}]`,
/// and both `z = 0` and `|z| = B` are reproduced exactly.
pub(crate) fn squarer(bound: f64, levels: usize) -> ReluNetwork {
    let b2 = bound * bound;
    // Units of hat layer s: 0..3 hat pieces of g_{s-1}, 3 carries t, 4 carries acc_{s-1}.
    let mut layers = vec![SparseLayer::from_triplets(
        2,
        1,
        [(0, 0, 1.0 / bound), (1, 0, -1.0 / bound)],
        vec![0.0; 2],
        Activation::Relu,
    )];
    // Linear form of g_{s-1} over the previous layer's units.
    let hat = |prev_is_input: bool| -> Vec<(usize, f64)> {
        if prev_is_input {
            vec![(0, 1.0), (1, 1.0)]
        } else {
            vec![(0, 2.0), (1, -4.0), (2, 2.0)]
        }
    };
    for s in 1..=levels {
        let g = hat(s == 1);
        let with_acc = s >= 2;
        let rows = if with_acc { 5 } else { 4 };
        let cols = if s == 1 { 2 } else { layers.last().expect("layer").rows() };
        let mut t = Vec::new();
        for unit in 0..3 {
            t.extend(g.iter().map(|&(c, w)| (unit, c, w)));
        }
        // Carry of t.
        if s == 1 {
            t.extend([(3, 0, 1.0), (3, 1, 1.0)]);
        } else {
            t.push((3, 3, 1.0));
        }
        if with_acc {
            let scale = 0.25f64.powi(s as i32 - 1);
            t.extend(g.iter().map(|&(c, w)| (4, c, w * scale)));
            if cols == 5 {
                t.push((4, 4, 1.0));
            }
        }
        let mut bias = vec![0.0, -0.5, -1.0, 0.0];
        if with_acc {
            bias.push(0.0);
        }
        layers.push(SparseLayer::from_triplets(rows, cols, t, bias, Activation::Relu));
    }
    // Output: B²·(t − acc_{m−1} − g_m/4^m).
    let last_rows = layers.last().expect("layer").rows();
    let out: Vec<(usize, usize, f64)> = if levels == 0 {
        vec![(0, 0, b2), (0, 1, b2)]
    } else {
        let scale = 0.25f64.powi(levels as i32);
        let mut o: Vec<(usize, usize, f64)> = hat(false).iter().map(|&(c, w)| (0, c, -b2 * w * scale)).collect();
        o.push((0, 3, b2));
        if last_rows == 5 {
            o.push((0, 4, -b2));
        }
        o
    };
    layers.push(SparseLayer::from_triplets(1, last_rows, out, vec![0.0], Activation::Identity));
    ReluNetwork::new(layers).expect("squarer layers compose")
}

/// ReLU network with `sup_{|x|≤M} |net(x) − x²| ≤ delta`.
pub fn build_square_net(delta: f64, m: f64) -> Result<ReluNetwork> {
    check_tolerance(delta)?;
    check_bound(m)?;
    Ok(squarer(m, squarer_levels(delta, m)))
}

/// Levels for the binary product: each squarer runs on `[-2, 2]` and the
/// three errors combine to at most `1.5·M1·M2·4^{-m}`.
fn product_levels(delta: f64, m1: f64, m2: f64) -> usize {
    let target = 1.5 * m1 * m2 / delta;
    let mut m = 1;
    while 4f64.powi(m as i32) < target {
        m += 1;
    }
    m
}

/// ReLU network with `sup |net(x, y) − xy| ≤ delta` on `[-M1, M1]×[-M2, M2]`,
/// via `xy = M1·M2·((u+v)² − u² − v²)/2` with `u = x/M1`, `v = y/M2`.
pub fn build_binary_product(delta: f64, m1: f64, m2: f64) -> Result<ReluNetwork> {
    check_tolerance(delta)?;
    check_bound(m1)?;
    check_bound(m2)?;
    Ok(binary_product(delta, m1, m2))
}

fn binary_product(delta: f64, m1: f64, m2: f64) -> ReluNetwork {
    let sq = squarer(2.0, product_levels(delta, m1, m2));
    let three = ReluNetwork::parallel(&[sq.clone(), sq.clone(), sq]);
    let lift = ReluNetwork::linear(3, 2, &[1.0 / m1, 1.0 / m2, 1.0 / m1, 0.0, 0.0, 1.0 / m2]);
    let half = 0.5 * m1 * m2;
    let combine = ReluNetwork::linear(1, 3, &[half, -half, -half]);
    let inner = ReluNetwork::compose(&three, &lift).expect("dimensions agree");
    ReluNetwork::compose(&combine, &inner).expect("dimensions agree")
}

/// Worst-case magnitude and error of a product subtree built with per-node
/// tolerance `node_delta`. Each node sees inputs inflated by their child errors.
fn tree_error(bounds: &[f64], node_delta: f64) -> (f64, f64) {
    if bounds.len() == 1 {
        return (bounds[0], 0.0);
    }
    let mid = bounds.len().div_ceil(2);
    let (a, ea) = tree_error(&bounds[..mid], node_delta);
    let (b, eb) = tree_error(&bounds[mid..], node_delta);
    (a * b, node_delta + ea * b + eb * a + ea * eb)
}

fn build_tree(bounds: &[f64], node_delta: f64) -> (ReluNetwork, f64, f64) {
    if bounds.len() == 1 {
        return (ReluNetwork::identity(1, 0), bounds[0], 0.0);
    }
    let mid = bounds.len().div_ceil(2);
    let (left, a, ea) = build_tree(&bounds[..mid], node_delta);
    let (right, b, eb) = build_tree(&bounds[mid..], node_delta);
    let node = binary_product(node_delta, (a + ea).max(1.0), (b + eb).max(1.0));
    let both = ReluNetwork::parallel(&[left, right]);
    let net = ReluNetwork::compose(&node, &both).expect("dimensions agree");
    (net, a * b, node_delta + ea * b + eb * a + ea * eb)
}

/// Per-node tolerance for an `l`-factor product tree: starts from the equal
/// split `delta/(l − 1)` and shrinks until the propagated bound is `≤ delta`.
pub fn product_node_tolerance(delta: f64, bounds: &[f64]) -> f64 {
    let nodes = bounds.len().saturating_sub(1).max(1);
    let mut dn = delta / nodes as f64;
    while tree_error(bounds, dn).1 > delta {
        dn *= 0.9;
    }
    dn
}

/// ReLU network approximating `∏ x_i` on `∏[-M_i, M_i]` within `delta`, as a
/// balanced binary tree of [`build_binary_product`] nodes.
pub fn build_lary_product(l: usize, delta: f64, bounds: &[f64]) -> Result<ReluNetwork> {
    if l == 0 || bounds.len() != l {
        return Err(Error::InvalidArgument(format!("need l ≥ 1 bounds, got l={l} and {} bounds", bounds.len())));
    }
    check_tolerance(delta)?;
    for &m in bounds {
        check_bound(m)?;
    }
    Ok(build_tree(bounds, product_node_tolerance(delta, bounds)).0)
}

/// Truncation order `⌈max{e·n·M, (n·M + ln(√2/(√π·ε)))/ln 2 − 1}⌉`.
pub fn compute_k(n: usize, m: f64, epsilon: f64) -> usize {
    let nm = n as f64 * m;
    let first = std::f64::consts::E * nm;
    let second =
        (nm + (std::f64::consts::SQRT_2 / (std::f64::consts::PI.sqrt() * epsilon)).ln()) / std::f64::consts::LN_2 - 1.0;
    first.max(second).ceil().max(1.0) as usize
}

/// Parameters of an exponential network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpNetSpec {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub epsilon: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
}

impl ExpNetSpec {
    pub fn new(n: usize, m: f64, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be ≥ 1".into()));
        }
        check_bound(m)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
        }
        let k = compute_k(n, m, epsilon);
        let delta = epsilon / (2.0 * (n as f64).exp());
        Ok(Self { n, m, epsilon, k, delta })
    }

    /// `K·n^K`.
    pub fn width_shape(&self) -> f64 {
        self.k as f64 * (self.n as f64).powi(self.k as i32)
    }

    /// `1 + ln K·(ln K + ln(2e/ε) + K(ln n + ln M))`.
    pub fn depth_shape(&self) -> f64 {
        let lk = (self.k as f64).ln();
        let tail =
            (2.0 * std::f64::consts::E / self.epsilon).ln() + self.k as f64 * ((self.n as f64).ln() + self.m.ln());
        1.0 + lk * (lk + tail)
    }
}

/// Index paths `ℓ_1..ℓ_{k−1}` contributing to each entry of `A^k`.
pub fn paths_per_entry(n: usize, k: usize) -> usize {
    if k == 0 {
        1
    } else {
        n.pow(k as u32 - 1)
    }
}

fn power_cost(n: usize, k: usize, template: &ReluNetwork) -> u64 {
    (n * n * paths_per_entry(n, k)) as u64 * template.weight_count() + (n * n) as u64
}

fn check_budget(needed: u64, budget: u64) -> Result<()> {
    if needed > budget {
        Err(Error::Budget { needed, budget })
    } else {
        Ok(())
    }
}

/// Product template for one path of `A^k`.
fn power_template(n: usize, k: usize, delta: f64, m: f64) -> Result<ReluNetwork> {
    let per_path = delta / paths_per_entry(n, k) as f64;
    build_lary_product(k, per_path, &vec![m; k])
}

fn assemble_power(n: usize, k: usize, template: &ReluNetwork) -> ReluNetwork {
    let nn = n * n;
    let paths = paths_per_entry(n, k);
    let copies = nn * paths;
    // Input selection: factor q of path p for entry (i, j) reads a_{ℓ_{q−1} ℓ_q}.
    let mut select = Vec::with_capacity(copies * k);
    for i in 0..n {
        for j in 0..n {
            for p in 0..paths {
                let copy = (i * n + j) * paths + p;
                let mut idx = vec![i];
                let mut rest = p;
                let mut mids = vec![0; k - 1];
                for slot in mids.iter_mut().rev() {
                    *slot = rest % n;
                    rest /= n;
                }
                idx.extend(mids);
                idx.push(j);
                for q in 0..k {
                    select.push((copy * k + q, idx[q] * n + idx[q + 1], 1.0));
                }
            }
        }
    }
    let select = ReluNetwork::affine(SparseLayer::from_triplets(
        copies * k,
        nn,
        select,
        vec![0.0; copies * k],
        Activation::Identity,
    ));
    let sum = ReluNetwork::affine(SparseLayer::from_triplets(
        nn,
        copies,
        (0..copies).map(|c| (c / paths, c, 1.0)),
        vec![0.0; nn],
        Activation::Identity,
    ));
    let products = ReluNetwork::parallel(&vec![template.clone(); copies]);
    let inner = ReluNetwork::compose(&products, &select).expect("dimensions agree");
    ReluNetwork::compose(&sum, &inner).expect("dimensions agree")
}

fn constant_identity(n: usize) -> ReluNetwork {
    let nn = n * n;
    let bias = (0..nn).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect();
    ReluNetwork::affine(SparseLayer::from_triplets(nn, nn, [], bias, Activation::Identity))
}

/// Network mapping row-major `A` to an entrywise-`delta` approximation of
/// `A^k` on `[-M, M]^{n×n}`.
pub fn build_matrix_power_net(n: usize, k: usize, delta: f64, m: f64, budget: u64) -> Result<ReluNetwork> {
    if n == 0 {
        return Err(Error::InvalidArgument("matrix dimension must be ≥ 1".into()));
    }
    match k {
        0 => Ok(constant_identity(n)),
        1 => Ok(ReluNetwork::identity(n * n, 0)),
        _ => {
            let template = power_template(n, k, delta, m)?;
            check_budget(power_cost(n, k, &template), budget)?;
            Ok(assemble_power(n, k, &template))
        }
    }
}

/// `Φ(A) = I + A + Σ_{2≤j≤K} P^{(j)}(A)/j!` with every power network built
/// at entrywise tolerance `spec.delta`.
pub fn build_exp_net(spec: &ExpNetSpec, budget: u64) -> Result<ReluNetwork> {
    let n = spec.n;
    let nn = n * n;
    let templates: Vec<ReluNetwork> =
        (2..=spec.k).map(|j| power_template(n, j, spec.delta, spec.m)).collect::<Result<_>>()?;
    let needed: u64 =
        templates.iter().zip(2..).map(|(t, j)| power_cost(n, j, t)).sum::<u64>() + (nn * nn * (spec.k + 1)) as u64;
    check_budget(needed, budget)?;
    let mut powers = vec![ReluNetwork::identity(nn, 0)];
    powers.extend(templates.iter().zip(2..).map(|(t, j)| assemble_power(n, j, t)));
    let all = ReluNetwork::fan_out(&powers)?;
    let mut coeff = 1.0;
    let mut weights = Vec::with_capacity(nn * spec.k);
    for j in 1..=spec.k {
        coeff /= j as f64;
        weights.extend((0..nn).map(|e| (e, (j - 1) * nn + e, coeff)));
    }
    let bias = (0..nn).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect();
    let taylor = ReluNetwork::affine(SparseLayer::from_triplets(nn, nn * spec.k, weights, bias, Activation::Identity));
    ReluNetwork::compose(&taylor, &all)
}
