use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tape::Gradients;

/// Learning rate as a function of the 1-based step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant {
        lr: f64,
    },
    /// `peak·s/warmup` up to `warmup`, then `peak·√(warmup/s)`.
    WarmupInvSqrt {
        peak: f64,
        warmup: u64,
    },
}

impl Schedule {
    pub fn lr(&self, step: u64) -> f64 {
        match *self {
            Schedule::Constant { lr } => lr,
            Schedule::WarmupInvSqrt { peak, warmup } => {
                let s = step.max(1) as f64;
                let w = warmup.max(1) as f64;
                if s <= w {
                    peak * s / w
                } else {
                    peak * (w / s).sqrt()
                }
            }
        }
    }
}

/// Adam with bias correction. Moments are allocated lazily per parameter.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Option<Array2<f64>>>,
    v: Vec<Option<Array2<f64>>>,
    step: u64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: Vec::new(), v: Vec::new(), step: 0 }
    }
}

impl Adam {
    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update with learning rate `lr`; parameters without a
    /// gradient keep their values and moments.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64) {
        self.step += 1;
        if self.m.len() < params.len() {
            self.m.resize(params.len(), None);
            self.v.resize(params.len(), None);
        }
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for id in params.ids().collect::<Vec<_>>() {
            let Some(g) = grads.get(id) else { continue };
            let i = id.index();
            let m = self.m[i].get_or_insert_with(|| Array2::zeros(g.dim()));
            let v = self.v[i].get_or_insert_with(|| Array2::zeros(g.dim()));
            let p = params.get_mut(id);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_then_decay() {
        let s = Schedule::WarmupInvSqrt { peak: 1e-4, warmup: 10_000 };
        assert_eq!(s.lr(1), 1e-4 / 10_000.0);
        assert_eq!(s.lr(5_000), 0.5e-4);
        assert_eq!(s.lr(10_000), 1e-4);
        assert_eq!(s.lr(40_000), 0.5e-4);
        for step in [1u64, 10, 777, 9_999] {
            assert_eq!(s.lr(step), 1e-4 * step as f64 / 10_000.0);
        }
    }
}
