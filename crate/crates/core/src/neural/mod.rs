//! Differentiable models for learning matrix functions.
//!
//! [`tape`] is a small reverse-mode autodiff engine over 2-D `f64` arrays;
//! [`models`] builds the baselines (shallow and deep MLPs, a Fourier-feature
//! encoder) and an encoder-decoder transformer on top of it; [`train`] runs
//! Adam over seeded shuffles and evaluates tolerance accuracy on a held-out
//! split.
//!
//! ```
//! use matfun::neural::{Mlp, MlpConfig, Regressor, Tape};
//! use ndarray::Array2;
//!
//! let mlp = Mlp::new(MlpConfig::shallow(2), 0).unwrap();
//! let mut tape = Tape::new(&mlp.params);
//! let y = mlp.forward(&mut tape, &Array2::zeros((5, 4)), None);
//! assert_eq!(tape.value(y).dim(), (5, 4));
//! ```

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod models;
pub mod optim;
pub mod params;
pub mod tape;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, Model, ModelConfig, TaskInfo};
pub use gradcheck::{check_gradients, GradCheck};
pub use models::{
    fourier_features, nearest_divisor, teacher_forcing, FourierConfig, FourierEncoder, Mlp, MlpConfig, Regressor,
    Seq2Seq, TransformerConfig,
};
pub use optim::{Adam, Schedule};
pub use params::{ParamId, ParamStore};
pub use tape::{attention, causal_mask, AttnSpec, Gradients, Tape, Tensor};
pub use train::{
    loss, max_sequence_len, predict_regression, predict_seq2seq, train_regression, train_seq2seq, EpochRecord, History,
    LossKind, RegressionData, SeqData, TrainConfig, Trainer, HOLDOUT_FRACTION,
};

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_TAUS;
use crate::numcodec::Scheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Mlp3,
    Mlp7,
    FourierEnc,
    Encdec,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Mlp3, Arch::Mlp7, Arch::FourierEnc, Arch::Encdec];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Mlp3 => "mlp3",
            Arch::Mlp7 => "mlp7",
            Arch::FourierEnc => "fourier-enc",
            Arch::Encdec => "encdec",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown architecture {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Sized for a single CPU core.
    Desk,
    /// The published hyperparameters.
    Paper,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::InvalidArgument(format!("unknown preset {other:?}"))),
        }
    }
}

/// Everything needed to train one model on one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPreset {
    pub samples: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Model and training settings for `arch` on `n × n` inputs; `scheme` is
/// required by the encoder-decoder and ignored otherwise.
pub fn preset(arch: Arch, preset: Preset, n: usize, scheme: Option<Scheme>, seed: u64) -> Result<RunPreset> {
    let samples = match preset {
        Preset::Desk => 10_000,
        Preset::Paper => 300_000,
    };
    let base = TrainConfig {
        epochs: 100,
        batch_size: 128,
        schedule: Schedule::Constant { lr: 1e-3 },
        seed,
        clip_norm: None,
        max_steps: None,
        holdout: HOLDOUT_FRACTION,
        eval_every: 0,
        taus: DEFAULT_TAUS.to_vec(),
    };
    let (model, train) = match arch {
        Arch::Mlp3 => (ModelConfig::Mlp(MlpConfig::shallow(n)), base),
        Arch::Mlp7 => (ModelConfig::Mlp(MlpConfig::deep(n)), base),
        Arch::FourierEnc => {
            let epochs = match preset {
                Preset::Desk => 60,
                Preset::Paper => 600,
            };
            (ModelConfig::FourierEnc(FourierConfig::desk(n)), TrainConfig { epochs, batch_size: 64, ..base })
        }
        Arch::Encdec => {
            let scheme = scheme.ok_or_else(|| Error::InvalidArgument("encdec needs a --scheme".into()))?;
            let vocab = scheme.vocab_size();
            let max_len = max_sequence_len(n, scheme) + 1;
            match preset {
                Preset::Desk => (
                    ModelConfig::EncDec(TransformerConfig::desk(vocab, max_len)),
                    TrainConfig {
                        epochs: 30,
                        batch_size: 32,
                        schedule: Schedule::WarmupInvSqrt { peak: 1e-3, warmup: 500 },
                        clip_norm: Some(1.0),
                        ..base
                    },
                ),
                Preset::Paper => (
                    ModelConfig::EncDec(TransformerConfig::paper(vocab, max_len)),
                    TrainConfig {
                        epochs: 100,
                        batch_size: 64,
                        schedule: Schedule::WarmupInvSqrt { peak: 1e-4, warmup: 10_000 },
                        ..base
                    },
                ),
            }
        }
    };
    Ok(RunPreset { samples, model, train })
}
