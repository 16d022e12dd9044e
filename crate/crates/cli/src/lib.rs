//! Command-line driver: data generation, training, evaluation, ReLU network
//! construction and certification, codec utilities and named experiments.
//!
//! Every command writes its outputs under `--out` together with a
//! `manifest.json` naming the configuration and the SHA-256 of each output.
//! Outputs depend only on the configuration, so repeated runs are
//! byte-identical.

pub mod commands;
pub mod experiments;
pub mod record;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use matfun::datagen::Sampling;
use matfun::neural::{Arch, Preset};
use matfun::numcodec::Scheme;
use matfun::oracles::MatrixFunction;

#[derive(Debug, Parser)]
#[command(
    name = "matfun",
    version,
    about = "Matrix functions: oracles, ReLU constructions, token codecs and sequence models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a seeded dataset of (matrix, f(matrix)) pairs.
    Gen(GenArgs),
    /// Train a model on a generated or freshly sampled dataset.
    Train(TrainArgs),
    /// Evaluate a trained model and write an accuracy table.
    Eval(EvalArgs),
    /// Build a ReLU network approximating exp on [-M, M]^(n×n).
    BuildRelu(BuildReluArgs),
    /// Re-measure the error of a saved ReLU network.
    Certify(CertifyArgs),
    /// Token codec utilities.
    Codec(CodecArgs),
    /// Run a named experiment end to end.
    Repro(ReproArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetArg {
    Desk,
    Paper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long = "fn")]
    pub function: MatrixFunction,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Entry distribution of freshly sampled inputs.
#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct SamplingArgs {
    /// Standard deviation of the Gaussian entries.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Entries are clipped to [-clip, clip].
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
}

impl From<SamplingArgs> for Sampling {
    fn from(s: SamplingArgs) -> Self {
        Sampling { sigma: s.sigma, clip: s.clip }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub arch: Arch,
    #[arg(long = "fn")]
    pub function: MatrixFunction,
    #[arg(long)]
    pub n: usize,
    /// Token scheme; required for `encdec`.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
    pub preset: PresetArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset file from `gen`; sampled from the preset size when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Overrides the preset sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Overrides the preset epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Stops after this many optimizer steps.
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset file; sampled with `--count` and `--seed` when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, value_delimiter = ',', default_values_t = matfun::metrics::DEFAULT_TAUS)]
    pub taus: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildReluArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long = "M")]
    pub m: f64,
    #[arg(long)]
    pub eps: f64,
    /// Largest admissible number of nonzero weights and biases.
    #[arg(long, default_value_t = matfun::relu::DEFAULT_BUDGET)]
    pub budget: u64,
    /// Sample count of the certification stored with the network; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    /// Weight file written by `build-relu`.
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Directory for `certificate.json`; printed only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CodecArgs {
    #[command(subcommand)]
    pub action: CodecAction,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum CodecAction {
    /// Encode a value, print its tokens and the decoded value.
    Roundtrip {
        #[arg(long)]
        scheme: Scheme,
        #[arg(long, allow_hyphen_values = true)]
        value: f64,
    },
    /// Write the vocabulary of a scheme, one token per line.
    Vocab {
        #[arg(long)]
        scheme: Scheme,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct ReproArgs {
    /// One of the names listed by `experiments::NAMES`.
    #[arg(long)]
    pub experiment: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
