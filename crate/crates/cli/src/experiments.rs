//! Named desk-scale experiments: generate, train, evaluate on fresh samples.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use matfun::datagen::Sampling;
use matfun::metrics::{AccuracyReport, DEFAULT_TAUS};
use matfun::neural::{Arch, Preset};
use matfun::numcodec::Scheme;
use matfun::oracles::MatrixFunction;

use crate::commands::{evaluate, save_dataset, save_report, save_trained, test_seed, TrainRequest};
use crate::record::{create_dir, write_manifest};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Experiment {
    pub name: &'static str,
    pub function: MatrixFunction,
    pub n: usize,
    pub arch: Arch,
    pub scheme: Option<Scheme>,
    pub sampling: Sampling,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Preset epoch count when `None`.
    pub epochs: Option<usize>,
}

const UNIT: Sampling = Sampling { sigma: 1.0, clip: 1.0 };
const STANDARD: Sampling = Sampling { sigma: 1.0, clip: 5.0 };

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment {
        name: "smoke",
        function: MatrixFunction::Exp,
        n: 1,
        arch: Arch::Mlp3,
        scheme: None,
        sampling: UNIT,
        train_samples: 500,
        test_samples: 200,
        epochs: Some(3),
    },
    Experiment {
        name: "mlp3-exp",
        function: MatrixFunction::Exp,
        n: 1,
        arch: Arch::Mlp3,
        scheme: None,
        sampling: UNIT,
        train_samples: 10_000,
        test_samples: 1000,
        epochs: None,
    },
    Experiment {
        name: "encdec-exp",
        function: MatrixFunction::Exp,
        n: 1,
        arch: Arch::Encdec,
        scheme: Some(Scheme::P1000),
        sampling: STANDARD,
        train_samples: 10_000,
        test_samples: 1000,
        epochs: None,
    },
    Experiment {
        name: "encdec-sign",
        function: MatrixFunction::Sign,
        n: 2,
        arch: Arch::Encdec,
        scheme: Some(Scheme::P1000),
        sampling: STANDARD,
        train_samples: 10_000,
        test_samples: 1000,
        epochs: None,
    },
    Experiment {
        name: "fourier-sin",
        function: MatrixFunction::Sin,
        n: 2,
        arch: Arch::FourierEnc,
        scheme: None,
        sampling: STANDARD,
        train_samples: 10_000,
        test_samples: 1000,
        epochs: None,
    },
];

pub fn find(name: &str) -> Result<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.name == name).with_context(|| {
        let names: Vec<_> = EXPERIMENTS.iter().map(|e| e.name).collect();
        format!("unknown experiment {name:?}; expected one of {}", names.join(", "))
    })
}

#[derive(Serialize)]
struct ReproConfig<'a> {
    command: &'static str,
    experiment: &'a Experiment,
    seed: u64,
    test_seed: u64,
}

/// Runs experiment `name` into `out`; returns the report written to
/// `out/accuracy.csv`.
pub fn run(name: &str, seed: u64, out: &Path) -> Result<AccuracyReport> {
    let exp = find(name)?;
    create_dir(out)?;
    let train = save_dataset(out, "train.jsonl", exp.function, exp.n, exp.train_samples, seed, exp.sampling)?;
    let test_seed = test_seed(seed);
    let test = save_dataset(out, "test.jsonl", exp.function, exp.n, exp.test_samples, test_seed, exp.sampling)?;
    let req = TrainRequest {
        arch: exp.arch,
        preset: Preset::Desk,
        function: exp.function,
        n: exp.n,
        scheme: exp.scheme,
        seed,
        epochs: exp.epochs,
        max_steps: None,
    };
    let trained = req.fit(&train)?;
    let mut outputs: Vec<PathBuf> = vec!["train.jsonl".into(), "test.jsonl".into()];
    outputs.extend(save_trained(out, &trained, seed, &DEFAULT_TAUS)?);
    let result = evaluate(&trained.model, &trained.task, &test)?;
    outputs.push(save_report(out, std::slice::from_ref(&result), &DEFAULT_TAUS)?);
    let report = matfun::metrics::report(std::slice::from_ref(&result), &DEFAULT_TAUS)?;
    for row in &report.rows {
        println!("{} {} n={} tau={}: {:.4}", row.function, row.arch_or_scheme, row.n, row.tau, row.accuracy);
    }
    write_manifest(out, &ReproConfig { command: "repro", experiment: exp, seed, test_seed }, &outputs)?;
    Ok(report)
}
