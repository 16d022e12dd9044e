//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::RngCore;
use serde::Serialize;

use matfun::datagen::{generate, read_dataset, write_dataset, Sample, Sampling};
use matfun::metrics::{report, EvalResult, DEFAULT_EPS};
use matfun::neural::{
    predict_regression, predict_seq2seq, preset, read_checkpoint, train_regression, train_seq2seq, write_checkpoint,
    Arch, History, LossKind, Model, Preset, RegressionData, TaskInfo,
};
use matfun::numcodec::{decode_value, encode_matrix, encode_value, write_vocab_file, Scheme};
use matfun::oracles::MatrixFunction;
use matfun::relu::{build_exp_net, certify_exp, read_network, write_network, ExpNetSpec};
use matfun::rng::stream_rng;

use crate::record::{create_dir, write_manifest};
use crate::*;

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a, command),
        Command::Train(a) => train(a, command),
        Command::Eval(a) => eval(a, command),
        Command::BuildRelu(a) => build_relu(a, command),
        Command::Certify(a) => certify(a, command),
        Command::Codec(a) => codec(&a.action, command),
        Command::Repro(a) => crate::experiments::run(&a.experiment, a.seed, &a.out).map(|_| ()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Seed of an evaluation set drawn independently of the training set.
pub fn test_seed(seed: u64) -> u64 {
    stream_rng(seed, "test-set", 0).next_u64()
}

pub fn load_dataset(path: &Path) -> Result<Vec<Sample>> {
    let (_, samples) = read_dataset(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    Ok(samples)
}

/// Writes `samples` as `dir/name`.
pub fn save_dataset(
    dir: &Path,
    name: &str,
    function: MatrixFunction,
    n: usize,
    count: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<Vec<Sample>> {
    let (manifest, samples) = generate(function, n, count, seed, sampling)?;
    let mut w = create(&dir.join(name))?;
    write_dataset(&mut w, &manifest, &samples)?;
    Ok(samples)
}

fn gen(a: &GenArgs, config: &Command) -> Result<()> {
    create_dir(&a.out)?;
    let samples = save_dataset(&a.out, "dataset.jsonl", a.function, a.n, a.count, a.seed, a.sampling.into())?;
    println!("wrote {} samples to {}", samples.len(), a.out.join("dataset.jsonl").display());
    write_manifest(&a.out, config, &[PathBuf::from("dataset.jsonl")])
}

/// What to train; everything not named here comes from the preset.
#[derive(Clone, Debug, Serialize)]
pub struct TrainRequest {
    pub arch: Arch,
    pub preset: Preset,
    pub function: MatrixFunction,
    pub n: usize,
    pub scheme: Option<Scheme>,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub max_steps: Option<u64>,
}

pub struct Trained {
    pub model: Model,
    pub task: TaskInfo,
    pub history: History,
    /// Evaluation on the held-out split of the training samples.
    pub heldout: EvalResult,
}

impl TrainRequest {
    /// Preset sample count.
    pub fn samples(&self) -> Result<usize> {
        Ok(preset(self.arch, self.preset, self.n, self.scheme, self.seed)?.samples)
    }

    pub fn fit(&self, samples: &[Sample]) -> Result<Trained> {
        let p = preset(self.arch, self.preset, self.n, self.scheme, self.seed)?;
        let mut cfg = p.train;
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if self.max_steps.is_some() {
            cfg.max_steps = self.max_steps;
        }
        if samples.iter().any(|s| s.function != self.function || s.input.n() != self.n) {
            bail!("dataset does not hold {} samples of size {}", self.function, self.n);
        }
        let label = match self.arch {
            Arch::Encdec => self.scheme.context("encdec needs --scheme")?.name().to_string(),
            a => a.name().to_string(),
        };
        let loss = LossKind::for_task(self.function, self.n);
        let mut model = Model::build(&p.model, self.seed)?;
        let (history, heldout) = match &mut model {
            Model::Mlp(m) => train_regression(m, samples, loss, &cfg, &label)?,
            Model::Fourier(m) => train_regression(m, samples, loss, &cfg, &label)?,
            Model::Seq2Seq(m) => train_seq2seq(m, samples, self.scheme.context("encdec needs --scheme")?, &cfg)?,
        };
        let task = TaskInfo { function: self.function, n: self.n, scheme: self.scheme, label };
        Ok(Trained { model, task, history, heldout })
    }
}

#[derive(Serialize)]
struct HistoryFile<'a> {
    task: &'a TaskInfo,
    history: &'a History,
    heldout_accuracy: Vec<(f64, f64)>,
}

/// Writes `model.ckpt` and `history.json`; returns their names.
pub fn save_trained(dir: &Path, t: &Trained, seed: u64, taus: &[f64]) -> Result<Vec<PathBuf>> {
    let mut w = create(&dir.join("model.ckpt"))?;
    write_checkpoint(&mut w, &t.model, seed, &t.task)?;
    let heldout_accuracy = taus.iter().map(|&tau| (tau, t.heldout.accuracy(tau))).collect();
    write_json(&dir.join("history.json"), &HistoryFile { task: &t.task, history: &t.history, heldout_accuracy })?;
    Ok(vec!["model.ckpt".into(), "history.json".into()])
}

fn train(a: &TrainArgs, config: &Command) -> Result<()> {
    let req = TrainRequest {
        arch: a.arch,
        preset: a.preset.into(),
        function: a.function,
        n: a.n,
        scheme: a.scheme,
        seed: a.seed,
        epochs: a.epochs,
        max_steps: a.max_steps,
    };
    create_dir(&a.out)?;
    let samples = match &a.data {
        Some(path) => load_dataset(path)?,
        None => {
            let count = a.samples.map_or_else(|| req.samples(), Ok)?;
            generate(a.function, a.n, count, a.seed, a.sampling.into())?.1
        }
    };
    let trained = req.fit(&samples)?;
    let taus = matfun::metrics::DEFAULT_TAUS;
    for &tau in &taus {
        println!("held-out accuracy at tau={tau}: {:.4}", trained.heldout.accuracy(tau));
    }
    let outputs = save_trained(&a.out, &trained, a.seed, &taus)?;
    write_manifest(&a.out, config, &outputs)
}

/// Predictions of `model` on `samples`, scored against their targets.
pub fn evaluate(model: &Model, task: &TaskInfo, samples: &[Sample]) -> Result<EvalResult> {
    if samples.iter().any(|s| s.function != task.function || s.input.n() != task.n) {
        bail!("evaluation data does not match the model task {} n={}", task.function, task.n);
    }
    let targets: Vec<_> = samples.iter().map(|s| s.target.clone()).collect();
    let preds = match model {
        Model::Mlp(m) => predict_regression(m, &RegressionData::from_samples(samples)?.x, task.n),
        Model::Fourier(m) => predict_regression(m, &RegressionData::from_samples(samples)?.x, task.n),
        Model::Seq2Seq(m) => {
            let scheme = task.scheme.context("checkpoint lacks a token scheme")?;
            // Inputs outside the scheme's range count as malformed predictions.
            let encoded: Vec<Option<Vec<u32>>> =
                samples.iter().map(|s| encode_matrix(&s.input, scheme).ok().map(|t| t.tokens)).collect();
            let src: Vec<Vec<u32>> = encoded.iter().flatten().cloned().collect();
            let mut decoded = predict_seq2seq(m, &src, task.n, scheme)?.into_iter();
            encoded.iter().map(|e| e.as_ref().and_then(|_| decoded.next().flatten())).collect()
        }
    };
    Ok(EvalResult::from_predictions(task.function.name(), &task.label, task.n, &preds, &targets, DEFAULT_EPS)?)
}

/// Writes `accuracy.csv` for `results`.
pub fn save_report(dir: &Path, results: &[EvalResult], taus: &[f64]) -> Result<PathBuf> {
    let mut w = create(&dir.join("accuracy.csv"))?;
    report(results, taus)?.write_csv(&mut w)?;
    w.flush()?;
    Ok("accuracy.csv".into())
}

fn eval(a: &EvalArgs, config: &Command) -> Result<()> {
    let (header, model) = read_checkpoint(open(&a.model)?).with_context(|| format!("reading {}", a.model.display()))?;
    let samples = match &a.data {
        Some(path) => load_dataset(path)?,
        None => generate(header.task.function, header.task.n, a.count, a.seed, a.sampling.into())?.1,
    };
    let result = evaluate(&model, &header.task, &samples)?;
    create_dir(&a.out)?;
    let csv = save_report(&a.out, std::slice::from_ref(&result), &a.taus)?;
    for &tau in &a.taus {
        println!("accuracy at tau={tau}: {:.4}", result.accuracy(tau));
    }
    write_manifest(&a.out, config, &[csv])
}

fn build_relu(a: &BuildReluArgs, config: &Command) -> Result<()> {
    let spec = ExpNetSpec::new(a.n, a.m, a.eps)?;
    let net = build_exp_net(&spec, a.budget)?;
    let cert = (a.samples > 0).then(|| certify_exp(&net, &spec, a.samples)).transpose()?;
    create_dir(&a.out)?;
    let mut w = create(&a.out.join("network.bin"))?;
    write_network(&mut w, &net, Some(&spec), cert.as_ref())?;
    println!(
        "K={} delta={:e} width={} depth={} weights={}",
        spec.k,
        spec.delta,
        net.width(),
        net.depth(),
        net.weight_count()
    );
    if let Some(c) = &cert {
        println!("max_error={:e} over {} points", c.max_error, c.points);
    }
    write_manifest(&a.out, config, &[PathBuf::from("network.bin")])
}

fn certify(a: &CertifyArgs, config: &Command) -> Result<()> {
    let (header, net) = read_network(open(&a.net)?).with_context(|| format!("reading {}", a.net.display()))?;
    let spec = header.spec.context("weight file carries no exponential-network parameters")?;
    let cert = certify_exp(&net, &spec, a.samples)?;
    println!("{}", serde_json::to_string(&cert)?);
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_json(&out.join("certificate.json"), &cert)?;
        write_manifest(out, config, &[PathBuf::from("certificate.json")])?;
    }
    cert.ensure_within(spec.epsilon)?;
    Ok(())
}

fn codec(action: &CodecAction, config: &Command) -> Result<()> {
    match action {
        CodecAction::Roundtrip { scheme, value } => {
            let seq = encode_value(*value, *scheme)?;
            println!("tokens: {}", seq.names().join(" "));
            println!("ids: {}", seq.tokens.iter().map(u32::to_string).collect::<Vec<_>>().join(" "));
            println!("decoded: {:?}", decode_value(&seq)?);
        }
        CodecAction::Vocab { scheme, out } => {
            create_dir(out)?;
            let mut w = create(&out.join("vocab.txt"))?;
            write_vocab_file(*scheme, &mut w)?;
            w.flush()?;
            println!("{} ids", scheme.vocab_size());
            write_manifest(out, config, &[PathBuf::from("vocab.txt")])?;
        }
    }
    Ok(())
}
