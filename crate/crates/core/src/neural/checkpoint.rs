//! Model files: 8-byte magic `MFMODEL1`, a little-endian `u64` header
//! length, the JSON [`CheckpointHeader`], then every parameter as row-major
//! little-endian `f64` in header order.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::models::{FourierConfig, FourierEncoder, Mlp, MlpConfig, Regressor, Seq2Seq, TransformerConfig};
use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::numcodec::Scheme;
use crate::oracles::MatrixFunction;

pub const MAGIC: &[u8; 8] = b"MFMODEL1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "kebab-case")]
pub enum ModelConfig {
    Mlp(MlpConfig),
    FourierEnc(FourierConfig),
    EncDec(TransformerConfig),
}

/// What a model was trained to compute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub function: MatrixFunction,
    pub n: usize,
    pub scheme: Option<Scheme>,
    /// Architecture label used in reports, e.g. `mlp3`.
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    /// Initialization seed; fixed non-trained state is regenerated from it.
    pub seed: u64,
    pub task: TaskInfo,
    pub params: Vec<ParamEntry>,
}

#[derive(Clone, Debug)]
pub enum Model {
    Mlp(Mlp),
    Fourier(FourierEncoder),
    Seq2Seq(Seq2Seq),
}

impl Model {
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match config {
            ModelConfig::Mlp(c) => Model::Mlp(Mlp::new(c.clone(), seed)?),
            ModelConfig::FourierEnc(c) => Model::Fourier(FourierEncoder::new(c.clone(), seed)?),
            ModelConfig::EncDec(c) => Model::Seq2Seq(Seq2Seq::new(c.clone(), seed)?),
        })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::Mlp(m) => ModelConfig::Mlp(m.config.clone()),
            Model::Fourier(m) => ModelConfig::FourierEnc(m.config.clone()),
            Model::Seq2Seq(m) => ModelConfig::EncDec(m.config.clone()),
        }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            Model::Mlp(m) => m.params(),
            Model::Fourier(m) => m.params(),
            Model::Seq2Seq(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Mlp(m) => m.params_mut(),
            Model::Fourier(m) => m.params_mut(),
            Model::Seq2Seq(m) => &mut m.params,
        }
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, model: &Model, seed: u64, task: &TaskInfo) -> Result<()> {
    let params = model.params();
    let header = CheckpointHeader {
        config: model.config(),
        seed,
        task: task.clone(),
        params: params
            .ids()
            .map(|id| {
                let v = params.get(id);
                ParamEntry { name: params.name(id).to_string(), rows: v.nrows(), cols: v.ncols() }
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for id in params.ids() {
        let v = params.get(id);
        let mut buf = Vec::with_capacity(v.len() * 8);
        for x in v.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(CheckpointHeader, Model)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Corrupt("not a model checkpoint".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 30 {
        return Err(Error::Corrupt(format!("header length {len}")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| Error::Corrupt(format!("checkpoint header: {e}")))?;
    let mut model = Model::build(&header.config, header.seed)?;
    let store = model.params_mut();
    if store.len() != header.params.len() {
        return Err(Error::Corrupt(format!("{} parameters in file, model has {}", header.params.len(), store.len())));
    }
    for entry in &header.params {
        let id = store.find(&entry.name).ok_or_else(|| Error::Corrupt(format!("unknown parameter {}", entry.name)))?;
        if store.get(id).dim() != (entry.rows, entry.cols) {
            return Err(Error::Corrupt(format!("parameter {} has shape {}×{}", entry.name, entry.rows, entry.cols)));
        }
        let mut buf = vec![0u8; entry.rows * entry.cols * 8];
        r.read_exact(&mut buf)?;
        let data = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        *store.get_mut(id) = Array2::from_shape_vec((entry.rows, entry.cols), data).expect("shape checked");
    }
    Ok((header, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let model = Model::build(&ModelConfig::FourierEnc(FourierConfig::desk(2)), 3).unwrap();
        let task = TaskInfo { function: MatrixFunction::Sin, n: 2, scheme: None, label: "fourier-enc".into() };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model, 3, &task).unwrap();
        let (header, back) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(header.task, task);
        assert_eq!(back.params(), model.params());
        let Model::Fourier(f) = back else { panic!("wrong variant") };
        let Model::Fourier(g) = model else { unreachable!() };
        assert_eq!(f.b, g.b);
        buf[0] = b'X';
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Corrupt(_))));
    }
}
