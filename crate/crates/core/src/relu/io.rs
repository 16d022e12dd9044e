//! Weight files.
//!
//! Layout: the 8-byte magic `MFRELU01`, a little-endian `u64` header length,
//! the JSON header, then per layer in order the CSR arrays
//! `row_ptr: [u64; rows+1]`, `col_idx: [u32; nnz]`, `values: [f64; nnz]`
//! and `bias: [f64; rows]`, all little-endian. Values within a row are
//! stored in increasing column order, i.e. row-major.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::certify::CertReport;
use super::construct::ExpNetSpec;
use super::network::{Activation, ReluNetwork, SparseLayer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MFRELU01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFileHeader {
    pub input_dim: usize,
    pub output_dim: usize,
    pub width: usize,
    pub depth: usize,
    pub spec: Option<ExpNetSpec>,
    pub certification: Option<CertReport>,
    pub layers: Vec<LayerDescriptor>,
}

pub fn write_network<W: Write>(
    mut w: W,
    net: &ReluNetwork,
    spec: Option<&ExpNetSpec>,
    certification: Option<&CertReport>,
) -> Result<()> {
    let header = WeightFileHeader {
        input_dim: net.input_dim(),
        output_dim: net.output_dim(),
        width: net.width(),
        depth: net.depth(),
        spec: spec.copied(),
        certification: certification.cloned(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerDescriptor { rows: l.rows(), cols: l.cols(), nnz: l.nnz(), activation: l.activation() })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::new();
    for l in net.layers() {
        buf.clear();
        let (row_ptr, col_idx, values) = l.raw_parts();
        row_ptr.iter().for_each(|&p| buf.extend_from_slice(&(p as u64).to_le_bytes()));
        col_idx.iter().for_each(|&c| buf.extend_from_slice(&c.to_le_bytes()));
        values.iter().chain(l.bias()).for_each(|&v| buf.extend_from_slice(&v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_exact_vec<R: Read>(r: &mut R, bytes: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0; bytes];
    r.read_exact(&mut buf).map_err(|e| Error::Corrupt(format!("truncated weight file: {e}")))?;
    Ok(buf)
}

pub fn read_network<R: Read>(mut r: R) -> Result<(WeightFileHeader, ReluNetwork)> {
    if read_exact_vec(&mut r, 8)? != MAGIC {
        return Err(Error::Corrupt("not a ReLU weight file".into()));
    }
    let len = u64::from_le_bytes(read_exact_vec(&mut r, 8)?.try_into().expect("8 bytes"));
    let header: WeightFileHeader = serde_json::from_slice(&read_exact_vec(&mut r, len as usize)?)?;
    let mut layers = Vec::with_capacity(header.layers.len());
    for d in &header.layers {
        let row_ptr = read_exact_vec(&mut r, 8 * (d.rows + 1))?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")) as usize)
            .collect();
        let col_idx = read_exact_vec(&mut r, 4 * d.nnz)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let floats = |v: Vec<u8>| -> Vec<f64> {
            v.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
        };
        let values = floats(read_exact_vec(&mut r, 8 * d.nnz)?);
        let bias = floats(read_exact_vec(&mut r, 8 * d.rows)?);
        layers.push(SparseLayer::from_raw_parts(d.rows, d.cols, row_ptr, col_idx, values, bias, d.activation)?);
    }
    let net = ReluNetwork::new(layers)?;
    if net.input_dim() != header.input_dim || net.output_dim() != header.output_dim {
        return Err(Error::Corrupt("header dimensions disagree with layers".into()));
    }
    Ok((header, net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relu::construct::{build_exp_net, DEFAULT_BUDGET};

    #[test]
    fn round_trip_is_bitwise() {
        let spec = ExpNetSpec::new(1, 1.0, 0.5).unwrap();
        let net = build_exp_net(&spec, DEFAULT_BUDGET).unwrap();
        let mut buf = Vec::new();
        write_network(&mut buf, &net, Some(&spec), None).unwrap();
        let (header, back) = read_network(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert_eq!(header.spec, Some(spec));
        assert_eq!(header.depth, net.depth());
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(read_network(&b"NOTMAGIC"[..]).is_err());
        let net = ReluNetwork::identity(2, 1);
        let mut buf = Vec::new();
        write_network(&mut buf, &net, None, None).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_network(buf.as_slice()), Err(Error::Corrupt(_))));
    }
}
