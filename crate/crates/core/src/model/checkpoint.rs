//! Self-describing binary checkpoints.
//!
//! Layout: the 8-byte magic `SLANCKPT`, a little-endian `u64` header length,
//! a JSON header with the model config and a `(name, rows, cols)` table, then
//! every tensor's values as little-endian `f64` in table order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, SlanParams};
use crate::diff::{Shape, Tensor};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"SLANCKPT";

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<(String, usize, usize)>,
}

pub fn save_checkpoint<S: Scalar>(params: &SlanParams<S>, path: &Path) -> Result<(), ModelError> {
    let header = Header {
        config: params.config.clone(),
        tensors: params
            .names
            .iter()
            .zip(&params.tensors)
            .map(|(n, t)| (n.clone(), t.shape().rows, t.shape().cols))
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut bytes = Vec::with_capacity(16 + json.len() + 8 * params.tensors.iter().map(Tensor::len).sum::<usize>());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for t in &params.tensors {
        for v in t.data() {
            bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<SlanParams<S>, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |msg: &str| ModelError::Checkpoint(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = 16usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[16..body]).map_err(|e| bad(&format!("bad header: {e}")))?;

    let mut params = SlanParams::<S>::init(&header.config)?;
    if header.tensors.len() != params.len() {
        return Err(bad("tensor table does not match the model config"));
    }
    let mut offset = body;
    for (slot, (name, rows, cols)) in header.tensors.iter().enumerate() {
        let shape = Shape::new(*rows, *cols);
        if *name != params.names[slot] || shape != params.tensors[slot].shape() {
            return Err(bad(&format!("unexpected tensor {name} {shape}")));
        }
        let end = offset + 8 * shape.len();
        let chunk = bytes.get(offset..end).ok_or_else(|| bad("truncated tensor data"))?;
        let values: Vec<f64> = chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        params.tensors[slot] = Tensor::from_f64(shape, &values);
        offset = end;
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AggregationKind, InitKind};

    #[test]
    fn exact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let cfg = ModelConfig {
            statics: 3,
            aggregation: AggregationKind::Attention,
            init: InitKind::Random,
            seed: 5,
            ..ModelConfig::new(4, 6, 2)
        };
        let mut p = SlanParams::<f64>::init(&cfg).unwrap();
        p.tensors[0].data_mut()[0] = std::f64::consts::PI * 1e-300;
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint::<f64>(&path).unwrap(), p);
    }

    #[test]
    fn rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let p = SlanParams::<f64>::init(&ModelConfig::new(2, 3, 2)).unwrap();
        save_checkpoint(&p, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(load_checkpoint::<f64>(&path).is_err());
        fs::write(&path, b"nope").unwrap();
        assert!(matches!(load_checkpoint::<f64>(&path), Err(ModelError::Checkpoint(_))));
    }
}
