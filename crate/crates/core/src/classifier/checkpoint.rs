//! Flat binary checkpoints: a `u32` layer count, the `u32` widths, then
//! every weight matrix followed by its bias vector as little-endian `f64`.
//! A JSON sidecar records the widths, the training configuration and a
//! digest of the binary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mlp::MlpModel;
use super::train::TrainConfig;
use crate::real::Real;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "cfaug-mlp/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub dims: Vec<usize>,
    pub train_config: Option<TrainConfig>,
    pub sha256: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn encode<T: Real>(model: &MlpModel<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * (model.dims().len() + 1) + 8 * model.num_params());
    out.extend_from_slice(&(model.dims().len() as u32).to_le_bytes());
    for &d in model.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for (w, b) in model.weights().iter().zip(model.biases()) {
        for v in w.iter().chain(b) {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

fn decode<T: Real>(bytes: &[u8]) -> Result<MlpModel<T>> {
    let short = || Error::Format("checkpoint truncated".into());
    let u32_at = |at: usize| -> Result<usize> {
        Ok(u32::from_le_bytes(bytes.get(at..at + 4).ok_or_else(short)?.try_into().expect("4 bytes")) as usize)
    };
    let n = u32_at(0)?;
    let dims = (0..n).map(|i| u32_at(4 + 4 * i)).collect::<Result<Vec<_>>>()?;
    if dims.len() < 2 {
        return Err(Error::Format(format!("checkpoint has {} layer widths", dims.len())));
    }
    let mut at = 4 + 4 * n;
    let mut take = |len: usize| -> Result<Vec<T>> {
        let raw = bytes.get(at..at + 8 * len).ok_or_else(short)?;
        at += 8 * len;
        Ok(raw.chunks_exact(8).map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes")))).collect())
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in dims.windows(2) {
        weights.push(take(w[0] * w[1])?);
        biases.push(take(w[1])?);
    }
    if at != bytes.len() {
        return Err(Error::Format("trailing bytes in checkpoint".into()));
    }
    MlpModel::from_parts(dims, weights, biases)
}

impl<T: Real> MlpModel<T> {
    pub fn save(&self, path: &Path, train_config: Option<&TrainConfig>) -> Result<CheckpointMeta> {
        let bytes = encode(self);
        let meta = CheckpointMeta {
            format: CHECKPOINT_FORMAT.into(),
            dims: self.dims().to_vec(),
            train_config: train_config.cloned(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        };
        std::fs::write(path, &bytes)?;
        std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&meta)?)?;
        Ok(meta)
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta)> {
        let bytes = std::fs::read(path)?;
        let meta: CheckpointMeta = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
        if meta.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unsupported checkpoint format `{}`", meta.format)));
        }
        let digest = hex::encode(Sha256::digest(&bytes));
        if digest != meta.sha256 {
            return Err(Error::Format("checkpoint digest does not match its sidecar".into()));
        }
        let model = decode(&bytes)?;
        if model.dims() != meta.dims.as_slice() {
            return Err(Error::Format("checkpoint widths disagree with sidecar".into()));
        }
        Ok((model, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_f32_and_f64() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = MlpModel::<f32>::new(&[7, 5, 3], 2).unwrap();
        m.save(&p, Some(&TrainConfig::default())).unwrap();
        let (back, meta) = MlpModel::<f32>::load(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta.dims, vec![7, 5, 3]);
        let wide: MlpModel<f64> = m.cast();
        wide.save(&p, None).unwrap();
        assert_eq!(MlpModel::<f64>::load(&p).unwrap().0, wide);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let m = MlpModel::<f64>::new(&[3, 2], 0).unwrap();
        let bytes = encode(&m);
        assert!(decode::<f64>(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode::<f64>(&bytes).is_ok());
    }
}
