//! Weights file: an 8-byte little-endian header length, a JSON header, then
//! every parameter as little-endian `f32` in one flat block.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::ArchitectureSpec;
use super::model::DetectorModel;
use super::params::{layout, ParamSet};
use crate::error::{Error, Result};

const FORMAT: &str = "overlapscope-weights";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the data block.
    pub byte_offset: usize,
    pub byte_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub format: String,
    pub version: u32,
    pub arch: ArchitectureSpec,
    pub init_seed: u64,
    pub tensors: Vec<TensorEntry>,
}

pub fn encode_weights(model: &DetectorModel) -> Result<Vec<u8>> {
    let header = WeightsHeader {
        format: FORMAT.into(),
        version: VERSION,
        arch: model.arch.clone(),
        init_seed: model.init_seed,
        tensors: model
            .params
            .slots
            .iter()
            .map(|s| TensorEntry { name: s.name.clone(), shape: s.shape.clone(), byte_offset: 4 * s.offset, byte_len: 4 * s.len })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + json.len() + 4 * model.params.len());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for w in &model.params.data {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<DetectorModel> {
    let bad = |m: String| Error::Format(format!("weights: {m}"));
    let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| bad("truncated header length".into()))?.try_into().unwrap();
    let json_len = usize::try_from(u64::from_le_bytes(len_bytes)).map_err(|_| bad("header too large".into()))?;
    let json = bytes.get(8..8 + json_len).ok_or_else(|| bad("truncated header".into()))?;
    let header: WeightsHeader = serde_json::from_slice(json)?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(bad(format!("unsupported format {} v{}", header.format, header.version)));
    }
    header.arch.validate()?;
    let expected = layout(&header.arch);
    let matches = expected.len() == header.tensors.len()
        && expected.iter().zip(&header.tensors).all(|(s, t)| {
            s.name == t.name && s.shape == t.shape && 4 * s.offset == t.byte_offset && 4 * s.len == t.byte_len
        });
    if !matches {
        return Err(bad("tensor table does not match the architecture".into()));
    }
    let data = &bytes[8 + json_len..];
    let mut params = ParamSet::<f32>::zeros(&header.arch);
    if data.len() != 4 * params.len() {
        return Err(bad(format!("expected {} data bytes, found {}", 4 * params.len(), data.len())));
    }
    for (w, chunk) in params.data.iter_mut().zip(data.chunks_exact(4)) {
        *w = f32::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(DetectorModel { arch: header.arch, init_seed: header.init_seed, params })
}

pub fn save_weights(path: &Path, model: &DetectorModel) -> Result<()> {
    fs::write(path, encode_weights(model)?)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<DetectorModel> {
    let bytes = fs::read(path)?;
    decode_weights(&bytes).map_err(|e| Error::Load { path: path.to_path_buf(), reason: e.to_string() })
}
