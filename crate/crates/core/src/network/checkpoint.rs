//! Binary checkpoint: `MRGC`, `u32` version, the model dimensions, then every
//! parameter as a little-endian `f64` in layout order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::params::{Aggregation, HeadActivation, ModelConfig, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MRGC";
pub const VERSION: u32 = 1;

pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let c = params.config();
    let mut out = Vec::with_capacity(48 + params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [c.input_dim, c.hidden_dim, c.edge_dim, c.layers, c.head_hidden, c.num_classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let act = match c.activation {
        HeadActivation::Sigmoid => 0u32,
        HeadActivation::Softmax => 1,
    };
    let agg = match c.aggregation {
        Aggregation::Sum => 0u32,
        Aggregation::Mean => 1,
    };
    out.extend_from_slice(&act.to_le_bytes());
    out.extend_from_slice(&agg.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<ModelParams> {
    let bad = |m: &str| Error::format(origin, m.to_string());
    if bytes.len() < 48 || &bytes[..4] != MAGIC {
        return Err(bad("not a model checkpoint"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let dims: Vec<usize> = (0..6).map(|k| u32_at(8 + 4 * k) as usize).collect();
    let activation = match u32_at(32) {
        0 => HeadActivation::Sigmoid,
        1 => HeadActivation::Softmax,
        _ => return Err(bad("unknown head activation")),
    };
    let aggregation = match u32_at(36) {
        0 => Aggregation::Sum,
        1 => Aggregation::Mean,
        _ => return Err(bad("unknown aggregation")),
    };
    let n = u64::from_le_bytes(bytes[40..48].try_into().unwrap()) as usize;
    if bytes.len() != 48 + n * 8 {
        return Err(bad("truncated parameter block"));
    }
    let data: Vec<f64> = bytes[48..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut config = ModelConfig {
        input_dim: dims[0],
        hidden_dim: dims[1],
        edge_dim: dims[2],
        layers: dims[3],
        head_hidden: dims[4],
        num_classes: dims[5],
        activation,
        aggregation,
        ..ModelConfig::default()
    };
    let probe = ModelParams::from_parts(&config, data)?;
    config.alpha = probe.alpha();
    config.beta = probe.beta();
    let data = probe.data().to_vec();
    ModelParams::from_parts(&config, data)
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&to_bytes(params))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
