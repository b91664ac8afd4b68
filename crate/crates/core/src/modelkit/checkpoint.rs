//! Checkpoint files: a text header of `key=value` lines introduced by
//! `W2SCKPT 1`, a blank line, then the parameters as little-endian f64.

use std::fs;
use std::path::Path;

use super::model::{layers, Model, ModelConfig};
use crate::error::{LabError, Result};

const MAGIC: &str = "W2SCKPT 1";

pub fn encode_model(model: &Model) -> Vec<u8> {
    let c = &model.config;
    let header = format!(
        "{MAGIC}\ncapacity_index={}\ninput_dim={}\nn_classes={}\nseed={}\nparam_count={}\n\n",
        c.capacity_index,
        c.input_dim,
        c.n_classes,
        c.seed,
        model.params.len()
    );
    let mut bytes = header.into_bytes();
    for p in &model.params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    bytes
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| LabError::Checkpoint("missing header terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|e| LabError::Checkpoint(e.to_string()))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(LabError::Checkpoint("unsupported checkpoint version".into()));
    }
    let mut fields = std::collections::BTreeMap::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::Checkpoint(format!("bad header line `{line}`")))?;
        let v: u64 = v
            .parse()
            .map_err(|_| LabError::Checkpoint(format!("non-integer value in `{line}`")))?;
        fields.insert(k.to_string(), v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| LabError::Checkpoint(format!("header lacks `{k}`")))
    };
    let config = ModelConfig::new(
        get("capacity_index")? as usize,
        get("input_dim")? as usize,
        get("n_classes")? as usize,
        get("seed")?,
    );
    config.validate().map_err(|e| LabError::Checkpoint(e.to_string()))?;
    let count = get("param_count")? as usize;
    if count != config.param_count() {
        return Err(LabError::Checkpoint(format!(
            "param_count {count} does not match architecture ({})",
            config.param_count()
        )));
    }
    let body = &bytes[split + 2..];
    if body.len() != count * 8 {
        return Err(LabError::Checkpoint(format!("expected {} parameter bytes, found {}", count * 8, body.len())));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let head_offset = layers(&config).last().expect("layers").w;
    Ok(Model {
        params,
        config,
        head_offset,
    })
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelkit::init_model;

    #[test]
    fn round_trip_is_byte_exact() {
        let m = init_model(ModelConfig::new(2, 6, 3, 11)).unwrap();
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn truncated_body_is_rejected() {
        let m = init_model(ModelConfig::new(0, 2, 2, 0)).unwrap();
        let bytes = encode_model(&m);
        assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
    }
}
