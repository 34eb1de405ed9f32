//! Checkpoints: `<name>.bin` holds every parameter as consecutive
//! little-endian `f64`; `<name>.json` lists names, shapes and byte offsets
//! together with the model configuration and seed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelKind, Network};
use crate::error::{Error, Result};

const FORMAT: &str = "twindann-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    model: ModelKind,
    config: ModelConfig,
    seed: u64,
    data_file: String,
    parameters: Vec<Entry>,
    #[serde(default)]
    extra: serde_json::Value,
}

/// A network plus whatever the caller stored alongside it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub config: ModelConfig,
    pub seed: u64,
    pub extra: serde_json::Value,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bin = path.with_extension("bin");
    let mut bytes = Vec::new();
    let mut entries = Vec::new();
    for p in ckpt.network.parameters() {
        entries.push(Entry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset: bytes.len(),
            len: p.numel(),
        });
        for v in p.value.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sidecar = Sidecar {
        format: FORMAT.into(),
        version: VERSION,
        model: ckpt.network.kind(),
        config: ckpt.config,
        seed: ckpt.seed,
        data_file: bin
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        parameters: entries,
        extra: ckpt.extra.clone(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialises");
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let side: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::load(path, format!("corrupt checkpoint sidecar: {e}")))?;
    if side.format != FORMAT || side.version != VERSION {
        return Err(Error::load(
            path,
            format!(
                "checkpoint version mismatch: {} v{}",
                side.format, side.version
            ),
        ));
    }
    let bin = path.with_file_name(&side.data_file);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let mut network = Network::init(side.model, &side.config, side.seed)?;
    let params = network.parameters_mut();
    if params.len() != side.parameters.len() {
        return Err(Error::load(
            path,
            format!(
                "checkpoint/config mismatch: {} stored tensors, model has {}",
                side.parameters.len(),
                params.len()
            ),
        ));
    }
    for (p, e) in params.into_iter().zip(&side.parameters) {
        if p.name != e.name || p.value.shape() != e.shape.as_slice() {
            return Err(Error::load(
                path,
                format!(
                    "checkpoint/config mismatch at {}: stored {} {:?}",
                    p.name, e.name, e.shape
                ),
            ));
        }
        let end = e.offset + 8 * e.len;
        let raw = bytes
            .get(e.offset..end)
            .ok_or_else(|| Error::load(&bin, format!("{} runs past end of data", e.name)))?;
        for (dst, chunk) in p.value.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    Ok(Checkpoint {
        network,
        config: side.config,
        seed: side.seed,
        extra: side.extra,
    })
}
