//! Model containers.
//!
//! Two interchangeable forms carry the same schema: a model-kind tag, a format
//! version, the full configuration, the head-name manifest and every tensor in
//! canonical order with row-major weights.
//!
//! * JSON: a single document; `f64` values round-trip exactly.
//! * Binary: `b"SLMODEL\0"`, `u32` version, `u32` header length, a JSON header
//!   (everything except tensor values, plus per-tensor names/lengths and
//!   per-layer dims/activations), then each tensor as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelKind, SurveyModelConfig};
use super::net::MultiHeadNet;
use crate::error::{Error, Result};
use crate::nn::{Activation, ParamSet};

pub const FORMAT_NAME: &str = "survey-lab-model";
pub const FORMAT_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 8] = b"SLMODEL\0";

#[derive(Serialize, Deserialize)]
struct JsonContainer {
    format: String,
    version: u32,
    model_kind: ModelKind,
    heads: Vec<String>,
    network: MultiHeadNet,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct LayerEntry {
    stack: String,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

#[derive(Debug, Serialize, Deserialize)]
struct BinaryHeader {
    format: String,
    model_kind: ModelKind,
    config: SurveyModelConfig,
    heads: Vec<String>,
    layers: Vec<LayerEntry>,
    tensors: Vec<TensorEntry>,
}

fn layer_manifest(net: &MultiHeadNet) -> Vec<LayerEntry> {
    let mut out = Vec::new();
    let mut push = |stack: String, s: &crate::nn::MlpStack| {
        for l in s.layers() {
            out.push(LayerEntry {
                stack: stack.clone(),
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                activation: l.activation(),
            });
        }
    };
    push("backbone".into(), net.backbone());
    if let Some(lhuc) = net.lhuc() {
        push("lhuc".into(), lhuc);
    }
    for (i, name) in net.head_names().into_iter().enumerate() {
        push(format!("head.{name}"), net.head(i));
    }
    out
}

pub fn to_json(net: &MultiHeadNet) -> Result<String> {
    let container = JsonContainer {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        model_kind: net.kind(),
        heads: net.head_names(),
        network: net.clone(),
    };
    Ok(serde_json::to_string(&container)?)
}

pub fn from_json(text: &str) -> Result<MultiHeadNet> {
    let container: JsonContainer = serde_json::from_str(text)?;
    if container.format != FORMAT_NAME || container.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported container {} v{}",
            container.format, container.version
        )));
    }
    let net = container.network;
    if net.kind() != container.model_kind || net.head_names() != container.heads {
        return Err(Error::Format("container manifest disagrees with network".into()));
    }
    // Re-validates dims and activations by comparing against a fresh skeleton.
    let skeleton = MultiHeadNet::zeros(net.kind(), net.config().clone())?;
    if layer_manifest(&skeleton) != layer_manifest(&net) {
        return Err(Error::Format("layer shapes disagree with configuration".into()));
    }
    for (a, b) in skeleton.tensors().iter().zip(net.tensors()) {
        if a.data.len() != b.data.len() {
            return Err(Error::Format(format!("tensor {} has the wrong length", b.name)));
        }
    }
    Ok(net)
}

pub fn to_bytes(net: &MultiHeadNet) -> Result<Vec<u8>> {
    let tensors = net.tensors();
    let header = BinaryHeader {
        format: FORMAT_NAME.into(),
        model_kind: net.kind(),
        config: net.config().clone(),
        heads: net.head_names(),
        layers: layer_manifest(net),
        tensors: tensors
            .iter()
            .map(|t| TensorEntry {
                name: t.name.clone(),
                len: t.data.len(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let n_values: usize = tensors.iter().map(|t| t.data.len()).sum();
    let mut out = Vec::with_capacity(16 + header.len() + 8 * n_values);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for t in &tensors {
        for v in t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Format("truncated model header".into()))
}

pub fn from_bytes(bytes: &[u8]) -> Result<MultiHeadNet> {
    if bytes.len() < 16 || &bytes[..8] != BINARY_MAGIC {
        return Err(Error::Format("not a binary model container".into()));
    }
    let version = read_u32(bytes, 8)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported binary version {version}")));
    }
    let header_len = read_u32(bytes, 12)? as usize;
    let header_end = 16 + header_len;
    let header: BinaryHeader = serde_json::from_slice(
        bytes
            .get(16..header_end)
            .ok_or_else(|| Error::Format("truncated model header".into()))?,
    )?;
    if header.format != FORMAT_NAME {
        return Err(Error::Format(format!("unknown format {}", header.format)));
    }
    let mut net = MultiHeadNet::zeros(header.model_kind, header.config)?;
    if net.head_names() != header.heads || layer_manifest(&net) != header.layers {
        return Err(Error::Format("header manifest disagrees with configuration".into()));
    }
    let expected: Vec<(String, usize)> = net
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.data.len()))
        .collect();
    if expected.len() != header.tensors.len()
        || expected
            .iter()
            .zip(&header.tensors)
            .any(|((n, l), e)| *n != e.name || *l != e.len)
    {
        return Err(Error::Format("tensor table disagrees with configuration".into()));
    }
    let mut cursor = header_end;
    for t in net.tensors_mut() {
        let need = t.len() * 8;
        let chunk = bytes
            .get(cursor..cursor + need)
            .ok_or_else(|| Error::Format("truncated tensor data".into()))?;
        for (v, b) in t.iter_mut().zip(chunk.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
        }
        cursor += need;
    }
    if cursor != bytes.len() {
        return Err(Error::Format("trailing bytes after tensor data".into()));
    }
    Ok(net)
}

/// Writes the binary form when the extension is not `.json`.
pub fn save(net: &MultiHeadNet, path: &Path) -> Result<()> {
    let bytes = if path.extension().is_some_and(|e| e == "json") {
        to_json(net)?.into_bytes()
    } else {
        to_bytes(net)?
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Detects the container form from its first bytes.
pub fn load(path: &Path) -> Result<MultiHeadNet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        from_bytes(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
        from_json(&text)
    }
}

pub fn load_kind(path: &Path, kind: ModelKind) -> Result<MultiHeadNet> {
    let net = load(path)?;
    if net.kind() != kind {
        return Err(Error::Format(format!(
            "{} holds a {} model, expected {}",
            path.display(),
            net.kind().as_str(),
            kind.as_str()
        )));
    }
    Ok(net)
}
