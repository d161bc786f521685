//! Parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "MVCK"
//! version    u32      1
//! header_len u32
//! header     header_len bytes of UTF-8 JSON:
//!            {"model": ModelConfig, "representation": RepresentationConfig,
//!             "metadata": any}
//! count      u32      number of tensors
//! per tensor:
//!   name_len u32, name (UTF-8)
//!   ndim     u32, dims ndim x u64
//!   data     prod(dims) x f32, row-major
//! ```
//!
//! Tensors are the trainable parameters in their canonical order followed by
//! the batch-norm running statistics.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::Model;
use super::params::ModelParams;
use super::ModelError;
use crate::representation::RepresentationConfig;

pub const MAGIC: &[u8; 4] = b"MVCK";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    representation: RepresentationConfig,
    #[serde(default)]
    metadata: serde_json::Value,
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

pub fn write_checkpoint(model: &Model, metadata: &serde_json::Value, mut w: impl Write) -> Result<(), ModelError> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    let header = serde_json::to_vec(&Header {
        model: model.config.clone(),
        representation: model.repr,
        metadata: metadata.clone(),
    })
    .map_err(|e| bad(e.to_string()))?;
    put_u32(&mut w, header.len() as u32)?;
    w.write_all(&header)?;

    let mut tensors: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::new();
    model
        .params
        .for_each(|name, t| tensors.push((name, t.shape().to_vec(), t.iter().copied().collect())));
    for (name, b) in model.params.buffers() {
        tensors.push((name, vec![b.len()], b.to_vec()));
    }
    put_u32(&mut w, tensors.len() as u32)?;
    for (name, shape, data) in tensors {
        put_u32(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        put_u32(&mut w, shape.len() as u32)?;
        for d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in data {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint, returning the model and the stored metadata.
pub fn read_checkpoint(mut r: impl Read) -> Result<(Model, serde_json::Value), ModelError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = get_u32(&mut r)? as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| bad(format!("header: {e}")))?;
    header.model.validate()?;
    header.representation.validate()?;

    let count = get_u32(&mut r)?;
    let mut tensors: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::new();
    for _ in 0..count {
        let n = get_u32(&mut r)? as usize;
        let mut name = vec![0u8; n];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let ndim = get_u32(&mut r)? as usize;
        let shape = (0..ndim)
            .map(|_| get_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let numel: usize = shape.iter().product();
        let mut raw = vec![0u8; numel * 4];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        tensors.insert(name, (shape, data));
    }

    let mut params = ModelParams::zeros(&header.model, header.representation.n_blk);
    let mut failure = None;
    let mut take = |name: &str, shape: &[usize]| -> Option<Vec<f64>> {
        match tensors.remove(name) {
            Some((s, data)) if s == shape => Some(data),
            Some((s, _)) => {
                failure.get_or_insert(bad(format!("{name}: shape {s:?}, expected {shape:?}")));
                None
            }
            None => {
                failure.get_or_insert(bad(format!("missing tensor {name}")));
                None
            }
        }
    };
    params.for_each_mut(|name, mut t| {
        if let Some(data) = take(&name, t.shape()) {
            t.iter_mut().zip(data).for_each(|(dst, v)| *dst = v);
        }
    });
    for (name, b) in params.buffers_mut() {
        if let Some(data) = take(&name, &[b.len()]) {
            b.iter_mut().zip(data).for_each(|(dst, v)| *dst = v);
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(bad(format!("unexpected tensor {extra}")));
    }
    Ok((
        Model {
            config: header.model,
            repr: header.representation,
            params,
        },
        header.metadata,
    ))
}

impl Model {
    pub fn save(&self, path: impl AsRef<Path>, metadata: &serde_json::Value) -> Result<(), ModelError> {
        write_checkpoint(self, metadata, BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, serde_json::Value), ModelError> {
        read_checkpoint(BufReader::new(File::open(path)?))
    }
}
