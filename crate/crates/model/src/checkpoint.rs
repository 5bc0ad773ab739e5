//! PGCK checkpoint container.
//!
//! Layout (little-endian):
//! ```text
//! magic "PGCK" | version u8 | meta_len u32 | meta (UTF-8 JSON)
//! then repeated records until EOF:
//!   name_len u16 | name | dtype u8 (0 = f32) | ndim u8 | dims u32 each
//!   | raw little-endian values
//! ```
//! Save followed by load restores every value bit-exactly.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::ModelError;
use crate::model::Model;

const MAGIC: &[u8; 4] = b"PGCK";
const VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;

/// JSON blob stored in every checkpoint. The `train` extension is owned by
/// the trainer; plain model checkpoints leave it empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Record {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Self {
        Record { name: name.into(), dims, data }
    }
}

pub fn write_checkpoint(
    path: &Path,
    meta: &CheckpointMeta,
    records: &[Record],
) -> Result<(), ModelError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let meta_json = serde_json::to_vec(meta)
        .map_err(|e| ModelError::Checkpoint(format!("meta serialization: {e}")))?;
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);

    for r in records {
        let numel: usize = r.dims.iter().product();
        if numel != r.data.len() {
            return Err(ModelError::Checkpoint(format!(
                "record {}: dims {:?} do not match {} values",
                r.name,
                r.dims,
                r.data.len()
            )));
        }
        if r.name.len() > u16::MAX as usize || r.dims.len() > u8::MAX as usize {
            return Err(ModelError::Checkpoint(format!("record {} exceeds format limits", r.name)));
        }
        out.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.push(DTYPE_F32);
        out.push(r.dims.len() as u8);
        for &d in &r.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointMeta, Vec<Record>), ModelError> {
    let bytes = std::fs::read(path)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], ModelError> {
        if *pos + n > bytes.len() {
            return Err(ModelError::Checkpoint(format!("truncated at offset {pos}")));
        }
        let out = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(out)
    };

    if take(&mut pos, 4)? != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let version = take(&mut pos, 1)?[0];
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let meta: CheckpointMeta = serde_json::from_slice(take(&mut pos, meta_len)?)
        .map_err(|e| ModelError::Checkpoint(format!("meta parse: {e}")))?;

    let mut records = Vec::new();
    while pos < bytes.len() {
        let name_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|e| ModelError::Checkpoint(format!("record name: {e}")))?;
        let dtype = take(&mut pos, 1)?[0];
        if dtype != DTYPE_F32 {
            return Err(ModelError::Checkpoint(format!("record {name}: unknown dtype {dtype}")));
        }
        let ndim = take(&mut pos, 1)?[0] as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize);
        }
        let numel: usize = dims.iter().product();
        let raw = take(&mut pos, numel * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push(Record { name, dims, data });
    }
    Ok((meta, records))
}

impl Model<f32> {
    /// All parameters and buffers as checkpoint records, in registration
    /// order.
    pub fn to_records(&self) -> Vec<Record> {
        let mut records = Vec::new();
        for p in self.named_parameters() {
            records.push(Record::new(p.name, p.tensor.shape().to_vec(), p.tensor.to_vec()));
        }
        for (name, buf) in self.named_buffers() {
            let data = buf.borrow().clone();
            let dims = vec![data.len()];
            records.push(Record::new(name, dims, data));
        }
        records
    }

    /// Writes a plain model checkpoint.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let meta = CheckpointMeta { model: self.config().clone(), train: None };
        write_checkpoint(path, &meta, &self.to_records())
    }

    /// Rebuilds a model from `meta.model` and fills every parameter and
    /// buffer from `records`. Records the model does not own (for example
    /// optimizer state) are returned untouched.
    pub fn from_records(
        meta: &CheckpointMeta,
        records: Vec<Record>,
    ) -> Result<(Self, Vec<Record>), ModelError> {
        let model = Model::new(meta.model.clone(), 0)?;
        let mut by_name: HashMap<String, Record> =
            records.into_iter().map(|r| (r.name.clone(), r)).collect();

        for p in model.named_parameters() {
            let r = by_name
                .remove(&p.name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing parameter {}", p.name)))?;
            if r.dims != p.tensor.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {}: stored dims {:?}, model expects {:?}",
                    p.name,
                    r.dims,
                    p.tensor.shape()
                )));
            }
            p.tensor.update_data(|dst| dst.copy_from_slice(&r.data));
        }
        for (name, buf) in model.named_buffers() {
            let r = by_name
                .remove(&name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing buffer {name}")))?;
            if r.data.len() != buf.borrow().len() {
                return Err(ModelError::Checkpoint(format!(
                    "buffer {name}: stored {} values, model expects {}",
                    r.data.len(),
                    buf.borrow().len()
                )));
            }
            buf.borrow_mut().copy_from_slice(&r.data);
        }

        let mut leftover: Vec<Record> = by_name.into_values().collect();
        leftover.sort_by(|a, b| a.name.cmp(&b.name));
        Ok((model, leftover))
    }

    /// Loads a model checkpoint written by [`Model::save`] (or by the
    /// trainer, whose extra records are ignored here).
    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta), ModelError> {
        let (meta, records) = read_checkpoint(path)?;
        let (model, _extra) = Model::from_records(&meta, records)?;
        Ok((model, meta))
    }
}
