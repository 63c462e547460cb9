//! The on-disk model format.
//!
//! A model file carries everything needed to run one model against a live
//! stream: the structural spec, the scaling pairs it was trained under, and
//! the trained tensors. Layout (little-endian throughout):
//!
//! ```text
//! magic        4 bytes   "SNTL"
//! version      u16       currently 1; readers reject anything else
//! meta length  u32
//! meta         UTF-8 JSON (id, seed, spec, input/output scaling)
//! tensor count u32       must match the spec's layout
//! per tensor:
//!   name length  u16
//!   name         UTF-8
//!   rank         u8
//!   dims         rank x u32
//!   payload      prod(dims) x f32
//! ```
//!
//! Tensors appear in the spec's canonical layout order and their names and
//! dimensions are validated against it on read, so a file cannot silently
//! permute or resize anything. Payloads are stored as 32-bit floats; writing
//! rounds the in-memory 64-bit values once, deterministically.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sentinel_core::datasets::ScalingPair;
use sentinel_core::network::{count_parameters, Layout, ModelParams, ModelSpec};
use sentinel_core::runtime::{ModelId, ModelRegistration};

/// File magic.
pub const MAGIC: [u8; 4] = *b"SNTL";
/// The only format version this build reads and writes.
pub const FORMAT_VERSION: u16 = 1;

/// Everything a model file stores besides the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    /// Engine-unique id the model registers under.
    pub id: ModelId,
    /// Seed the parameters were initialised from.
    pub seed: u64,
    /// Structural spec; tensor names and shapes derive from it.
    pub spec: ModelSpec,
    /// Scaling for each input signal, in spec order.
    pub input_scaling: Vec<ScalingPair>,
    /// Scaling for the predicted signal.
    pub output_scaling: ScalingPair,
}

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    /// Engine-unique id.
    pub id: ModelId,
    /// Trained parameters (carrying the structural spec).
    pub params: ModelParams,
    /// Scaling for each input signal, in spec order.
    pub input_scaling: Vec<ScalingPair>,
    /// Scaling for the predicted signal.
    pub output_scaling: ScalingPair,
}

impl ModelFile {
    /// The registration this file describes.
    pub fn into_registration(self) -> ModelRegistration {
        ModelRegistration {
            id: self.id,
            params: self.params,
            input_scaling: self.input_scaling,
            output_scaling: self.output_scaling,
        }
    }
}

/// Why a model file failed to read or write.
#[derive(Debug, Error)]
pub enum ModelFileError {
    /// Underlying IO failure.
    #[error("io: {0}")]
    Io(#[from] io::Error),
    /// The file does not start with the `SNTL` magic.
    #[error("not a model file (bad magic)")]
    BadMagic,
    /// The file declares a version this build does not understand.
    #[error("unknown model format version {0} (this build reads {FORMAT_VERSION})")]
    UnknownVersion(u16),
    /// The metadata block is not valid JSON for [`ModelMeta`].
    #[error("bad metadata block: {0}")]
    BadMeta(#[source] serde_json::Error),
    /// The file ended before the declared content did.
    #[error("file truncated in {0}")]
    Truncated(&'static str),
    /// Scaling pair count does not match the spec's input count.
    #[error("expected {expected} input scaling pairs, file has {got}")]
    ScalingCount { expected: usize, got: usize },
    /// Tensor count does not match the spec's layout.
    #[error("expected {expected} tensors, file declares {got}")]
    TensorCount { expected: usize, got: usize },
    /// A tensor's name or shape disagrees with the spec's layout.
    #[error("tensor {index}: expected {expected}, file has {got}")]
    TensorMismatch {
        index: usize,
        expected: String,
        got: String,
    },
    /// A tensor payload contains a non-finite value.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// The assembled parameters were rejected by the spec.
    #[error("parameters rejected: {0}")]
    BadParams(String),
}

/// Serialises a model to `path`. The output is a pure function of the
/// arguments, so identical models yield byte-identical files.
pub fn write_model(path: &Path, model: &ModelFile) -> Result<(), ModelFileError> {
    let spec = model.params.spec();
    if model.input_scaling.len() != spec.input_signals.len() {
        return Err(ModelFileError::ScalingCount {
            expected: spec.input_signals.len(),
            got: model.input_scaling.len(),
        });
    }
    let meta = ModelMeta {
        id: model.id,
        seed: model.params.seed(),
        spec: spec.clone(),
        input_scaling: model.input_scaling.clone(),
        output_scaling: model.output_scaling,
    };
    let meta_json =
        serde_json::to_vec(&meta).expect("model metadata serialises infallibly");

    let layout = model.params.layout();
    let values = model.params.values();
    if !values.iter().all(|v| v.is_finite()) {
        return Err(ModelFileError::NonFinite("tensor payload"));
    }

    let mut out: Vec<u8> = Vec::with_capacity(16 + meta_json.len() + values.len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(layout.tensors().len() as u32).to_le_bytes());
    for def in layout.tensors() {
        out.extend_from_slice(&(def.name.len() as u16).to_le_bytes());
        out.extend_from_slice(def.name.as_bytes());
        out.push(def.dims.len() as u8);
        for &d in &def.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &values[def.offset..def.offset + def.len()] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads and validates a model file.
pub fn read_model(path: &Path) -> Result<ModelFile, ModelFileError> {
    let bytes = fs::read(path)?;
    read_model_bytes(&bytes)
}

/// Parses a model file image.
pub fn read_model_bytes(bytes: &[u8]) -> Result<ModelFile, ModelFileError> {
    let mut r = Cursor { bytes, pos: 0 };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::UnknownVersion(version));
    }

    let meta_len = r.u32("metadata length")? as usize;
    let meta_bytes = r.take(meta_len, "metadata")?;
    let meta: ModelMeta =
        serde_json::from_slice(meta_bytes).map_err(ModelFileError::BadMeta)?;
    if meta.input_scaling.len() != meta.spec.input_signals.len() {
        return Err(ModelFileError::ScalingCount {
            expected: meta.spec.input_signals.len(),
            got: meta.input_scaling.len(),
        });
    }

    let layout = Layout::for_spec(&meta.spec);
    let declared = r.u32("tensor count")? as usize;
    if declared != layout.tensors().len() {
        return Err(ModelFileError::TensorCount {
            expected: layout.tensors().len(),
            got: declared,
        });
    }

    let mut values = vec![0.0f64; count_parameters(&meta.spec)];
    for (index, def) in layout.tensors().iter().enumerate() {
        let name_len = r.u16("tensor name length")? as usize;
        let name_bytes = r.take(name_len, "tensor name")?;
        let name = std::str::from_utf8(name_bytes).unwrap_or("<invalid utf-8>");
        let rank = r.u8("tensor rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("tensor dim")? as usize);
        }
        if name != def.name || dims != def.dims {
            return Err(ModelFileError::TensorMismatch {
                index,
                expected: format!("{} {:?}", def.name, def.dims),
                got: format!("{name} {dims:?}"),
            });
        }
        let len = def.len();
        let payload = r.take(len * 4, "tensor payload")?;
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("chunk is 4 bytes")) as f64;
            if !v.is_finite() {
                return Err(ModelFileError::NonFinite("tensor payload"));
            }
            values[def.offset + i] = v;
        }
    }

    let params = ModelParams::from_values(meta.spec, meta.seed, values)
        .map_err(|e| ModelFileError::BadParams(e.to_string()))?;
    Ok(ModelFile {
        id: meta.id,
        params,
        input_scaling: meta.input_scaling,
        output_scaling: meta.output_scaling,
    })
}

/// Writes scaling pairs as a standalone text table: one `name q_low q_high`
/// line per signal, tab-separated.
pub fn write_scaling_table(
    path: &Path,
    rows: &[(String, ScalingPair)],
) -> Result<(), ModelFileError> {
    let mut out = String::from("signal\tq_low\tq_high\n");
    for (name, pair) in rows {
        out.push_str(&format!("{name}\t{}\t{}\n", pair.q_low, pair.q_high));
    }
    fs::write(path, out)?;
    Ok(())
}

/// A bounds-checked little-endian byte reader.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ModelFileError> {
        if self.pos + n > self.bytes.len() {
            return Err(ModelFileError::Truncated(what));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ModelFileError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, ModelFileError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ModelFileError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
