//! Versioned binary checkpoint container.
//!
//! ```text
//! 8 bytes   magic "TSEGCKPT"
//! 4 bytes   container version, little-endian u32
//! 8 bytes   JSON header length, little-endian u64
//! N bytes   JSON header: architecture config, pixel mean, tensor index
//! ...       raw little-endian scalar payload, tensors in index order
//! ```
//!
//! Loading rebuilds the model from the header's config and fills every
//! parameter from the payload; round-trips are bit-exact.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CombinedModel, ModelConfig};
use crate::tensor::Scalar;

const MAGIC: &[u8; 8] = b"TSEGCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    /// Offset into the payload, in elements.
    offset: u64,
    /// Element count.
    len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    scalar_bits: u32,
    config: ModelConfig,
    pixel_mean: Option<f64>,
    tensors: Vec<TensorEntry>,
}

fn scalar_bits() -> u32 {
    (std::mem::size_of::<Scalar>() * 8) as u32
}

fn dtype_name() -> String {
    format!("f{}", scalar_bits())
}

/// Write the model's parameters and normalization state to `path`.
pub fn save_checkpoint(path: &Path, model: &CombinedModel, pixel_mean: Option<Scalar>) -> Result<()> {
    let params = model.named_params();
    let mut tensors = Vec::with_capacity(params.len());
    let mut offset = 0u64;
    for (name, t) in &params {
        tensors.push(TensorEntry {
            name: name.clone(),
            dtype: dtype_name(),
            shape: t.shape().to_vec(),
            offset,
            len: t.numel() as u64,
        });
        offset += t.numel() as u64;
    }
    let header = Header {
        format_version: VERSION,
        scalar_bits: scalar_bits(),
        config: model.config().clone(),
        #[allow(clippy::unnecessary_cast)] // Scalar is f32 under the `f32` feature
        pixel_mean: pixel_mean.map(|m| m as f64),
        tensors,
    };
    let header_json = serde_json::to_vec(&header)?;

    let mut file = BufWriter::new(fs::File::create(path)?);
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(header_json.len() as u64).to_le_bytes())?;
    file.write_all(&header_json)?;
    for (_, t) in &params {
        for v in t.data().iter() {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    file.flush()?;
    Ok(())
}

/// Load a checkpoint: the rebuilt model and the stored pixel mean.
pub fn load_checkpoint(path: &Path) -> Result<(CombinedModel, Option<Scalar>)> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint".into()));
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported container version {version}"
        )));
    }
    let mut long = [0u8; 8];
    file.read_exact(&mut long)?;
    let header_len = u64::from_le_bytes(long) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.scalar_bits != scalar_bits() {
        return Err(Error::Checkpoint(format!(
            "checkpoint stores {}-bit scalars but this build uses {}-bit",
            header.scalar_bits,
            scalar_bits()
        )));
    }

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    let width = std::mem::size_of::<Scalar>();
    let total_elems: u64 = header.tensors.iter().map(|t| t.len).sum();
    if payload.len() != total_elems as usize * width {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            total_elems as usize * width
        )));
    }

    // The model is rebuilt from the stored config; the init seed is
    // irrelevant because every parameter is overwritten below.
    let model = CombinedModel::new(&header.config, 0)?;
    let params = model.named_params();
    if params.len() != header.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "architecture mismatch: model has {} tensors, checkpoint {}",
            params.len(),
            header.tensors.len()
        )));
    }
    for ((name, tensor), entry) in params.iter().zip(header.tensors.iter()) {
        if entry.dtype != dtype_name() {
            return Err(Error::Checkpoint(format!(
                "tensor {} stored as {}, expected {}",
                entry.name,
                entry.dtype,
                dtype_name()
            )));
        }
        if *name != entry.name || tensor.shape() != entry.shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "architecture mismatch at {name}: checkpoint holds {} {:?}",
                entry.name, entry.shape
            )));
        }
        let start = entry.offset as usize * width;
        let end = start + entry.len as usize * width;
        let values: Vec<Scalar> = payload[start..end]
            .chunks_exact(width)
            .map(|c| {
                let mut buf = [0u8; std::mem::size_of::<Scalar>()];
                buf.copy_from_slice(c);
                Scalar::from_le_bytes(buf)
            })
            .collect();
        tensor.set_data(&values)?;
    }
    #[allow(clippy::unnecessary_cast)] // Scalar is f32 under the `f32` feature
    Ok((model, header.pixel_mean.map(|m| m as Scalar)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Mode;

    fn tiny_config(mode: Mode) -> ModelConfig {
        ModelConfig {
            boundary_count: 2,
            window_len: 3,
            height: 8,
            width: 4,
            shared_channels: [2, 2],
            branch_channels: [2; 6],
            hidden: 6,
            ..ModelConfig::new(mode)
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let cfg = tiny_config(Mode::C3dRnn);
        let model = CombinedModel::new(&cfg, 42).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.ckpt");
        save_checkpoint(&path, &model, Some(0.123456789)).unwrap();
        let (loaded, mean) = load_checkpoint(&path).unwrap();
        assert_eq!(mean, Some(0.123456789));
        assert_eq!(loaded.config(), model.config());
        let a = model.flat_params();
        let b = loaded.flat_params();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("junk.ckpt");
        std::fs::write(&path, b"NOTACKPT0000").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn truncated_payload_rejected() {
        let cfg = tiny_config(Mode::Rnn);
        let model = CombinedModel::new(&cfg, 1).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.ckpt");
        save_checkpoint(&path, &model, None).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Checkpoint(_))
        ));
    }
}
