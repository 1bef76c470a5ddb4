//! On-disk dataset layout.
//!
//! A dataset directory holds one subdirectory per sequence:
//!
//! ```text
//! <dir>/seq_0000/manifest.json   versioned extents, seed, generator params
//! <dir>/seq_0000/slices.f32      row-major [D][H][W] little-endian float32
//! <dir>/seq_0000/labels.csv      header `k,d,w,row`, one row per label
//! ```
//!
//! Writes and reads round-trip bit-exactly: pixels are stored in their
//! native f32 encoding and label rows use shortest round-trip decimal form.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GenParams, TomoSequence};
use crate::error::{Error, Result};

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    id: String,
    depth: usize,
    height: usize,
    width: usize,
    layers: usize,
    params: GenParams,
}

/// Write one sequence into `dir` (created if needed).
pub fn save_sequence(dir: &Path, seq: &TomoSequence) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        id: seq.id.clone(),
        depth: seq.depth,
        height: seq.height,
        width: seq.width,
        layers: seq.layers,
        params: seq.params.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json)?;

    let mut slice_file = BufWriter::new(fs::File::create(dir.join("slices.f32"))?);
    for &p in &seq.slices {
        slice_file.write_all(&p.to_le_bytes())?;
    }
    slice_file.flush()?;

    let mut labels = BufWriter::new(fs::File::create(dir.join("labels.csv"))?);
    writeln!(labels, "k,d,w,row")?;
    for k in 0..seq.layers {
        for d in 0..seq.depth {
            for w in 0..seq.width {
                writeln!(labels, "{k},{d},{w},{}", seq.label(k, d, w))?;
            }
        }
    }
    labels.flush()?;
    Ok(())
}

/// Read one sequence directory written by [`save_sequence`].
pub fn load_sequence(dir: &Path) -> Result<TomoSequence> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(Error::Dataset(format!(
            "unsupported manifest version {} in {}",
            manifest.format_version,
            manifest_path.display()
        )));
    }
    let expected_px = manifest.depth * manifest.height * manifest.width;
    let mut bytes = Vec::with_capacity(expected_px * 4);
    fs::File::open(dir.join("slices.f32"))?.read_to_end(&mut bytes)?;
    if bytes.len() != expected_px * 4 {
        return Err(Error::Dataset(format!(
            "slices.f32 holds {} bytes, expected {}",
            bytes.len(),
            expected_px * 4
        )));
    }
    let slices: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let mut labels = vec![f64::NAN; manifest.layers * manifest.depth * manifest.width];
    let reader = BufReader::new(fs::File::open(dir.join("labels.csv"))?);
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line_no == 0 {
            if line.trim() != "k,d,w,row" {
                return Err(Error::Dataset(format!("bad labels.csv header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        fn field(s: Option<&str>, line_no: usize) -> Result<&str> {
            s.ok_or_else(|| Error::Dataset(format!("labels.csv line {line_no}: short row")))
        }
        let mut parts = line.splitn(4, ',');
        let k: usize = field(parts.next(), line_no)?
            .parse()
            .map_err(|e| Error::Dataset(format!("labels.csv line {line_no}: {e}")))?;
        let d: usize = field(parts.next(), line_no)?
            .parse()
            .map_err(|e| Error::Dataset(format!("labels.csv line {line_no}: {e}")))?;
        let w: usize = field(parts.next(), line_no)?
            .parse()
            .map_err(|e| Error::Dataset(format!("labels.csv line {line_no}: {e}")))?;
        let row: f64 = field(parts.next(), line_no)?
            .parse()
            .map_err(|e| Error::Dataset(format!("labels.csv line {line_no}: {e}")))?;
        if k >= manifest.layers || d >= manifest.depth || w >= manifest.width {
            return Err(Error::Dataset(format!(
                "label index ({k},{d},{w}) outside extents"
            )));
        }
        labels[(k * manifest.depth + d) * manifest.width + w] = row;
    }
    if labels.iter().any(|v| v.is_nan()) {
        return Err(Error::Dataset("labels.csv is missing entries".into()));
    }
    Ok(TomoSequence {
        id: manifest.id,
        slices,
        labels,
        depth: manifest.depth,
        height: manifest.height,
        width: manifest.width,
        layers: manifest.layers,
        params: manifest.params,
    })
}

/// Write sequences as `seq_0000`, `seq_0001`, ... under `dir`.
pub fn save_dataset(dir: &Path, seqs: &[TomoSequence]) -> Result<()> {
    for (i, seq) in seqs.iter().enumerate() {
        save_sequence(&dir.join(format!("seq_{i:04}")), seq)?;
    }
    Ok(())
}

/// Load every `seq_*` subdirectory of `dir`, in name order.
pub fn load_dataset(dir: &Path) -> Result<Vec<TomoSequence>> {
    let mut names: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter(|e| e.file_name().to_string_lossy().starts_with("seq_"))
        .map(|e| e.path())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Dataset(format!(
            "no seq_* directories under {}",
            dir.display()
        )));
    }
    names.iter().map(|p| load_sequence(p)).collect()
}
