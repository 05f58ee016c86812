//! Binary parameter container.
//!
//! Layout: magic `DLP1`, a little-endian u64 giving the length of the JSON
//! index, the index itself, then the payload of raw little-endian 64-bit
//! floats. The index lists each tensor's name, shape, byte offset into the
//! payload, and element count:
//!
//! ```json
//! {"tensors": [{"name": "w", "shape": [2, 3], "offset": 0, "len": 6}]}
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autograd::Param;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"DLP1";

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the payload.
    offset: u64,
    /// Element count.
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct Index {
    tensors: Vec<IndexEntry>,
}

/// Write named tensors to `path` in the container format.
pub fn save_params(path: impl AsRef<Path>, entries: &[(String, Tensor)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut index = Index { tensors: Vec::with_capacity(entries.len()) };
    let mut offset = 0u64;
    for (name, t) in entries {
        index.tensors.push(IndexEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
            len: t.numel() as u64,
        });
        offset += 8 * t.numel() as u64;
    }
    let json = serde_json::to_vec(&index)?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for (_, t) in entries {
        for v in t.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Read every tensor from a container, in file order.
pub fn load_params(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let mut len_bytes = [0u8; 8];
    reader.read_exact(&mut len_bytes)?;
    let json_len = u64::from_le_bytes(len_bytes) as usize;
    let mut json = vec![0u8; json_len];
    reader.read_exact(&mut json)?;
    let index: Index = serde_json::from_slice(&json)?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;

    let mut out = Vec::with_capacity(index.tensors.len());
    for e in index.tensors {
        let numel: usize = e.shape.iter().product();
        if numel as u64 != e.len {
            return Err(Error::Format(format!(
                "entry {}: len {} does not match shape {:?}",
                e.name, e.len, e.shape
            )));
        }
        let start = e.offset as usize;
        let end = start + 8 * numel;
        if end > payload.len() {
            return Err(Error::Format(format!(
                "entry {}: payload range {start}..{end} out of bounds ({} bytes)",
                e.name,
                payload.len()
            )));
        }
        let data: Vec<f64> = payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        out.push((e.name, Tensor::new(&e.shape, data)?));
    }
    Ok(out)
}

/// Snapshot parameters (name, value) for saving.
pub fn entries_of(params: &[Param]) -> Vec<(String, Tensor)> {
    params.iter().map(|p| (p.name(), p.value())).collect()
}

/// Load a container into parameters by position, checking names and shapes.
pub fn restore_into(path: impl AsRef<Path>, params: &[Param]) -> Result<()> {
    let entries = load_params(path)?;
    if entries.len() != params.len() {
        return Err(Error::Format(format!(
            "container has {} tensors, expected {}",
            entries.len(),
            params.len()
        )));
    }
    for ((name, tensor), p) in entries.iter().zip(params) {
        if *name != p.name() {
            return Err(Error::Format(format!(
                "container entry {name:?} does not match parameter {:?}",
                p.name()
            )));
        }
        if tensor.shape() != p.shape() {
            return Err(Error::Format(format!(
                "entry {name:?} has shape {:?}, expected {:?}",
                tensor.shape(),
                p.shape()
            )));
        }
        p.set_value(tensor.clone());
    }
    Ok(())
}
