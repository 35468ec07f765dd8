//! Binary checkpoint container.
//!
//! Layout:
//!
//! ```text
//! b"STYLEDIT"            8-byte magic
//! u32 LE                 format version (currently 1)
//! u64 LE                 header length in bytes
//! header                 UTF-8 JSON: {kind, vocab_hash, meta, arrays: [{name, rows, cols}]}
//! f64 LE * sum(rows*cols) array payloads, in header order
//! ```
//!
//! Values are stored bit-exactly so a resumed run continues identically.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autograd::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"STYLEDIT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArrayHeader {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    vocab_hash: String,
    meta: serde_json::Value,
    arrays: Vec<ArrayHeader>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub vocab_hash: String,
    /// Free-form snapshot (typically the configuration that produced it).
    pub meta: serde_json::Value,
    pub arrays: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(kind: &str, vocab_hash: &str, meta: serde_json::Value) -> Self {
        Checkpoint {
            kind: kind.to_string(),
            vocab_hash: vocab_hash.to_string(),
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn extend(&mut self, arrays: impl IntoIterator<Item = (String, Tensor)>) {
        self.arrays.extend(arrays);
    }

    pub fn map(&self) -> HashMap<String, Tensor> {
        self.arrays.iter().cloned().collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            kind: self.kind.clone(),
            vocab_hash: self.vocab_hash.clone(),
            meta: self.meta.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|(name, t)| ArrayHeader {
                    name: name.clone(),
                    rows: t.rows,
                    cols: t.cols,
                })
                .collect(),
        };
        let hjson = serde_json::to_vec(&header)?;
        let payload: usize = self.arrays.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(20 + hjson.len() + 8 * payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(hjson.len() as u64).to_le_bytes());
        out.extend_from_slice(&hjson);
        for (_, t) in &self.arrays {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let hend = 20usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[20..hend])?;
        let mut off = hend;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for a in header.arrays {
            let n = a.rows * a.cols;
            let end = off + 8 * n;
            if end > bytes.len() {
                return Err(Error::Checkpoint(format!("truncated payload for {}", a.name)));
            }
            let data = bytes[off..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            off = end;
            arrays.push((
                a.name,
                Tensor {
                    rows: a.rows,
                    cols: a.cols,
                    data,
                },
            ));
        }
        if off != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Checkpoint {
            kind: header.kind,
            vocab_hash: header.vocab_hash,
            meta: header.meta,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn expect(&self, kind: &str, vocab_hash: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "expected a {kind} checkpoint, found {}",
                self.kind
            )));
        }
        if self.vocab_hash != vocab_hash {
            return Err(Error::Checkpoint(format!(
                "{kind} checkpoint was built with a different vocabulary"
            )));
        }
        Ok(())
    }
}
