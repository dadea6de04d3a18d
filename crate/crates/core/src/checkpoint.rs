//! Versioned binary checkpoint container.
//!
//! Layout: magic `TGLG`, format version u32 LE, length-prefixed
//! canonical-JSON header (config, variant, vocabularies, digests, validation
//! metrics), then per-tensor records sorted by name: length-prefixed name,
//! shape as u64 LE pair, little-endian f64 payload. Save -> load -> save is
//! byte-identical.

use crate::config::{TrainConfig, Variant};
use crate::corpus::{Interner, Vocab};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"TGLG";
pub const FORMAT_VERSION: u32 = 1;

/// Validation metrics recorded for the retained parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    pub k: usize,
    pub hit_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    variant: Variant,
    hashtags: Vec<String>,
    users: Vec<String>,
    languages: Vec<String>,
    graph_digest: Option<u64>,
    split_digest: u64,
    best_epoch: Option<usize>,
    val_metrics: Option<ValMetrics>,
}

/// Everything needed to restore and evaluate a trained model.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub variant: Variant,
    pub vocab: Vocab,
    pub graph_digest: Option<u64>,
    pub split_digest: u64,
    pub best_epoch: Option<usize>,
    pub val_metrics: Option<ValMetrics>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    /// Restore a parameter store holding these tensors.
    pub fn to_store(&self) -> ParamStore {
        let mut store = ParamStore::new();
        for (name, tensor) in &self.tensors {
            store.register(name, tensor.clone());
        }
        store
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.config.clone(),
            variant: self.variant,
            hashtags: self.vocab.hashtags.strings().to_vec(),
            users: self.vocab.users.strings().to_vec(),
            languages: self.vocab.languages.strings().to_vec(),
            graph_digest: self.graph_digest,
            split_digest: self.split_digest,
            best_epoch: self.best_epoch,
            val_metrics: self.val_metrics,
        };
        // Canonical JSON: routing through Value sorts object keys.
        let value = serde_json::to_value(&header).expect("header serializes");
        let header_json = serde_json::to_string(&value).expect("value serializes");

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(header_json.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, tensor) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(tensor.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(tensor.cols() as u64).to_le_bytes());
            for v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = std::io::Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cursor
            .read_exact(&mut magic)
            .map_err(|_| Error::data("checkpoint too short"))?;
        if &magic != MAGIC {
            return Err(Error::data("not a checkpoint file (bad magic)"));
        }
        let version = read_u32(&mut cursor)?;
        if version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let header_len = read_u64(&mut cursor)? as usize;
        let mut header_bytes = vec![0u8; header_len];
        cursor
            .read_exact(&mut header_bytes)
            .map_err(|_| Error::data("truncated checkpoint header"))?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::data(format!("bad checkpoint header: {e}")))?;

        let n_tensors = read_u32(&mut cursor)? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..n_tensors {
            let name_len = read_u32(&mut cursor)? as usize;
            let mut name_bytes = vec![0u8; name_len];
            cursor
                .read_exact(&mut name_bytes)
                .map_err(|_| Error::data("truncated tensor name"))?;
            let name = String::from_utf8(name_bytes)
                .map_err(|_| Error::data("tensor name is not UTF-8"))?;
            let rows = read_u64(&mut cursor)? as usize;
            let cols = read_u64(&mut cursor)? as usize;
            let mut data = vec![0.0f64; rows * cols];
            for v in &mut data {
                let mut buf = [0u8; 8];
                cursor
                    .read_exact(&mut buf)
                    .map_err(|_| Error::data("truncated tensor payload"))?;
                *v = f64::from_le_bytes(buf);
            }
            tensors.insert(name, Tensor::from_vec(rows, cols, data));
        }

        Ok(Checkpoint {
            config: header.config,
            variant: header.variant,
            vocab: Vocab {
                hashtags: Interner::from_strings(header.hashtags),
                users: Interner::from_strings(header.users),
                languages: Interner::from_strings(header.languages),
            },
            graph_digest: header.graph_digest,
            split_digest: header.split_digest,
            best_epoch: header.best_epoch,
            val_metrics: header.val_metrics,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::data(format!("cannot write checkpoint {}: {e}", path.display())))?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::data(format!("cannot read checkpoint {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

fn read_u32(cursor: &mut std::io::Cursor<&[u8]>) -> Result<u32> {
    let mut buf = [0u8; 4];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::data("truncated checkpoint"))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(cursor: &mut std::io::Cursor<&[u8]>) -> Result<u64> {
    let mut buf = [0u8; 8];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::data("truncated checkpoint"))?;
    Ok(u64::from_le_bytes(buf))
}
