//! Trained-policy persistence.
//!
//! Layout: magic `QRLCKPT1`, little-endian `u32` metadata length, JSON
//! metadata, little-endian `f32` parameters, then the first 8 bytes of the
//! SHA-256 of the parameter bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{PolicyArch, PolicyParams};

pub const MAGIC: &[u8; 8] = b"QRLCKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub config: RunConfig,
    pub arch: PolicyArch,
    pub steps: u64,
    pub final_difficulty: usize,
    pub converged: bool,
    /// Written after an aborted run.
    pub partial: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: PolicyParams<f32>,
}

fn checksum(blob: &[u8]) -> [u8; 8] {
    let digest = Sha256::digest(blob);
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta, params: PolicyParams<f32>) -> Result<Self> {
        if meta.arch != *params.arch() {
            return Err(bad("metadata architecture differs from the parameters"));
        }
        Ok(Checkpoint { meta, params })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)?;
        let len = u32::try_from(meta.len()).map_err(|_| bad("metadata too large"))?;
        let mut blob = Vec::with_capacity(self.params.as_slice().len() * 4);
        for x in self.params.as_slice() {
            blob.extend_from_slice(&x.to_le_bytes());
        }
        let mut out = Vec::with_capacity(16 + meta.len() + blob.len() + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&blob);
        out.extend_from_slice(&checksum(&blob));
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let meta_end = 12usize.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated metadata"))?;
        let value: serde_json::Value =
            serde_json::from_slice(&bytes[12..meta_end]).map_err(|e| bad(format!("metadata is not JSON: {e}")))?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(FORMAT_VERSION as u64) {
            return Err(bad(format!(
                "unsupported format version {}; this build reads version {FORMAT_VERSION}",
                version.map_or("missing".to_string(), |v| v.to_string())
            )));
        }
        let meta: CheckpointMeta =
            serde_json::from_value(value).map_err(|e| bad(format!("invalid metadata: {e}")))?;
        let rest = &bytes[meta_end..];
        if rest.len() < 8 || !(rest.len() - 8).is_multiple_of(4) {
            return Err(bad("truncated parameter blob"));
        }
        let (blob, sum) = rest.split_at(rest.len() - 8);
        if checksum(blob) != sum {
            return Err(bad("parameter checksum mismatch"));
        }
        let data: Vec<f32> =
            blob.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        let expected = meta.arch.n_params();
        if data.len() != expected {
            return Err(bad(format!("blob holds {} parameters, architecture needs {expected}", data.len())));
        }
        let params = PolicyParams::from_vec(meta.arch.clone(), data)?;
        Ok(Checkpoint { meta, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Checkpoint::from_bytes(&bytes)
    }
}
