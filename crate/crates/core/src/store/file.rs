//! Append-only line-delimited persistence.
//!
//! Layout: `<root>/registry.jsonl` holds registry mutations in order;
//! `<root>/streams/<soId>.<streamId>.jsonl` holds one accepted update per
//! line. A torn trailing line (no newline) is dropped and truncated away
//! on open.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{DescriptorDoc, StreamRef, Subscription};

use super::StoreError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op")]
pub(crate) enum RegistryRecord {
    #[serde(rename = "putSO")]
    PutSo { so: DescriptorDoc },
    #[serde(rename = "deleteSO")]
    DeleteSo { id: String },
    #[serde(rename = "putSubscription")]
    PutSub { sub: Subscription },
    #[serde(rename = "deleteSubscription")]
    DeleteSub { id: String },
}

pub(crate) struct Journal {
    root: PathBuf,
    registry: File,
}

fn io(e: std::io::Error) -> StoreError {
    StoreError::Io(e.to_string())
}

/// Complete lines of `path`; truncates a torn trailing line in place.
pub(crate) fn read_complete_lines(path: &Path) -> Result<Vec<String>, StoreError> {
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes).map_err(io)?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(e)),
    }
    let valid = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
    if valid < bytes.len() {
        let f = OpenOptions::new().write(true).open(path).map_err(io)?;
        f.set_len(valid as u64).map_err(io)?;
    }
    let text = std::str::from_utf8(&bytes[..valid])
        .map_err(|e| StoreError::Corrupt(format!("{}: {e}", path.display())))?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_owned).collect())
}

impl Journal {
    pub(crate) fn open(root: &Path) -> Result<(Self, Vec<RegistryRecord>), StoreError> {
        fs::create_dir_all(root.join("streams")).map_err(io)?;
        let path = root.join("registry.jsonl");
        let records = read_complete_lines(&path)?
            .iter()
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line)
                    .map_err(|e| StoreError::Corrupt(format!("registry.jsonl line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let registry = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok((
            Self {
                root: root.to_owned(),
                registry,
            },
            records,
        ))
    }

    pub(crate) fn record(&mut self, rec: &RegistryRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(rec).map_err(|e| StoreError::Io(e.to_string()))?;
        line.push(b'\n');
        self.registry.write_all(&line).map_err(io)
    }

    pub(crate) fn stream_path(&self, r: &StreamRef) -> PathBuf {
        self.root
            .join("streams")
            .join(format!("{}.{}.jsonl", r.so_id, r.stream_id))
    }

    pub(crate) fn open_stream(&self, r: &StreamRef) -> Result<File, StoreError> {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.stream_path(r))
            .map_err(io)
    }

    pub(crate) fn remove_stream(&self, r: &StreamRef) -> Result<(), StoreError> {
        match fs::remove_file(self.stream_path(r)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io(e)),
            _ => Ok(()),
        }
    }
}
