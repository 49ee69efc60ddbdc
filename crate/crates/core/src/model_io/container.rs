//! Binary tensor container.
//!
//! Layout: an 8-byte little-endian `u64` header length `N`, then `N` bytes of
//! UTF-8 JSON, then the payload of raw little-endian `f32` values. The header
//! maps each tensor name to `{"dtype": "F32", "shape": [...], "data_offsets":
//! [begin, end]}` with offsets relative to the start of the payload. An
//! optional `"__metadata__"` entry of string pairs is accepted and ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const METADATA_KEY: &str = "__metadata__";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: [usize; 2],
}

/// Name-indexed tensors as stored in a container file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorContainer {
    tensors: BTreeMap<String, Tensor>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if name == METADATA_KEY {
            return Err(Error::Header(format!("'{METADATA_KEY}' is a reserved name")));
        }
        if self.tensors.contains_key(&name) {
            return Err(Error::Header(format!("duplicate tensor name '{name}'")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Serializes with tensors laid out in name order, so equal contents
    /// always produce equal bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = BTreeMap::new();
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            let len = t.len() * 4;
            header.insert(
                name.clone(),
                HeaderEntry {
                    dtype: "F32".into(),
                    shape: t.shape().to_vec(),
                    data_offsets: [offset, offset + len],
                },
            );
            offset += len;
        }
        let mut header_bytes =
            serde_json::to_vec(&header).expect("header map always serializes");
        // Pad with spaces so the payload starts 8-byte aligned.
        while (8 + header_bytes.len()) % 8 != 0 {
            header_bytes.push(b' ');
        }

        let mut out = Vec::with_capacity(8 + header_bytes.len() + offset);
        out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for t in self.tensors.values() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Header(format!(
                "file is {} bytes, too short for the 8-byte length prefix",
                bytes.len()
            )));
        }
        let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|n| n.checked_add(8))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| {
                Error::Header(format!(
                    "declared header length {header_len} exceeds file size {}",
                    bytes.len()
                ))
            })?;
        let text = std::str::from_utf8(&bytes[8..header_end])
            .map_err(|e| Error::Header(format!("header is not UTF-8: {e}")))?;
        let raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(text)
            .map_err(|e| Error::Header(format!("header is not a JSON object: {e}")))?;
        let payload = &bytes[header_end..];

        let mut entries = Vec::with_capacity(raw.len());
        for (name, value) in raw {
            if name == METADATA_KEY {
                continue;
            }
            let entry: HeaderEntry = serde_json::from_value(value)
                .map_err(|e| Error::Header(format!("entry '{name}': {e}")))?;
            entries.push((name, entry));
        }

        for (name, entry) in &entries {
            if entry.dtype != "F32" {
                return Err(Error::Dtype {
                    name: name.clone(),
                    dtype: entry.dtype.clone(),
                });
            }
            let [begin, end] = entry.data_offsets;
            if begin > end || end > payload.len() {
                return Err(Error::Bounds {
                    name: name.clone(),
                    begin,
                    end,
                    len: payload.len(),
                });
            }
            let count: usize = entry.shape.iter().product();
            if entry.shape.is_empty() || entry.shape.contains(&0) || end - begin != 4 * count {
                return Err(Error::Header(format!(
                    "tensor '{name}': byte range {begin}..{end} does not match shape {:?}",
                    entry.shape
                )));
            }
        }

        let mut ranges: Vec<(usize, usize, &str)> = entries
            .iter()
            .map(|(n, e)| (e.data_offsets[0], e.data_offsets[1], n.as_str()))
            .collect();
        ranges.sort_unstable();
        for pair in ranges.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::Header(format!(
                    "byte ranges of '{}' and '{}' overlap",
                    pair[0].2, pair[1].2
                )));
            }
        }

        let mut tensors = BTreeMap::new();
        for (name, entry) in entries {
            let [begin, end] = entry.data_offsets;
            let data = payload[begin..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let tensor = Tensor::new(entry.shape, data)
                .map_err(|e| Error::Header(format!("tensor '{name}': {e}")))?;
            tensors.insert(name, tensor);
        }
        Ok(TensorContainer { tensors })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}
