//! Photo codes keyed by photo id.
//!
//! Binary layout (little-endian):
//! - magic `ELVF`, version `u32` (1), dim `u32`
//! - records: id length `u16`, UTF-8 id bytes, `dim` × `f32`
//!
//! A JSON-lines file of `{"photo_id": ..., "features": [...]}` objects is
//! accepted with the same validation rules.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"ELVF";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    photo_id: String,
    features: Vec<f32>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::FeatureFormat("dim must be positive".into()));
        }
        Ok(FeatureStore {
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Photo ids in insertion order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn insert(&mut self, photo_id: impl Into<String>, vector: &[f32]) -> Result<()> {
        let photo_id = photo_id.into();
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("features of photo {photo_id:?}")));
        }
        if self.index.contains_key(&photo_id) {
            return Err(Error::DuplicateFeature(photo_id));
        }
        self.index.insert(photo_id.clone(), self.ids.len());
        self.ids.push(photo_id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn get(&self, photo_id: &str) -> Option<&[f32]> {
        self.index
            .get(photo_id)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn require(&self, photo_id: &str) -> Result<&[f32]> {
        self.get(photo_id)
            .ok_or_else(|| Error::MissingFeature(photo_id.to_string()))
    }

    pub fn to_elvf_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.data.len() * 4 + self.ids.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for (i, id) in self.ids.iter().enumerate() {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_elvf_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::FeatureFormat(msg.to_string());
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing ELVF header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::FeatureFormat(format!(
                "unsupported version {version}"
            )));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut store = FeatureStore::new(dim)?;
        let mut pos = 12;
        let mut vector = vec![0f32; dim];
        while pos < bytes.len() {
            let id_len = bytes
                .get(pos..pos + 2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]) as usize)
                .ok_or_else(|| bad("truncated record header"))?;
            pos += 2;
            let id = bytes
                .get(pos..pos + id_len)
                .ok_or_else(|| bad("truncated photo id"))?;
            let id = std::str::from_utf8(id).map_err(|_| bad("photo id is not UTF-8"))?;
            pos += id_len;
            let body = bytes.get(pos..pos + 4 * dim).ok_or_else(|| {
                Error::FeatureFormat(format!("record {id:?} shorter than header dim {dim}"))
            })?;
            for (v, c) in vector.iter_mut().zip(body.chunks_exact(4)) {
                *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            }
            pos += 4 * dim;
            store.insert(id, &vector)?;
        }
        Ok(store)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut store: Option<FeatureStore> = None;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: JsonRecord = serde_json::from_str(line)
                .map_err(|e| Error::FeatureFormat(format!("line {}: {e}", n + 1)))?;
            let store = match &mut store {
                Some(s) => s,
                None => store.insert(FeatureStore::new(rec.features.len())?),
            };
            store.insert(rec.photo_id, &rec.features)?;
        }
        store.ok_or_else(|| Error::FeatureFormat("JSON-lines file has no records".into()))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, id) in self.ids.iter().enumerate() {
            let rec = JsonRecord {
                photo_id: id.clone(),
                features: self.data[i * self.dim..(i + 1) * self.dim].to_vec(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("plain struct serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_elvf(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
        w.write_all(&self.to_elvf_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Load a feature file, detecting the binary format by its magic bytes and
/// falling back to JSON lines otherwise.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        FeatureStore::from_elvf_bytes(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::FeatureFormat("neither ELVF nor UTF-8 JSON lines".into()))?;
        FeatureStore::from_jsonl(text)
    }
}
