//! The descriptor store: a dense little-endian f64 matrix with a JSON
//! header naming the block layout and row keys.
//!
//! Layout on disk:
//!   bytes 0..8    magic "IDSTORE1"
//!   bytes 8..16   u64 LE header length in bytes
//!   header        UTF-8 JSON (version, blocks, provenance, keys)
//!   payload       keys.len() * total_dim f64 values, little endian

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DescriptorLayout, DescriptorVector};

const MAGIC: &[u8; 8] = b"IDSTORE1";

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    blocks: Vec<BlockSpec>,
    provenance: BTreeMap<String, String>,
    keys: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct BlockSpec {
    name: String,
    dim: usize,
}

/// In-memory store of descriptor rows sharing one layout.
#[derive(Debug, Clone)]
pub struct DescriptorStore {
    layout: Arc<DescriptorLayout>,
    provenance: BTreeMap<String, String>,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl DescriptorStore {
    pub fn new(layout: Arc<DescriptorLayout>, provenance: BTreeMap<String, String>) -> Self {
        Self {
            layout,
            provenance,
            keys: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn layout(&self) -> &Arc<DescriptorLayout> {
        &self.layout
    }

    pub fn provenance(&self) -> &BTreeMap<String, String> {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    /// Appends one row. Keys are unique; values must match the layout width
    /// and be finite.
    pub fn push_row(&mut self, key: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let key = key.into();
        if self.index.contains_key(&key) {
            return Err(Error::validation(
                format!("store row {key:?}"),
                "duplicate row key",
            ));
        }
        if values.len() != self.layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.total_dim(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::validation(
                format!("store row {key:?}"),
                "descriptor values must be finite",
            ));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.data.extend_from_slice(&values);
        Ok(())
    }

    /// Row by key as a descriptor sharing the store's layout.
    pub fn get(&self, key: &str) -> Option<DescriptorVector> {
        let &row = self.index.get(key)?;
        let dim = self.layout.total_dim();
        let values = self.data[row * dim..(row + 1) * dim].to_vec();
        Some(DescriptorVector::from_flat(self.layout.clone(), values).expect("row width matches"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            version: 1,
            blocks: self
                .layout
                .names()
                .iter()
                .zip(self.layout.dims())
                .map(|(name, &dim)| BlockSpec {
                    name: name.clone(),
                    dim,
                })
                .collect(),
            provenance: self.provenance.clone(),
            keys: self.keys.clone(),
        };
        let header_bytes = serde_json::to_vec(&header).expect("header serializes");

        let mut out =
            Vec::with_capacity(16 + header_bytes.len() + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let parse_err = |message: &str| Error::Parse {
            path: path.display().to_string(),
            message: message.to_string(),
        };
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(parse_err("not a descriptor store (bad magic)"));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if bytes.len() < 16 + header_len {
            return Err(parse_err("truncated header"));
        }
        let header: Header = serde_json::from_slice(&bytes[16..16 + header_len])
            .map_err(|e| parse_err(&format!("bad header: {e}")))?;
        let layout = Arc::new(DescriptorLayout::new(
            &header
                .blocks
                .iter()
                .map(|b| (b.name.clone(), b.dim))
                .collect::<Vec<_>>(),
        )?);

        let payload = &bytes[16 + header_len..];
        let expected = header.keys.len() * layout.total_dim() * 8;
        if payload.len() != expected {
            return Err(parse_err(&format!(
                "payload size {} does not match {} rows of width {}",
                payload.len(),
                header.keys.len(),
                layout.total_dim()
            )));
        }
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if !data.iter().all(|v| v.is_finite()) {
            return Err(parse_err("descriptor payload contains non-finite values"));
        }

        let mut index = HashMap::with_capacity(header.keys.len());
        for (i, key) in header.keys.iter().enumerate() {
            if index.insert(key.clone(), i).is_some() {
                return Err(parse_err(&format!("duplicate row key {key:?}")));
            }
        }
        Ok(Self {
            layout,
            provenance: header.provenance,
            keys: header.keys,
            index,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Arc<DescriptorLayout> {
        Arc::new(
            DescriptorLayout::new(&[("aspect".to_string(), 1), ("u".to_string(), 3)]).unwrap(),
        )
    }

    #[test]
    fn push_get_round_trip() {
        let mut store = DescriptorStore::new(layout(), BTreeMap::new());
        store.push_row("a#0", vec![1.5, 0.25, -3.0, 7.0]).unwrap();
        let d = store.get("a#0").unwrap();
        assert_eq!(d.values(), &[1.5, 0.25, -3.0, 7.0]);
        assert_eq!(d.block("u"), Some(&[0.25, -3.0, 7.0][..]));
        assert!(store.get("missing").is_none());
    }

    #[test]
    fn duplicate_key_rejected() {
        let mut store = DescriptorStore::new(layout(), BTreeMap::new());
        store.push_row("k", vec![0.0; 4]).unwrap();
        assert!(store.push_row("k", vec![0.0; 4]).is_err());
    }

    #[test]
    fn wrong_width_rejected() {
        let mut store = DescriptorStore::new(layout(), BTreeMap::new());
        assert!(matches!(
            store.push_row("k", vec![0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn save_load_bit_exact() {
        let mut provenance = BTreeMap::new();
        provenance.insert("hog".to_string(), "80x80 cell 8".to_string());
        let mut store = DescriptorStore::new(layout(), provenance);
        // Values chosen to exercise exact binary representation.
        store
            .push_row("x", vec![0.1, f64::MIN_POSITIVE, -0.0, 1e300])
            .unwrap();
        store.push_row("y", vec![3.25, -7.5, 0.3333, 2.0]).unwrap();

        let f = tempfile::NamedTempFile::new().unwrap();
        store.save(f.path()).unwrap();
        let loaded = DescriptorStore::load(f.path()).unwrap();
        assert_eq!(loaded.keys(), store.keys());
        assert_eq!(loaded.layout(), store.layout());
        assert_eq!(loaded.provenance(), store.provenance());
        for key in ["x", "y"] {
            let a = store.get(key).unwrap();
            let b = loaded.get(key).unwrap();
            assert!(a
                .values()
                .iter()
                .zip(b.values())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), b"NOTASTORE-------").unwrap();
        assert!(matches!(
            DescriptorStore::load(f.path()),
            Err(Error::Parse { .. })
        ));
    }
}
