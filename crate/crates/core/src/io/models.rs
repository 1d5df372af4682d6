//! Model persistence: quantizer codebooks, KNN model metadata, and MDN
//! networks, all as versioned JSON. JSON floats round-trip f64 bit-exactly.
//!
//! KNN files carry only metadata (k, normalizer, row keys, labels); the
//! feature payload stays in the descriptor store they reference.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::BlockNormalizer;
use crate::geometry::LocalizationParams;
use crate::knn::KnnModel;
use crate::mdn::MdnNetwork;
use crate::quantize::Quantizer;

use super::descriptors::DescriptorStore;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("model serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
struct QuantizerFile {
    version: u32,
    quantizer: Quantizer,
}

pub fn save_quantizer(path: &Path, q: &Quantizer) -> Result<()> {
    write_json(
        path,
        &QuantizerFile {
            version: 1,
            quantizer: q.clone(),
        },
    )
}

pub fn load_quantizer(path: &Path) -> Result<Quantizer> {
    Ok(read_json::<QuantizerFile>(path)?.quantizer)
}

/// Serialized KNN model: normalizer plus references into a descriptor store.
#[derive(Serialize, Deserialize)]
pub struct KnnModelFile {
    pub version: u32,
    pub k: usize,
    pub store_path: String,
    pub normalizer: BlockNormalizer,
    pub entries: Vec<KnnEntry>,
}

#[derive(Serialize, Deserialize)]
pub struct KnnEntry {
    pub key: String,
    pub params: [f64; 3],
}

pub fn save_knn_model(
    path: &Path,
    model: &KnnModel,
    store_path: &str,
    keys: &[String],
) -> Result<()> {
    assert_eq!(
        keys.len(),
        model.len(),
        "one store key per training example"
    );
    let entries = keys
        .iter()
        .zip(model.training())
        .map(|(key, (_, params))| KnnEntry {
            key: key.clone(),
            params: params.as_array(),
        })
        .collect();
    write_json(
        path,
        &KnnModelFile {
            version: 1,
            k: model.k(),
            store_path: store_path.to_string(),
            normalizer: model.normalizer().clone(),
            entries,
        },
    )
}

pub fn load_knn_model(path: &Path) -> Result<KnnModelFile> {
    read_json(path)
}

impl KnnModelFile {
    /// Resolves the entries against a loaded store and rebuilds the model.
    pub fn into_model(self, store: &DescriptorStore) -> Result<KnnModel> {
        let mut training = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let descriptor = store.get(&e.key).ok_or_else(|| {
                Error::validation(
                    format!("knn entry {:?}", e.key),
                    "descriptor key not found in the store",
                )
            })?;
            training.push((descriptor, LocalizationParams::from_array(e.params)));
        }
        KnnModel::from_parts(training, self.normalizer, self.k)
    }
}

#[derive(Serialize, Deserialize)]
struct MdnFile {
    version: u32,
    network: MdnNetwork,
}

pub fn save_mdn(path: &Path, net: &MdnNetwork) -> Result<()> {
    write_json(
        path,
        &MdnFile {
            version: 1,
            network: net.clone(),
        },
    )
}

pub fn load_mdn(path: &Path) -> Result<MdnNetwork> {
    Ok(read_json::<MdnFile>(path)?.network)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{assemble, DescriptorBlock};
    use crate::mdn::mdn_init;
    use crate::quantize::fit_quantizer;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    #[test]
    fn quantizer_round_trip() {
        let examples: Vec<LocalizationParams> = (0..12)
            .map(|i| LocalizationParams::new(i as f64, (i * i % 7) as f64, 1.0 + (i % 5) as f64))
            .collect();
        let q = fit_quantizer(&examples, 4).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_quantizer(f.path(), &q).unwrap();
        let q2 = load_quantizer(f.path()).unwrap();
        assert_eq!(q.xy_centroids, q2.xy_centroids);
        assert_eq!(q.area_centroids, q2.area_centroids);
        assert_eq!(q.seed, q2.seed);
    }

    #[test]
    fn mdn_round_trip_bit_exact() {
        let net = mdn_init(4, &[8, 8], 3, 17);
        let f = tempfile::NamedTempFile::new().unwrap();
        save_mdn(f.path(), &net).unwrap();
        let loaded = load_mdn(f.path()).unwrap();
        assert_eq!(net, loaded);
        for (a, b) in net.layers().iter().zip(loaded.layers()) {
            assert!(a
                .weights
                .iter()
                .zip(&b.weights)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn knn_round_trip_through_store() {
        let layout = Arc::new(
            crate::features::DescriptorLayout::new(&[("u".to_string(), 2)]).unwrap(),
        );
        let mut store = DescriptorStore::new(layout, BTreeMap::new());
        let mut training = Vec::new();
        let mut keys = Vec::new();
        for i in 0..5 {
            let key = format!("img{i}#0");
            let values = vec![i as f64, (i * i) as f64 * 0.5];
            store.push_row(&key, values.clone()).unwrap();
            training.push((
                assemble(vec![DescriptorBlock::new("u", values)]).unwrap(),
                LocalizationParams::new(i as f64 * 0.1, 0.0, 1.0),
            ));
            keys.push(key);
        }
        let model = KnnModel::fit(training, 3).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_knn_model(f.path(), &model, "store.bin", &keys).unwrap();

        let loaded = load_knn_model(f.path()).unwrap();
        assert_eq!(loaded.store_path, "store.bin");
        let rebuilt = loaded.into_model(&store).unwrap();
        assert_eq!(rebuilt.k(), model.k());
        // Same predictions after the round trip.
        let query = store.get("img2#0").unwrap();
        let (a, _) = model.predict(&query).unwrap();
        let (b, _) = rebuilt.predict(&query).unwrap();
        assert_eq!(a, b);
    }
}
