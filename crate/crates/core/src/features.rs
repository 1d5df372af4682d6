//! Descriptor assembly and per-block distance normalization.
//!
//! A descriptor is an ordered concatenation of named blocks. The geometric
//! blocks (person aspect ratio and normalized image position) are computed
//! here; appearance blocks (HOG, GIST, poselet orientations, CNN embeddings)
//! arrive precomputed through descriptor files. Distances between
//! descriptors are per-block Euclidean distances, each divided by the
//! standard deviation of that block's pairwise training distances, combined
//! by root-sum-of-squares.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PersonInstance;

/// Canonical block names from the descriptor recipe. User-defined names are
/// also accepted everywhere.
pub mod block_names {
    pub const THETA_H: &str = "theta_h";
    pub const THETA_T: &str = "theta_t";
    pub const HOG: &str = "hog";
    pub const ASPECT: &str = "aspect";
    pub const GIST: &str = "gist";
    pub const POSITION: &str = "position";
    pub const CNN_P: &str = "cnn_p";
    pub const CNN_S: &str = "cnn_s";
}

/// Default cap on the number of pairwise distances used to fit a normalizer.
pub const DEFAULT_MAX_PAIRS: usize = 1_000_000;

/// Fixed seed for pair subsampling in [`fit_normalizer`]; fitting is
/// deterministic for a given training set.
const PAIR_SAMPLE_SEED: u64 = 0x0ddba11;

/// One named feature block.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorBlock {
    pub name: String,
    pub values: Vec<f64>,
}

impl DescriptorBlock {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Block structure of a descriptor: names, dims, and derived offsets.
///
/// Two descriptors are comparable only when their layouts are equal
/// (same names, same dims, same order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorLayout {
    names: Vec<String>,
    dims: Vec<usize>,
}

impl DescriptorLayout {
    pub fn new(blocks: &[(String, usize)]) -> Result<Self> {
        for (i, (name, _)) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::DuplicateBlockName(name.clone()));
            }
        }
        Ok(Self {
            names: blocks.iter().map(|(n, _)| n.clone()).collect(),
            dims: blocks.iter().map(|&(_, d)| d).collect(),
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.names.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// (offset, dim) of a block by name.
    pub fn span(&self, name: &str) -> Option<(usize, usize)> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some((self.dims[..idx].iter().sum(), self.dims[idx]))
    }

    fn offset_of(&self, index: usize) -> usize {
        self.dims[..index].iter().sum()
    }
}

/// A complete feature vector: flat storage plus its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorVector {
    layout: Arc<DescriptorLayout>,
    values: Vec<f64>,
}

impl DescriptorVector {
    /// Builds a descriptor from a row of values that already matches `layout`.
    pub fn from_flat(layout: Arc<DescriptorLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                got: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &Arc<DescriptorLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_dim(&self) -> usize {
        self.values.len()
    }

    /// Slice of one block's values by name.
    pub fn block(&self, name: &str) -> Option<&[f64]> {
        let (offset, dim) = self.layout.span(name)?;
        Some(&self.values[offset..offset + dim])
    }

    fn block_at(&self, index: usize) -> &[f64] {
        let offset = self.layout.offset_of(index);
        &self.values[offset..offset + self.layout.dims[index]]
    }
}

fn layouts_match(a: &Arc<DescriptorLayout>, b: &Arc<DescriptorLayout>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Concatenates blocks into a descriptor, recording the layout.
pub fn assemble(blocks: Vec<DescriptorBlock>) -> Result<DescriptorVector> {
    let layout = DescriptorLayout::new(
        &blocks
            .iter()
            .map(|b| (b.name.clone(), b.dim()))
            .collect::<Vec<_>>(),
    )?;
    let mut values = Vec::with_capacity(layout.total_dim());
    for b in blocks {
        values.extend_from_slice(&b.values);
    }
    Ok(DescriptorVector {
        layout: Arc::new(layout),
        values,
    })
}

/// Computes the person-geometry blocks: aspect ratio h/w (dim 1) and the
/// person center normalized by the image dimensions (dim 2).
pub fn geometric_features(person: &PersonInstance) -> (DescriptorBlock, DescriptorBlock) {
    let b = &person.person_box;
    let aspect = DescriptorBlock::new(block_names::ASPECT, vec![b.height / b.width]);
    let (cx, cy) = b.center();
    let position = DescriptorBlock::new(
        block_names::POSITION,
        vec![cx / person.image_width, cy / person.image_height],
    );
    (aspect, position)
}

/// Per-block distance scales fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockNormalizer {
    layout: Arc<DescriptorLayout>,
    scales: Vec<f64>,
}

impl BlockNormalizer {
    /// All-ones scales for a layout; distances stay raw per block.
    pub fn unit(layout: Arc<DescriptorLayout>) -> Self {
        let scales = vec![1.0; layout.num_blocks()];
        Self { layout, scales }
    }

    /// Rebuilds a normalizer from serialized parts.
    pub fn from_parts(layout: Arc<DescriptorLayout>, scales: Vec<f64>) -> Result<Self> {
        if scales.len() != layout.num_blocks() {
            return Err(Error::DimensionMismatch {
                expected: layout.num_blocks(),
                got: scales.len(),
            });
        }
        Ok(Self { layout, scales })
    }

    pub fn layout(&self) -> &Arc<DescriptorLayout> {
        &self.layout
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn scale_of(&self, name: &str) -> Option<f64> {
        let idx = self.layout.names.iter().position(|n| n == name)?;
        Some(self.scales[idx])
    }
}

fn block_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Fits per-block scales: the population standard deviation of the L2
/// distances between training descriptors of that block.
///
/// All unordered pairs are used when their count is at most `max_pairs`;
/// otherwise `max_pairs` pairs are sampled uniformly (with replacement,
/// fixed seed). Blocks whose distance spread is below 1e-12 fall back to
/// scale 1 so constant blocks never divide by zero.
pub fn fit_normalizer(training: &[DescriptorVector], max_pairs: usize) -> Result<BlockNormalizer> {
    if training.len() < 2 {
        return Err(Error::TooFewExamples {
            needed: 2,
            got: training.len(),
        });
    }
    let layout = training[0].layout.clone();
    for (i, t) in training.iter().enumerate() {
        if !layouts_match(&t.layout, &layout) {
            return Err(Error::LayoutMismatch(format!(
                "training descriptor {i} does not match the first descriptor's layout"
            )));
        }
    }

    let n = training.len();
    let num_blocks = layout.num_blocks();
    let all_pairs = n * (n - 1) / 2;

    let mut sum = vec![0.0f64; num_blocks];
    let mut sum_sq = vec![0.0f64; num_blocks];
    let mut count = 0usize;

    let accumulate = |i: usize, j: usize, sum: &mut [f64], sum_sq: &mut [f64]| {
        for b in 0..num_blocks {
            let d = block_distance(training[i].block_at(b), training[j].block_at(b));
            sum[b] += d;
            sum_sq[b] += d * d;
        }
    };

    if all_pairs <= max_pairs {
        for i in 0..n {
            for j in (i + 1)..n {
                accumulate(i, j, &mut sum, &mut sum_sq);
                count += 1;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SAMPLE_SEED);
        while count < max_pairs {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            accumulate(i, j, &mut sum, &mut sum_sq);
            count += 1;
        }
    }

    let scales = (0..num_blocks)
        .map(|b| {
            let mean = sum[b] / count as f64;
            let var = (sum_sq[b] / count as f64 - mean * mean).max(0.0);
            let std = var.sqrt();
            if std < 1e-12 {
                1.0
            } else {
                std
            }
        })
        .collect();

    Ok(BlockNormalizer { layout, scales })
}

/// Distance between two descriptors: root-sum-of-squares of the per-block
/// L2 distances, each divided by its fitted scale.
pub fn normalized_distance(
    normalizer: &BlockNormalizer,
    a: &DescriptorVector,
    b: &DescriptorVector,
) -> Result<f64> {
    if !layouts_match(&a.layout, &normalizer.layout) || !layouts_match(&b.layout, &normalizer.layout)
    {
        return Err(Error::LayoutMismatch(
            "descriptors do not match the normalizer's layout".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..normalizer.layout.num_blocks() {
        let d = block_distance(a.block_at(i), b.block_at(i)) / normalizer.scales[i];
        total += d * d;
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;

    fn one_block(name: &str, values: Vec<f64>) -> DescriptorVector {
        assemble(vec![DescriptorBlock::new(name, values)]).unwrap()
    }

    #[test]
    fn geometric_features_examples() {
        let person = PersonInstance {
            image_id: "i".into(),
            person_box: BoundingBox::new(0.0, 0.0, 50.0, 100.0),
            image_width: 200.0,
            image_height: 200.0,
        };
        let (aspect, position) = geometric_features(&person);
        assert_eq!(aspect.values, vec![2.0]);
        assert_eq!(position.values, vec![0.125, 0.25]);

        let square = PersonInstance {
            image_id: "i".into(),
            person_box: BoundingBox::new(75.0, 75.0, 50.0, 50.0),
            image_width: 200.0,
            image_height: 200.0,
        };
        let (aspect, position) = geometric_features(&square);
        assert_eq!(aspect.values, vec![1.0]);
        assert_eq!(position.values, vec![0.5, 0.5]);
    }

    #[test]
    fn assemble_offsets_and_dims() {
        let v = assemble(vec![
            DescriptorBlock::new("a", vec![1.0]),
            DescriptorBlock::new("b", vec![2.0, 3.0]),
            DescriptorBlock::new("c", vec![0.0; 4096]),
        ])
        .unwrap();
        assert_eq!(v.total_dim(), 4099);
        assert_eq!(v.layout().span("a"), Some((0, 1)));
        assert_eq!(v.layout().span("b"), Some((1, 2)));
        assert_eq!(v.layout().span("c"), Some((3, 4096)));
        assert_eq!(v.block("b"), Some(&[2.0, 3.0][..]));
    }

    #[test]
    fn duplicate_block_name_rejected() {
        let r = assemble(vec![
            DescriptorBlock::new("a", vec![1.0]),
            DescriptorBlock::new("a", vec![2.0]),
        ]);
        assert!(matches!(r, Err(Error::DuplicateBlockName(_))));
    }

    #[test]
    fn normalizer_hand_case_three_points() {
        // 1-D values {0, 1, 3}: pair distances {1, 3, 2}, population std sqrt(2/3).
        let training: Vec<_> = [0.0, 1.0, 3.0]
            .iter()
            .map(|&v| one_block("x", vec![v]))
            .collect();
        let n = fit_normalizer(&training, DEFAULT_MAX_PAIRS).unwrap();
        assert!((n.scales()[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalizer_degenerate_cases() {
        let same: Vec<_> = (0..3).map(|_| one_block("x", vec![5.0, 5.0])).collect();
        let n = fit_normalizer(&same, DEFAULT_MAX_PAIRS).unwrap();
        assert_eq!(n.scales(), &[1.0]);

        // A single pair has zero distance spread.
        let two = vec![one_block("x", vec![0.0]), one_block("x", vec![7.0])];
        let n = fit_normalizer(&two, DEFAULT_MAX_PAIRS).unwrap();
        assert_eq!(n.scales(), &[1.0]);
    }

    #[test]
    fn normalized_distance_examples() {
        let layout = Arc::new(
            DescriptorLayout::new(&[("p".to_string(), 1), ("q".to_string(), 1)]).unwrap(),
        );
        let normalizer = BlockNormalizer {
            layout: layout.clone(),
            scales: vec![2.0, 1.0],
        };
        let a = DescriptorVector::from_flat(layout.clone(), vec![0.0, 0.0]).unwrap();
        let b = DescriptorVector::from_flat(layout.clone(), vec![6.0, 0.0]).unwrap();
        assert_eq!(normalized_distance(&normalizer, &a, &a).unwrap(), 0.0);
        assert_eq!(normalized_distance(&normalizer, &a, &b).unwrap(), 3.0);

        // 3-4-5 over two blocks.
        let normalizer = BlockNormalizer {
            layout: layout.clone(),
            scales: vec![1.0, 1.0],
        };
        let c = DescriptorVector::from_flat(layout, vec![3.0, 4.0]).unwrap();
        assert_eq!(normalized_distance(&normalizer, &a, &c).unwrap(), 5.0);
    }

    #[test]
    fn layout_mismatch_detected() {
        let a = one_block("x", vec![0.0]);
        let b = one_block("y", vec![0.0]);
        let n = fit_normalizer(&[a.clone(), a.clone()], DEFAULT_MAX_PAIRS).unwrap();
        assert!(matches!(
            normalized_distance(&n, &a, &b),
            Err(Error::LayoutMismatch(_))
        ));
        assert!(matches!(
            fit_normalizer(&[a, b], DEFAULT_MAX_PAIRS),
            Err(Error::LayoutMismatch(_))
        ));
    }

    #[test]
    fn block_rescaling_leaves_distance_invariant() {
        let make = |scale: f64| -> Vec<DescriptorVector> {
            (0..6)
                .map(|i| {
                    assemble(vec![
                        DescriptorBlock::new("u", vec![scale * i as f64, scale * (i * i) as f64]),
                        DescriptorBlock::new("v", vec![(i % 3) as f64]),
                    ])
                    .unwrap()
                })
                .collect()
        };
        let base = make(1.0);
        let scaled = make(10.0);
        let n_base = fit_normalizer(&base, DEFAULT_MAX_PAIRS).unwrap();
        let n_scaled = fit_normalizer(&scaled, DEFAULT_MAX_PAIRS).unwrap();
        assert!((n_scaled.scales()[0] - 10.0 * n_base.scales()[0]).abs() < 1e-9);
        assert!((n_scaled.scales()[1] - n_base.scales()[1]).abs() < 1e-12);
        let d_base = normalized_distance(&n_base, &base[1], &base[4]).unwrap();
        let d_scaled = normalized_distance(&n_scaled, &scaled[1], &scaled[4]).unwrap();
        assert!((d_base - d_scaled).abs() < 1e-9);
    }

    #[test]
    fn subsampled_fit_is_deterministic() {
        let training: Vec<_> = (0..80)
            .map(|i| one_block("x", vec![i as f64, (i * 7 % 13) as f64]))
            .collect();
        let a = fit_normalizer(&training, 100).unwrap();
        let b = fit_normalizer(&training, 100).unwrap();
        assert_eq!(a.scales(), b.scales());
    }
}
