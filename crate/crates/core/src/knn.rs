//! Non-parametric interactee prediction by locally weighted regression.
//!
//! The model stores all training (descriptor, localization) pairs. A query
//! retrieves its k nearest neighbors under the block-normalized distance and
//! outputs their localization parameters combined with weights
//! `exp(-distance)`, normalized to sum to one so that coincident neighbors
//! return their common label.

use crate::error::{Error, Result};
use crate::features::{fit_normalizer, normalized_distance, BlockNormalizer, DescriptorVector};
use crate::features::DEFAULT_MAX_PAIRS;
use crate::geometry::{denormalize_to_box, LocalizationParams, PersonInstance};

/// Default neighbor count.
pub const DEFAULT_K: usize = 20;

/// A retrieved neighbor: training index, normalized distance, and the
/// normalized kernel weight it contributed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    pub weight: f64,
}

/// Stored training set plus fitted distance normalizer.
#[derive(Debug, Clone)]
pub struct KnnModel {
    training: Vec<(DescriptorVector, LocalizationParams)>,
    normalizer: BlockNormalizer,
    k: usize,
}

impl KnnModel {
    /// Stores the training pairs and fits the per-block distance normalizer.
    pub fn fit(training: Vec<(DescriptorVector, LocalizationParams)>, k: usize) -> Result<Self> {
        assert!(k >= 1, "k must be at least 1");
        if training.len() < k {
            return Err(Error::TooFewExamples {
                needed: k,
                got: training.len(),
            });
        }
        let descriptors: Vec<DescriptorVector> =
            training.iter().map(|(d, _)| d.clone()).collect();
        // A single stored example has no pairwise distances; distances stay raw.
        let normalizer = if descriptors.len() >= 2 {
            fit_normalizer(&descriptors, DEFAULT_MAX_PAIRS)?
        } else {
            BlockNormalizer::unit(descriptors[0].layout().clone())
        };
        Ok(Self {
            training,
            normalizer,
            k,
        })
    }

    /// Rebuilds a model from already-fitted parts (used by persistence).
    pub fn from_parts(
        training: Vec<(DescriptorVector, LocalizationParams)>,
        normalizer: BlockNormalizer,
        k: usize,
    ) -> Result<Self> {
        if training.len() < k {
            return Err(Error::TooFewExamples {
                needed: k,
                got: training.len(),
            });
        }
        Ok(Self {
            training,
            normalizer,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.training.len()
    }

    pub fn is_empty(&self) -> bool {
        self.training.is_empty()
    }

    pub fn normalizer(&self) -> &BlockNormalizer {
        &self.normalizer
    }

    pub fn training(&self) -> &[(DescriptorVector, LocalizationParams)] {
        &self.training
    }

    /// Predicts localization parameters for a query descriptor.
    ///
    /// Returns the weighted combination and the k neighbors sorted by
    /// ascending distance. Distance ties resolve to the lower training
    /// index, so permuting the training set only affects exact ties.
    pub fn predict(&self, query: &DescriptorVector) -> Result<(LocalizationParams, Vec<Neighbor>)> {
        let mut distances = Vec::with_capacity(self.training.len());
        for (i, (d, _)) in self.training.iter().enumerate() {
            distances.push((normalized_distance(&self.normalizer, query, d)?, i));
        }
        // Stable ordering: by distance, then by training index.
        distances.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        distances.truncate(self.k);

        let raw: Vec<f64> = distances.iter().map(|&(d, _)| (-d).exp()).collect();
        let total: f64 = raw.iter().sum();
        let neighbors: Vec<Neighbor> = distances
            .iter()
            .zip(&raw)
            .map(|(&(distance, index), &w)| Neighbor {
                index,
                distance,
                weight: w / total,
            })
            .collect();

        let mut y = [0.0f64; 3];
        for n in &neighbors {
            let label = self.training[n.index].1.as_array();
            for d in 0..3 {
                y[d] += n.weight * label[d];
            }
        }
        Ok((LocalizationParams::from_array(y), neighbors))
    }

    /// Accumulates the retrieved neighbors' boxes into a saliency grid.
    ///
    /// Each neighbor's localization is projected onto the query person and
    /// rasterized over a `grid_w` x `grid_h` grid spanning the image; a cell
    /// collects the neighbor's weight when its center falls inside the box.
    /// The grid is max-normalized to [0, 1]; an all-zero grid stays zero.
    pub fn predict_heatmap(
        &self,
        query: &DescriptorVector,
        person: &PersonInstance,
        grid_w: usize,
        grid_h: usize,
    ) -> Result<Vec<Vec<f64>>> {
        let (_, neighbors) = self.predict(query)?;
        let votes: Vec<(crate::geometry::BoundingBox, f64)> = neighbors
            .iter()
            .filter(|n| self.training[n.index].1.a > 0.0)
            .map(|n| {
                (
                    denormalize_to_box(&self.training[n.index].1, &person.person_box),
                    n.weight,
                )
            })
            .collect();
        Ok(rasterize_box_votes(&votes, person, grid_w, grid_h))
    }
}

/// Rasterizes weighted box votes over a grid spanning the person's image.
///
/// A cell collects a vote's weight when its center lies inside the box; the
/// grid is max-normalized to [0, 1], and an all-zero grid stays zero.
pub fn rasterize_box_votes(
    votes: &[(crate::geometry::BoundingBox, f64)],
    person: &PersonInstance,
    grid_w: usize,
    grid_h: usize,
) -> Vec<Vec<f64>> {
    assert!(grid_w > 0 && grid_h > 0, "grid dimensions must be positive");
    let mut grid = vec![vec![0.0f64; grid_w]; grid_h];
    let cell_w = person.image_width / grid_w as f64;
    let cell_h = person.image_height / grid_h as f64;
    for (b, weight) in votes {
        for (row, grid_row) in grid.iter_mut().enumerate() {
            let cy = (row as f64 + 0.5) * cell_h;
            for (col, cell) in grid_row.iter_mut().enumerate() {
                let cx = (col as f64 + 0.5) * cell_w;
                if b.contains_point(cx, cy) {
                    *cell += weight;
                }
            }
        }
    }
    let max = grid.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v));
    if max > 0.0 {
        for row in &mut grid {
            for v in row {
                *v /= max;
            }
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{assemble, DescriptorBlock};
    use crate::geometry::BoundingBox;

    fn desc(values: Vec<f64>) -> DescriptorVector {
        assemble(vec![DescriptorBlock::new("raw", values)]).unwrap()
    }

    fn y(dx: f64, dy: f64, a: f64) -> LocalizationParams {
        LocalizationParams::new(dx, dy, a)
    }

    #[test]
    fn k_larger_than_training_rejected() {
        let training = vec![(desc(vec![0.0]), y(0.0, 0.0, 1.0))];
        assert!(matches!(
            KnnModel::fit(training, 2),
            Err(Error::TooFewExamples { .. })
        ));
    }

    #[test]
    fn single_example_constant_predictor() {
        let label = y(0.3, -0.2, 0.8);
        let model = KnnModel::fit(vec![(desc(vec![5.0]), label)], 1).unwrap();
        let (p, n) = model.predict(&desc(vec![100.0])).unwrap();
        assert_eq!(p, label);
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].weight, 1.0);
    }

    #[test]
    fn exact_match_k1_bit_for_bit() {
        let labels = [y(0.1, 0.2, 0.3), y(-1.5, 2.5, 4.5), y(0.0, 0.0, 1.0)];
        let training: Vec<_> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (desc(vec![i as f64 * 10.0]), l))
            .collect();
        let model = KnnModel::fit(training, 1).unwrap();
        let (p, n) = model.predict(&desc(vec![10.0])).unwrap();
        assert_eq!(p, labels[1]);
        assert_eq!(n[0].index, 1);
        assert_eq!(n[0].distance, 0.0);
    }

    #[test]
    fn equidistant_pair_returns_mean() {
        let training = vec![
            (desc(vec![-1.0]), y(0.0, 0.0, 1.0)),
            (desc(vec![1.0]), y(2.0, 2.0, 3.0)),
        ];
        let model = KnnModel::fit(training, 2).unwrap();
        let (p, _) = model.predict(&desc(vec![0.0])).unwrap();
        assert!((p.dx - 1.0).abs() < 1e-15);
        assert!((p.dy - 1.0).abs() < 1e-15);
        assert!((p.a - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_weights_ln3() {
        // Distances 0 and ln 3 give raw weights 1 and 1/3 -> 0.75 / 0.25.
        let ln3 = 3.0f64.ln();
        let training = vec![
            (desc(vec![0.0]), y(0.0, 0.0, 1.0)),
            (desc(vec![ln3]), y(4.0, 0.0, 1.0)),
        ];
        let normalizer = fit_normalizer(
            &training.iter().map(|(d, _)| d.clone()).collect::<Vec<_>>(),
            DEFAULT_MAX_PAIRS,
        )
        .unwrap();
        // A single pair collapses to scale 1, so distances stay raw.
        assert_eq!(normalizer.scales(), &[1.0]);
        let model = KnnModel::fit(training, 2).unwrap();
        let (p, n) = model.predict(&desc(vec![0.0])).unwrap();
        assert!((n[0].weight - 0.75).abs() < 1e-12);
        assert!((n[1].weight - 0.25).abs() < 1e-12);
        assert!((p.dx - 1.0).abs() < 1e-12);
        assert_eq!(p.dy, 0.0);
        assert!((p.a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_is_convex_combination() {
        let training: Vec<_> = (0..10)
            .map(|i| {
                (
                    desc(vec![i as f64, (i * 3 % 7) as f64]),
                    y(i as f64 * 0.1, -(i as f64) * 0.05, 0.5 + i as f64 * 0.01),
                )
            })
            .collect();
        let model = KnnModel::fit(training.clone(), 5).unwrap();
        let (p, n) = model.predict(&desc(vec![4.2, 2.7])).unwrap();
        let total: f64 = n.iter().map(|x| x.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for d in 0..3 {
            let vals: Vec<f64> = n.iter().map(|x| training[x.index].1.as_array()[d]).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let got = p.as_array()[d];
            assert!(got >= lo - 1e-12 && got <= hi + 1e-12);
        }
        assert!(p.a > 0.0);
    }

    #[test]
    fn distance_ties_resolve_to_lower_index() {
        let training = vec![
            (desc(vec![1.0]), y(0.0, 0.0, 1.0)),
            (desc(vec![1.0]), y(9.0, 9.0, 9.0)),
            (desc(vec![50.0]), y(5.0, 5.0, 5.0)),
        ];
        let model = KnnModel::fit(training, 1).unwrap();
        let (p, n) = model.predict(&desc(vec![1.0])).unwrap();
        assert_eq!(n[0].index, 0);
        assert_eq!(p, y(0.0, 0.0, 1.0));
    }

    #[test]
    fn heatmap_single_vote_is_binary() {
        let person = PersonInstance {
            image_id: "i".into(),
            person_box: BoundingBox::new(40.0, 40.0, 20.0, 20.0),
            image_width: 100.0,
            image_height: 100.0,
        };
        let model = KnnModel::fit(vec![(desc(vec![0.0]), y(0.0, 0.0, 1.0))], 1).unwrap();
        let grid = model.predict_heatmap(&desc(vec![0.0]), &person, 10, 10).unwrap();
        let values: Vec<f64> = grid.iter().flatten().cloned().collect();
        assert!(values.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(values.iter().any(|&v| v == 1.0));
        // The predicted box is the person box itself (20x20 at center);
        // cells with centers inside it are exactly the 4..6 x 4..6 block.
        assert_eq!(grid[4][4], 1.0);
        assert_eq!(grid[0][0], 0.0);
    }

    #[test]
    fn heatmap_two_disjoint_votes_normalize() {
        let person = PersonInstance {
            image_id: "i".into(),
            person_box: BoundingBox::new(0.0, 0.0, 10.0, 10.0),
            image_width: 100.0,
            image_height: 100.0,
        };
        // Two training points; query matches the first exactly, the second sits
        // at distance ln 3 so weights are 0.75 / 0.25.
        let ln3 = 3.0f64.ln();
        let training = vec![
            (desc(vec![0.0]), y(1.5, 0.0, 1.0)),
            (desc(vec![ln3]), y(6.0, 0.0, 1.0)),
        ];
        let model = KnnModel::fit(training, 2).unwrap();
        let grid = model.predict_heatmap(&desc(vec![0.0]), &person, 20, 20).unwrap();
        let mut distinct: Vec<f64> = grid.iter().flatten().cloned().filter(|&v| v > 0.0).collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        assert_eq!(distinct.len(), 2);
        assert!((distinct[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(distinct[1], 1.0);
    }
}
