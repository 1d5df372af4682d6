//! Fusing multiple annotators' interactee boxes into one ground-truth box.
//!
//! Each box is embedded as a point (cx, cy, w, h) in R^4; mean shift with a
//! flat kernel groups the annotations, and within the largest cluster the
//! member box with the highest mean overlap against the rest is selected.
//! The output is always one of the input boxes, never a synthesized one.

use crate::geometry::{iou, BoundingBox};

/// All annotator boxes for one person in one image.
#[derive(Debug, Clone)]
pub struct AnnotationSet {
    pub image_id: String,
    pub person_index: usize,
    pub boxes: Vec<BoundingBox>,
}

/// One mean-shift cluster: the input indices it contains and the mode they
/// converged to.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub mode: [f64; 4],
}

/// Partition of the input indices into clusters.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub clusters: Vec<Cluster>,
}

/// Default mean-shift bandwidth as a fraction of the image diagonal.
pub const DEFAULT_BANDWIDTH_FRACTION: f64 = 0.1;

/// Default iteration cap for mode seeking.
pub const DEFAULT_MAX_ITERS: usize = 300;

/// Default convergence tolerance on the shift length.
pub const DEFAULT_TOL: f64 = 1e-7;

/// Embeds a box as (cx, cy, w, h) for clustering.
pub fn box_to_point(b: &BoundingBox) -> [f64; 4] {
    let (cx, cy) = b.center();
    [cx, cy, b.width, b.height]
}

fn dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Flat-kernel mean shift over points in R^4.
///
/// Every point is iterated to a mode by repeatedly replacing it with the
/// mean of all input points within `bandwidth`. Modes closer than
/// `bandwidth / 2` merge into one cluster, scanning in index order, so the
/// result is deterministic for a given input order. A point that has not
/// converged after `max_iters` clusters at its last iterate.
pub fn mean_shift(
    points: &[[f64; 4]],
    bandwidth: f64,
    max_iters: usize,
    tol: f64,
) -> ClusterResult {
    assert!(!points.is_empty(), "mean_shift needs at least one point");
    assert!(bandwidth > 0.0, "bandwidth must be positive");

    let modes: Vec<[f64; 4]> = points
        .iter()
        .map(|start| {
            let mut x = *start;
            for _ in 0..max_iters {
                let mut mean = [0.0f64; 4];
                let mut n = 0usize;
                for p in points {
                    if dist(&x, p) <= bandwidth {
                        for d in 0..4 {
                            mean[d] += p[d];
                        }
                        n += 1;
                    }
                }
                // The window always contains x's own source point when x is an
                // input point; after the first step it can only be empty if x
                // drifted away, which the flat kernel never does.
                debug_assert!(n > 0);
                for m in mean.iter_mut() {
                    *m /= n as f64;
                }
                let shift = dist(&x, &mean);
                x = mean;
                if shift < tol {
                    break;
                }
            }
            x
        })
        .collect();

    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, mode) in modes.iter().enumerate() {
        match clusters
            .iter_mut()
            .find(|c| dist(&c.mode, mode) <= bandwidth / 2.0)
        {
            Some(c) => c.members.push(i),
            None => clusters.push(Cluster {
                members: vec![i],
                mode: *mode,
            }),
        }
    }
    ClusterResult { clusters }
}

/// Selects the consensus ground-truth box from a set of annotations.
///
/// Runs mean shift over the (cx, cy, w, h) embeddings, takes the largest
/// cluster (ties go to the cluster containing the lowest input index), and
/// within it returns the member box with the largest mean IOU against the
/// other members. A singleton cluster yields its only box; mean-IOU ties go
/// to the lowest annotator index.
pub fn consensus_box(annotations: &AnnotationSet, bandwidth: f64) -> BoundingBox {
    assert!(
        !annotations.boxes.is_empty(),
        "annotation set must contain at least one box"
    );
    let points: Vec<[f64; 4]> = annotations.boxes.iter().map(box_to_point).collect();
    let result = mean_shift(&points, bandwidth, DEFAULT_MAX_ITERS, DEFAULT_TOL);

    // Clusters are created in first-member index order, so the first cluster
    // of maximal size also has the smallest-index first member.
    let mut largest = &result.clusters[0];
    for c in &result.clusters[1..] {
        if c.members.len() > largest.members.len() {
            largest = c;
        }
    }

    select_max_mean_iou(&annotations.boxes, &largest.members)
}

/// Argmax of mean IOU against the other members; ties go to the lowest index.
pub(crate) fn select_max_mean_iou(boxes: &[BoundingBox], members: &[usize]) -> BoundingBox {
    if members.len() == 1 {
        return boxes[members[0]];
    }
    let mut best = members[0];
    let mut best_score = f64::NEG_INFINITY;
    for &i in members {
        let mut total = 0.0;
        for &j in members {
            if i != j {
                total += iou(&boxes[i], &boxes[j]);
            }
        }
        let mean = total / (members.len() - 1) as f64;
        if mean > best_score {
            best_score = mean;
            best = i;
        }
    }
    boxes[best]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(boxes: Vec<BoundingBox>) -> AnnotationSet {
        AnnotationSet {
            image_id: "img".into(),
            person_index: 0,
            boxes,
        }
    }

    #[test]
    fn box_to_point_examples() {
        assert_eq!(box_to_point(&BoundingBox::new(0.0, 0.0, 2.0, 2.0)), [1.0, 1.0, 2.0, 2.0]);
        assert_eq!(
            box_to_point(&BoundingBox::new(10.0, 20.0, 30.0, 40.0)),
            [25.0, 40.0, 30.0, 40.0]
        );
        assert_eq!(
            box_to_point(&BoundingBox::new(-5.0, -5.0, 10.0, 10.0)),
            [0.0, 0.0, 10.0, 10.0]
        );
    }

    #[test]
    fn singleton_point_is_its_own_mode() {
        let r = mean_shift(&[[1.0, 2.0, 3.0, 4.0]], 5.0, 100, 1e-9);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].members, vec![0]);
        assert_eq!(r.clusters[0].mode, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn identical_points_merge() {
        let p = [4.0, 4.0, 2.0, 2.0];
        let r = mean_shift(&[p, p], 1.0, 100, 1e-9);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].members, vec![0, 1]);
    }

    #[test]
    fn planted_group_plus_outlier_splits() {
        let mut points: Vec<[f64; 4]> = vec![
            [0.5, 0.0, 0.0, 0.0],
            [-0.5, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.0, 0.0],
            [0.0, -0.5, 0.0, 0.0],
            [0.0, 0.0, 0.3, 0.0],
        ];
        points.push([100.0, 0.0, 0.0, 0.0]);
        let r = mean_shift(&points, 10.0, 300, 1e-9);
        assert_eq!(r.clusters.len(), 2);
        let mut sizes: Vec<usize> = r.clusters.iter().map(|c| c.members.len()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 5]);
        // Flat-kernel iteration lands on the planted group centroid.
        let big = r.clusters.iter().max_by_key(|c| c.members.len()).unwrap();
        let centroid = [0.0, 0.0, 0.06, 0.0];
        assert!(dist(&big.mode, &centroid) < 1e-6);
    }

    #[test]
    fn single_annotator_returned_verbatim() {
        let b = BoundingBox::new(5.0, 6.0, 7.0, 8.0);
        assert_eq!(consensus_box(&set(vec![b]), 10.0), b);
    }

    #[test]
    fn planted_consensus_wins_over_far_outlier() {
        let planted = BoundingBox::new(10.0, 10.0, 50.0, 50.0);
        let mut boxes = vec![planted; 5];
        boxes.push(BoundingBox::new(400.0, 400.0, 10.0, 10.0));
        assert_eq!(consensus_box(&set(boxes), 30.0), planted);
    }

    #[test]
    fn jittered_cluster_selects_max_mean_iou_member() {
        let jitter = [(-2.0, 1.0), (2.0, -1.0), (1.0, 2.0), (-1.0, -2.0)];
        let mut boxes: Vec<BoundingBox> = jitter
            .iter()
            .map(|&(dx, dy)| BoundingBox::new(10.0 + dx, 10.0 + dy, 50.0, 50.0))
            .collect();
        boxes.push(BoundingBox::new(200.0, 200.0, 50.0, 50.0));
        boxes.push(BoundingBox::new(202.0, 201.0, 50.0, 50.0));

        let got = consensus_box(&set(boxes.clone()), 40.0);
        // Exhaustive oracle over the planted members.
        let expected = select_max_mean_iou(&boxes, &[0, 1, 2, 3]);
        assert_eq!(got, expected);
        assert!(boxes[..4].contains(&got));
    }

    #[test]
    fn duplicate_of_winner_keeps_selection_stable() {
        let jitter = [(-2.0, 1.0), (2.0, -1.0), (1.0, 2.0), (-1.0, -2.0)];
        let mut boxes: Vec<BoundingBox> = jitter
            .iter()
            .map(|&(dx, dy)| BoundingBox::new(10.0 + dx, 10.0 + dy, 50.0, 50.0))
            .collect();
        let winner = consensus_box(&set(boxes.clone()), 40.0);
        boxes.push(winner);
        assert_eq!(consensus_box(&set(boxes), 40.0), winner);
    }
}
