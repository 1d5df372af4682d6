//! Quantization of localization-parameter space into 40 interaction types.
//!
//! Two independent k-means runs over training examples — k = 10 on the
//! displacement (dx, dy) and k = 4 on the area — define a 10 x 4 grid of
//! types. A type id is `xy_index * 4 + area_index`; the layout is fixed but
//! carries no semantic ordering.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LocalizationParams;

/// Number of displacement clusters.
pub const XY_CLUSTERS: usize = 10;
/// Number of area clusters.
pub const AREA_CLUSTERS: usize = 4;
/// Total interaction types.
pub const NUM_TYPES: usize = XY_CLUSTERS * AREA_CLUSTERS;

const MAX_ITERS: usize = 300;

/// Fitted codebooks over displacement and area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Quantizer {
    pub xy_centroids: Vec<[f64; 2]>,
    pub area_centroids: Vec<f64>,
    pub seed: u64,
    pub xy_distortion: f64,
    pub area_distortion: f64,
}

/// One cell of the 10 x 4 type grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionType {
    pub xy_index: usize,
    pub area_index: usize,
    pub type_id: usize,
}

impl InteractionType {
    pub fn new(xy_index: usize, area_index: usize) -> Self {
        debug_assert!(xy_index < XY_CLUSTERS && area_index < AREA_CLUSTERS);
        Self {
            xy_index,
            area_index,
            type_id: xy_index * AREA_CLUSTERS + area_index,
        }
    }
}

struct KmeansFit {
    centroids: Vec<Vec<f64>>,
    /// Objective after every assignment pass, in order.
    distortion_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// k-means++ seeding: first centroid uniform, the rest sampled with
/// probability proportional to squared distance from the chosen set.
fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // All remaining mass is zero; the distinctness precondition makes
            // this unreachable, but fall back to the first point regardless.
            0
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }
    centroids
}

/// Lloyd's algorithm to an assignment fixpoint (or `MAX_ITERS`).
///
/// Empty clusters are repaired by re-seeding them at the point currently
/// farthest from its assigned centroid, which keeps exactly k centroids and
/// never increases the objective.
fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> KmeansFit {
    let mut centroids = kmeans_pp_init(points, k, rng);
    let dim = points[0].len();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut history = Vec::new();

    for _ in 0..MAX_ITERS {
        let mut changed = false;
        let mut distortion = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            distortion += d;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        history.push(distortion);
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignments[i]] += 1;
            for d in 0..dim {
                sums[assignments[i]][d] += p[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centroids[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
        // Repair empty clusters after the mean update so the farthest-point
        // distances refer to current centroids.
        for c in 0..k {
            if counts[c] == 0 {
                let far = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, sq_dist(p, &centroids[assignments[i]])))
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                centroids[c] = points[far].clone();
                assignments[far] = c;
                counts[c] = 1;
            }
        }
    }

    debug_assert!(
        history.windows(2).all(|w| w[1] <= w[0] + 1e-9),
        "Lloyd objective must be non-increasing"
    );
    KmeansFit {
        centroids,
        distortion_history: history,
    }
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !seen.iter().any(|q| *q == p) {
            seen.push(p);
        }
    }
    seen.len()
}

/// Fits the displacement and area codebooks on training localizations.
///
/// Requires at least `XY_CLUSTERS` distinct (dx, dy) values and
/// `AREA_CLUSTERS` distinct areas. The two k-means runs draw from seeds
/// `seed` and `seed + 1` respectively, so a fixed seed reproduces the
/// codebooks exactly.
pub fn fit_quantizer(examples: &[LocalizationParams], seed: u64) -> Result<Quantizer> {
    let xy: Vec<Vec<f64>> = examples.iter().map(|p| vec![p.dx, p.dy]).collect();
    let areas: Vec<Vec<f64>> = examples.iter().map(|p| vec![p.a]).collect();

    let distinct_xy = count_distinct(&xy);
    if distinct_xy < XY_CLUSTERS {
        return Err(Error::TooFewDistinctPoints {
            what: "(dx, dy) displacement values",
            needed: XY_CLUSTERS,
            found: distinct_xy,
        });
    }
    let distinct_a = count_distinct(&areas);
    if distinct_a < AREA_CLUSTERS {
        return Err(Error::TooFewDistinctPoints {
            what: "area values",
            needed: AREA_CLUSTERS,
            found: distinct_a,
        });
    }

    let mut rng_xy = ChaCha8Rng::seed_from_u64(seed);
    let xy_fit = lloyd(&xy, XY_CLUSTERS, &mut rng_xy);
    let mut rng_a = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let area_fit = lloyd(&areas, AREA_CLUSTERS, &mut rng_a);

    Ok(Quantizer {
        xy_centroids: xy_fit
            .centroids
            .iter()
            .map(|c| [c[0], c[1]])
            .collect(),
        area_centroids: area_fit.centroids.iter().map(|c| c[0]).collect(),
        seed,
        xy_distortion: *xy_fit.distortion_history.last().unwrap(),
        area_distortion: *area_fit.distortion_history.last().unwrap(),
    })
}

/// Same as [`fit_quantizer`] but also returns the per-pass objective values
/// of both runs for monotonicity checks.
pub fn fit_quantizer_with_history(
    examples: &[LocalizationParams],
    seed: u64,
) -> Result<(Quantizer, Vec<f64>, Vec<f64>)> {
    // Re-run with the same seeds; lloyd is deterministic.
    let q = fit_quantizer(examples, seed)?;
    let xy: Vec<Vec<f64>> = examples.iter().map(|p| vec![p.dx, p.dy]).collect();
    let areas: Vec<Vec<f64>> = examples.iter().map(|p| vec![p.a]).collect();
    let mut rng_xy = ChaCha8Rng::seed_from_u64(seed);
    let xy_fit = lloyd(&xy, XY_CLUSTERS, &mut rng_xy);
    let mut rng_a = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let area_fit = lloyd(&areas, AREA_CLUSTERS, &mut rng_a);
    Ok((q, xy_fit.distortion_history, area_fit.distortion_history))
}

/// Maps localization parameters to their interaction type.
///
/// Nearest displacement centroid by Euclidean distance, nearest area
/// centroid by absolute difference; ties go to the lowest centroid index.
pub fn assign_type(q: &Quantizer, params: &LocalizationParams) -> InteractionType {
    let mut xy_best = 0;
    let mut xy_d = f64::INFINITY;
    for (i, c) in q.xy_centroids.iter().enumerate() {
        let d = (params.dx - c[0]).powi(2) + (params.dy - c[1]).powi(2);
        if d < xy_d {
            xy_d = d;
            xy_best = i;
        }
    }
    let mut a_best = 0;
    let mut a_d = f64::INFINITY;
    for (i, c) in q.area_centroids.iter().enumerate() {
        let d = (params.a - c).abs();
        if d < a_d {
            a_d = d;
            a_best = i;
        }
    }
    InteractionType::new(xy_best, a_best)
}

/// Category statistics for one interaction type.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TypeStats {
    pub total: usize,
    pub probabilities: BTreeMap<String, f64>,
    /// Entropy of the category distribution in nats; zero when degenerate.
    pub entropy: f64,
}

/// Per-type categorical distributions over interactee labels.
///
/// Types with no assignments get an empty distribution. Entropy uses the
/// natural log.
pub fn type_distribution(assignments: &[(InteractionType, String)]) -> Vec<TypeStats> {
    let mut counts: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); NUM_TYPES];
    for (t, label) in assignments {
        *counts[t.type_id].entry(label.clone()).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|per_label| {
            let total: usize = per_label.values().sum();
            let mut probabilities = BTreeMap::new();
            let mut entropy = 0.0;
            for (label, n) in per_label {
                let p = n as f64 / total as f64;
                entropy -= p * p.ln();
                probabilities.insert(label, p);
            }
            TypeStats {
                total,
                probabilities,
                entropy: if total == 0 { 0.0 } else { entropy },
            }
        })
        .collect()
}
