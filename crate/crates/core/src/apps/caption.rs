//! Retrieval-based captioning and BLEU scoring.
//!
//! A query image is described by adopting the sentences of its nearest
//! database entries under a joint distance over the descriptor and the
//! predicted localization parameters, each term standardized by the spread
//! of that distance across the database. Retrieved sentences are scored
//! against references with n-gram precision BLEU.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{
    fit_normalizer, normalized_distance, BlockNormalizer, DescriptorVector, DEFAULT_MAX_PAIRS,
};
use crate::geometry::LocalizationParams;

/// A database image: descriptor, localization parameters, and its
/// human-written sentences as lowercase token lists.
#[derive(Debug, Clone)]
pub struct CaptionedExample {
    pub descriptor: DescriptorVector,
    pub params: LocalizationParams,
    pub sentences: Vec<Vec<String>>,
}

/// Default number of neighbor images to adopt sentences from.
pub const DEFAULT_K_S: usize = 5;

/// Matches the pair-sampling scheme of `fit_normalizer`.
const PAIR_SAMPLE_SEED: u64 = 0x0ddba12;

fn params_distance(a: &LocalizationParams, b: &LocalizationParams) -> f64 {
    let (pa, pb) = (a.as_array(), b.as_array());
    pa.iter()
        .zip(&pb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Population std of a pairwise distance over db entries, with the same
/// subsampling cap as normalizer fitting; falls back to 1 when degenerate.
fn pairwise_distance_std(n: usize, max_pairs: usize, mut dist: impl FnMut(usize, usize) -> f64) -> f64 {
    if n < 2 {
        return 1.0;
    }
    let all_pairs = n * (n - 1) / 2;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    if all_pairs <= max_pairs {
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist(i, j);
                sum += d;
                sum_sq += d * d;
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
            let d = dist(i, j);
            sum += d;
            sum_sq += d * d;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let std = (sum_sq / count as f64 - mean * mean).max(0.0).sqrt();
    if std < 1e-12 {
        1.0
    } else {
        std
    }
}

/// Retrieves the sentences of the `k_s` database entries nearest the query
/// under the standardized joint descriptor/parameter distance, nearest
/// entry first.
pub fn retrieve_captions(
    query_descriptor: &DescriptorVector,
    query_params: &LocalizationParams,
    db: &[CaptionedExample],
    k_s: usize,
) -> Result<Vec<Vec<String>>> {
    assert!(k_s >= 1, "k_s must be at least 1");
    if db.len() < k_s {
        return Err(Error::TooFewExamples {
            needed: k_s,
            got: db.len(),
        });
    }
    let descriptors: Vec<DescriptorVector> = db.iter().map(|e| e.descriptor.clone()).collect();
    let normalizer = if db.len() >= 2 {
        fit_normalizer(&descriptors, DEFAULT_MAX_PAIRS)?
    } else {
        BlockNormalizer::unit(descriptors[0].layout().clone())
    };

    let s_x = pairwise_distance_std(db.len(), DEFAULT_MAX_PAIRS, |i, j| {
        normalized_distance(&normalizer, &descriptors[i], &descriptors[j]).unwrap_or(0.0)
    });
    let s_y = pairwise_distance_std(db.len(), DEFAULT_MAX_PAIRS, |i, j| {
        params_distance(&db[i].params, &db[j].params)
    });

    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(db.len());
    for (i, entry) in db.iter().enumerate() {
        let d_x = normalized_distance(&normalizer, query_descriptor, &entry.descriptor)?;
        let d_y = params_distance(query_params, &entry.params);
        let joint = ((d_x / s_x).powi(2) + (d_y / s_y).powi(2)).sqrt();
        scored.push((joint, i));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    Ok(scored[..k_s]
        .iter()
        .flat_map(|&(_, i)| db[i].sentences.iter().cloned())
        .collect())
}

/// Lowercases, strips punctuation characters, and splits on whitespace.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// BLEU output: per-n scores (brevity penalty included), the combined
/// geometric-mean score, and the pieces it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    pub per_n: Vec<f64>,
    pub combined: f64,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub effective_ref_len: usize,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Modified n-gram precision BLEU against multiple references.
///
/// Candidate counts are clipped by each gram's maximum count across the
/// references. Per-n scores are brevity penalty times raw precision; the
/// combined score takes a uniform geometric mean over n with precisions
/// floored at 1e-9 inside the log only. The brevity penalty reference
/// length is the one closest to the candidate length (ties to shorter).
/// An empty candidate scores zero everywhere.
pub fn bleu(candidate: &[String], references: &[Vec<String>], max_n: usize) -> BleuScore {
    assert!(max_n >= 1, "max_n must be at least 1");
    assert!(!references.is_empty(), "need at least one reference");

    let c = candidate.len();
    if c == 0 {
        return BleuScore {
            per_n: vec![0.0; max_n],
            combined: 0.0,
            brevity_penalty: 0.0,
            candidate_len: 0,
            effective_ref_len: 0,
        };
    }

    let r = references
        .iter()
        .map(|t| t.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap();
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };

    let mut per_n = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(candidate, n);
        let mut matched = 0usize;
        for (gram, &count) in &cand_counts {
            let clip = references
                .iter()
                .map(|reference| *ngram_counts(reference, n).get(gram).unwrap_or(&0))
                .max()
                .unwrap_or(0);
            matched += count.min(clip);
        }
        let total = c.saturating_sub(n - 1);
        let p = if total == 0 {
            0.0
        } else {
            matched as f64 / total as f64
        };
        per_n.push(bp * p);
        log_sum += (1.0 / max_n as f64) * p.max(1e-9).ln();
    }

    BleuScore {
        per_n,
        combined: bp * log_sum.exp(),
        brevity_penalty: bp,
        candidate_len: c,
        effective_ref_len: r,
    }
}
