//! Prediction scoring: position and size error plus IOU, and the Near
//! Person and Random reference predictors.
//!
//! Position error is the center displacement between prediction and ground
//! truth divided by the person scale, so it is invariant under uniform
//! zoom. Size error is the absolute pixel-area difference divided by the
//! (linear) person scale; the units are pixels and the quantity is not
//! zoom-invariant, which is intentional and documented behavior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, person_scale, BoundingBox, PersonInstance};

/// One scored example: the person, the consensus ground truth, and a
/// predicted box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub person_box: BoundingBox,
    pub gt_interactee: BoundingBox,
    pub predicted: BoundingBox,
}

/// Metrics for one record, in report order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleMetrics {
    pub image_id: String,
    pub position_error: f64,
    pub size_error: f64,
    pub iou: f64,
}

/// Aggregate report: arithmetic means over the per-example metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_position_error: f64,
    pub mean_size_error: f64,
    pub mean_iou: f64,
    pub n: usize,
    pub per_example: Vec<ExampleMetrics>,
}

/// Center distance between prediction and ground truth over person scale.
pub fn position_error(r: &EvalRecord) -> f64 {
    let (px, py) = r.predicted.center();
    let (gx, gy) = r.gt_interactee.center();
    ((px - gx).powi(2) + (py - gy).powi(2)).sqrt() / person_scale(&r.person_box)
}

/// Absolute area difference over (linear) person scale.
pub fn size_error(r: &EvalRecord) -> f64 {
    (r.predicted.area() - r.gt_interactee.area()).abs() / person_scale(&r.person_box)
}

/// Near Person baseline: a square box centered on the person with area
/// 0.74 times the person box area.
pub fn near_person_baseline(person: &PersonInstance) -> BoundingBox {
    let (cx, cy) = person.person_box.center();
    let side = (0.74 * person.person_box.area()).sqrt();
    BoundingBox::centered_square(cx, cy, side)
}

/// Random baseline: a square box with center uniform over the image and
/// area uniform over [0.05, 1.0] times the image area. Not clipped to the
/// image bounds.
pub fn random_baseline(person: &PersonInstance, rng_seed: u64) -> BoundingBox {
    random_baseline_rng(person, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

/// Same as [`random_baseline`] with a caller-owned RNG, for drawing many
/// boxes from one stream.
pub fn random_baseline_rng(person: &PersonInstance, rng: &mut impl Rng) -> BoundingBox {
    let cx = rng.random_range(0.0..person.image_width);
    let cy = rng.random_range(0.0..person.image_height);
    let image_area = person.image_width * person.image_height;
    let area = rng.random_range(0.05..1.0) * image_area;
    BoundingBox::centered_square(cx, cy, area.sqrt())
}

/// Scores every record and averages the three metrics.
pub fn evaluate(records: &[EvalRecord]) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    let per_example: Vec<ExampleMetrics> = records
        .iter()
        .map(|r| ExampleMetrics {
            image_id: r.image_id.clone(),
            position_error: position_error(r),
            size_error: size_error(r),
            iou: iou(&r.predicted, &r.gt_interactee),
        })
        .collect();
    let n = per_example.len() as f64;
    Ok(EvalReport {
        mean_position_error: per_example.iter().map(|e| e.position_error).sum::<f64>() / n,
        mean_size_error: per_example.iter().map(|e| e.size_error).sum::<f64>() / n,
        mean_iou: per_example.iter().map(|e| e.iou).sum::<f64>() / n,
        n: records.len(),
        per_example,
    })
}

impl EvalReport {
    /// Fixed-column CSV: image_id, pos_err, size_err, iou.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,pos_err,size_err,iou\n");
        for e in &self.per_example {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.image_id, e.position_error, e.size_error, e.iou
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(b: BoundingBox) -> PersonInstance {
        PersonInstance {
            image_id: "img".into(),
            person_box: b,
            image_width: 640.0,
            image_height: 480.0,
        }
    }

    fn record(person_box: BoundingBox, gt: BoundingBox, pred: BoundingBox) -> EvalRecord {
        EvalRecord {
            image_id: "img".into(),
            person_box,
            gt_interactee: gt,
            predicted: pred,
        }
    }

    #[test]
    fn position_error_examples() {
        let p = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        let gt = BoundingBox::new(10.0, 10.0, 20.0, 20.0);
        assert_eq!(position_error(&record(p, gt, gt)), 0.0);

        let shifted = gt.translated(30.0, 0.0);
        assert!((position_error(&record(p, gt, shifted)) - 0.3).abs() < 1e-15);

        let vertical = gt.translated(0.0, 50.0);
        assert!((position_error(&record(p, gt, vertical)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn position_error_zoom_invariant() {
        let p = BoundingBox::new(10.0, 10.0, 50.0, 80.0);
        let gt = BoundingBox::new(100.0, 40.0, 30.0, 30.0);
        let pred = BoundingBox::new(120.0, 60.0, 40.0, 20.0);
        let base = position_error(&record(p, gt, pred));
        let zoom = 3.7;
        let scale_box = |b: &BoundingBox| {
            BoundingBox::new(b.x_min * zoom, b.y_min * zoom, b.width * zoom, b.height * zoom)
        };
        let zoomed = position_error(&record(scale_box(&p), scale_box(&gt), scale_box(&pred)));
        assert!((base - zoomed).abs() < 1e-12);
    }

    #[test]
    fn size_error_examples() {
        let p = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        let gt = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        assert_eq!(size_error(&record(p, gt, gt)), 0.0);

        let pred = BoundingBox::new(0.0, 0.0, 75.0, 100.0);
        assert!((size_error(&record(p, gt, pred)) - 25.0).abs() < 1e-12);

        // Uniform zoom scales this metric by the zoom factor.
        let zoom = 2.0;
        let scale_box = |b: &BoundingBox| {
            BoundingBox::new(b.x_min * zoom, b.y_min * zoom, b.width * zoom, b.height * zoom)
        };
        let zoomed = size_error(&record(scale_box(&p), scale_box(&gt), scale_box(&pred)));
        assert!((zoomed - 50.0).abs() < 1e-12);
    }

    #[test]
    fn near_person_examples() {
        let p = person(BoundingBox::new(0.0, 0.0, 100.0, 100.0));
        let b = near_person_baseline(&p);
        assert_eq!(b.center(), (50.0, 50.0));
        assert!((b.area() - 7400.0).abs() < 1e-9);
        assert!((b.width - 7400.0f64.sqrt()).abs() < 1e-12);
        assert!((b.area() / p.person_box.area() - 0.74).abs() < 1e-12);

        let translated = person(BoundingBox::new(30.0, -20.0, 100.0, 100.0));
        let tb = near_person_baseline(&translated);
        assert_eq!(tb.center(), (80.0, 30.0));
        assert_eq!(tb.width, b.width);
    }

    #[test]
    fn random_baseline_deterministic_and_in_bounds() {
        let p = person(BoundingBox::new(10.0, 10.0, 50.0, 50.0));
        assert_eq!(random_baseline(&p, 7), random_baseline(&p, 7));
        for seed in 0..100 {
            let b = random_baseline(&p, seed);
            let (cx, cy) = b.center();
            assert!(cx >= 0.0 && cx < p.image_width);
            assert!(cy >= 0.0 && cy < p.image_height);
            let ratio = b.area() / (p.image_width * p.image_height);
            assert!(ratio >= 0.05 - 1e-9 && ratio <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn evaluate_perfect_predictions() {
        let p = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        let gt = BoundingBox::new(120.0, 20.0, 40.0, 40.0);
        let report = evaluate(&[record(p, gt, gt), record(p, gt, gt)]).unwrap();
        assert_eq!(report.mean_position_error, 0.0);
        assert_eq!(report.mean_size_error, 0.0);
        assert_eq!(report.mean_iou, 1.0);
        assert_eq!(report.n, 2);
    }

    #[test]
    fn evaluate_echoes_hand_metrics() {
        let p = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        let gt = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        let pred = BoundingBox::new(30.0, 0.0, 100.0, 75.0);
        let report = evaluate(&[record(p, gt, pred)]).unwrap();
        // Centers (50,50) vs (80,37.5); scale 100.
        let expected_pos = (30.0f64.powi(2) + 12.5f64.powi(2)).sqrt() / 100.0;
        assert!((report.mean_position_error - expected_pos).abs() < 1e-12);
        assert!((report.mean_size_error - 25.0).abs() < 1e-12);
        // Intersection 70x75; union 10000 + 7500 - 5250.
        assert!((report.mean_iou - 5250.0 / 12250.0).abs() < 1e-12);
    }

    #[test]
    fn concatenation_mean_identity() {
        let p = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        let gt = BoundingBox::new(0.0, 0.0, 50.0, 50.0);
        let a: Vec<EvalRecord> = (0..3)
            .map(|i| record(p, gt, gt.translated(i as f64 * 10.0, 0.0)))
            .collect();
        let b: Vec<EvalRecord> = (0..2)
            .map(|i| record(p, gt, gt.translated(0.0, i as f64 * 20.0)))
            .collect();
        let ra = evaluate(&a).unwrap();
        let rb = evaluate(&b).unwrap();
        let all: Vec<EvalRecord> = a.into_iter().chain(b).collect();
        let rall = evaluate(&all).unwrap();
        let expected = (ra.mean_position_error * 3.0 + rb.mean_position_error * 2.0) / 5.0;
        assert!((rall.mean_position_error - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(evaluate(&[]), Err(Error::EmptyInput(_))));
    }
}
