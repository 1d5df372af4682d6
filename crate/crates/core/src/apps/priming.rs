//! Contextual priming of an external object detector: detections far from
//! the predicted interactee are scored out rather than removed.

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BoundingBox};

/// One detection from an external detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
    pub category: String,
}

/// How a detection counts as "inside" the enlarged interactee box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimingRule {
    /// Keep when the detection's center lies inside (closed boundaries).
    CenterInside,
    /// Keep when IOU with the enlarged box reaches the threshold.
    IouAtLeast(f64),
}

impl Default for PrimingRule {
    fn default() -> Self {
        PrimingRule::CenterInside
    }
}

/// Scales width and height by `factor` about the unchanged center.
pub fn enlarge_box(b: &BoundingBox, factor: f64) -> BoundingBox {
    assert!(factor > 0.0, "enlargement factor must be positive");
    let (cx, cy) = b.center();
    BoundingBox::new(
        cx - b.width * factor / 2.0,
        cy - b.height * factor / 2.0,
        b.width * factor,
        b.height * factor,
    )
}

/// Default priming: detections outside the 150% enlarged predicted box get
/// score negative infinity. Order is preserved and nothing is removed.
pub fn prime_detections(detections: &[Detection], predicted: &BoundingBox) -> Vec<Detection> {
    prime_detections_with(detections, predicted, PrimingRule::CenterInside)
}

/// Priming with an explicit inside rule.
pub fn prime_detections_with(
    detections: &[Detection],
    predicted: &BoundingBox,
    rule: PrimingRule,
) -> Vec<Detection> {
    let enlarged = enlarge_box(predicted, 1.5);
    detections
        .iter()
        .map(|d| {
            let inside = match rule {
                PrimingRule::CenterInside => {
                    let (cx, cy) = d.bbox.center();
                    enlarged.contains_point(cx, cy)
                }
                PrimingRule::IouAtLeast(t) => iou(&d.bbox, &enlarged) >= t,
            };
            Detection {
                bbox: d.bbox,
                score: if inside { d.score } else { f64::NEG_INFINITY },
                category: d.category.clone(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(b: BoundingBox, score: f64) -> Detection {
        Detection {
            bbox: b,
            score,
            category: "obj".into(),
        }
    }

    #[test]
    fn enlarge_examples() {
        let b = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        assert_eq!(enlarge_box(&b, 1.0), b);
        let big = enlarge_box(&b, 1.5);
        assert_eq!(big, BoundingBox::new(-25.0, -25.0, 150.0, 150.0));
        assert!((big.area() - b.area() * 2.25).abs() < 1e-9);
    }

    #[test]
    fn priming_keeps_center_inside_and_kills_outside() {
        let predicted = BoundingBox::new(100.0, 100.0, 40.0, 40.0);
        let inside = det(BoundingBox::new(110.0, 110.0, 20.0, 20.0), 0.9);
        let outside = det(BoundingBox::new(500.0, 500.0, 20.0, 20.0), 0.8);
        let out = prime_detections(&[inside.clone(), outside.clone()], &predicted);
        assert_eq!(out[0], inside);
        assert_eq!(out[1].score, f64::NEG_INFINITY);
        assert_eq!(out[1].bbox, outside.bbox);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn boundary_center_is_kept() {
        // Enlarged box is (-25,-25,150,150): right edge x = 125.
        let predicted = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        let on_edge = det(BoundingBox::new(115.0, 40.0, 20.0, 20.0), 0.5);
        let out = prime_detections(&[on_edge], &predicted);
        assert_eq!(out[0].score, 0.5);
    }

    #[test]
    fn never_raises_scores_and_preserves_order() {
        let predicted = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        let dets: Vec<Detection> = (0..20)
            .map(|i| {
                det(
                    BoundingBox::new(i as f64 * 7.0 - 30.0, 0.0, 5.0, 5.0),
                    i as f64 * 0.1 - 1.0,
                )
            })
            .collect();
        let out = prime_detections(&dets, &predicted);
        assert_eq!(out.len(), dets.len());
        for (before, after) in dets.iter().zip(&out) {
            assert!(after.score <= before.score);
            assert_eq!(after.bbox, before.bbox);
        }
    }

    #[test]
    fn iou_rule_alternative() {
        let predicted = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        // Center outside the enlarged box but with meaningful overlap.
        let straddle = det(BoundingBox::new(120.0, 0.0, 100.0, 100.0), 0.7);
        let center_rule = prime_detections(&[straddle.clone()], &predicted);
        assert_eq!(center_rule[0].score, f64::NEG_INFINITY);
        let iou_rule =
            prime_detections_with(&[straddle], &predicted, PrimingRule::IouAtLeast(0.01));
        assert_eq!(iou_rule[0].score, 0.7);
    }
}
