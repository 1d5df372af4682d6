//! Box arithmetic and the person-normalized localization parameterization.
//!
//! An interactee's placement is expressed relative to the person acting on
//! it: displacement from the person's center and area, both normalized by
//! the person's scale, so that near and far instances of a similar
//! interaction are encoded the same way.

use serde::{Deserialize, Serialize};

/// Axis-aligned pixel rectangle stored as (x_min, y_min, width, height).
///
/// Width and height must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    /// # Panics
    /// Panics if `width` or `height` is not strictly positive or any field
    /// is non-finite. Use the dataset loader for untrusted input.
    pub fn new(x_min: f64, y_min: f64, width: f64, height: f64) -> Self {
        assert!(
            width > 0.0 && height > 0.0,
            "box dimensions must be positive: {width}x{height}"
        );
        assert!(
            x_min.is_finite() && y_min.is_finite() && width.is_finite() && height.is_finite(),
            "box fields must be finite"
        );
        Self {
            x_min,
            y_min,
            width,
            height,
        }
    }

    /// Builds a box from opposite corners (x1,y1)-(x2,y2) in any order.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(x1.min(x2), y1.min(y2), (x2 - x1).abs(), (y2 - y1).abs())
    }

    /// Square box of the given side, centered at (cx, cy).
    pub fn centered_square(cx: f64, cy: f64, side: f64) -> Self {
        Self::new(cx - side / 2.0, cy - side / 2.0, side, side)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x_min + self.width / 2.0, self.y_min + self.height / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.width
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.height
    }

    /// Closed-boundary point containment.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max() && y >= self.y_min && y <= self.y_max()
    }

    /// Area of overlap with `other`; zero when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x_max().min(other.x_max()) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max().min(other.y_max()) - self.y_min.max(other.y_min)).max(0.0);
        w * h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x_min + dx, self.y_min + dy, self.width, self.height)
    }
}

/// Person-normalized interactee placement: center displacement (dx, dy) in
/// person-scale units and area `a` in person-scale-squared units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationParams {
    pub dx: f64,
    pub dy: f64,
    pub a: f64,
}

impl LocalizationParams {
    pub fn new(dx: f64, dy: f64, a: f64) -> Self {
        Self { dx, dy, a }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.a.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.a]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// A detected or annotated person together with the dimensions of its image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonInstance {
    pub image_id: String,
    pub person_box: BoundingBox,
    pub image_width: f64,
    pub image_height: f64,
}

/// Linear scale of a person box: sqrt of its area.
///
/// Symmetric in width and height, and leaves normalized areas unchanged
/// under uniform image rescaling.
pub fn person_scale(person_box: &BoundingBox) -> f64 {
    (person_box.width * person_box.height).sqrt()
}

/// Expresses an interactee box relative to a person box.
///
/// dx, dy are the displacement from the person's center to the interactee's
/// center divided by the person scale; `a` is the interactee's area divided
/// by the squared person scale.
pub fn normalize_localization(
    person_box: &BoundingBox,
    interactee_box: &BoundingBox,
) -> LocalizationParams {
    let s = person_scale(person_box);
    let (pcx, pcy) = person_box.center();
    let (icx, icy) = interactee_box.center();
    LocalizationParams {
        dx: (icx - pcx) / s,
        dy: (icy - pcy) / s,
        a: interactee_box.area() / (s * s),
    }
}

/// Projects localization parameters back into pixel space as a square box.
///
/// The box is centered at the person's center plus the scaled displacement
/// and has side `s * sqrt(a)`. Aspect ratio is not recoverable from the
/// parameterization, so the output is always square. No clipping to image
/// bounds is applied; that is the caller's concern.
pub fn denormalize_to_box(params: &LocalizationParams, person_box: &BoundingBox) -> BoundingBox {
    assert!(params.a > 0.0, "localization area must be positive");
    let s = person_scale(person_box);
    let (pcx, pcy) = person_box.center();
    let side = s * params.a.sqrt();
    BoundingBox::centered_square(pcx + s * params.dx, pcy + s * params.dy, side)
}

/// Intersection over union of two boxes, in [0, 1].
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
