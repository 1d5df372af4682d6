//! Object importance ranking by overlap with the predicted interactee.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// A recognized object in the scene (external input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub bbox: BoundingBox,
    pub category: String,
    pub object_id: String,
}

/// Sorts objects by intersection with the predicted box over the object's
/// own area, descending. The first entry is the important-object hypothesis.
///
/// Score ties rank the smaller object first, then by object_id; the
/// normalization by object area makes a fully covered small object beat a
/// partially covered large one.
pub fn rank_importance(
    objects: &[SceneObject],
    predicted: &BoundingBox,
) -> Result<Vec<(SceneObject, f64)>> {
    if objects.is_empty() {
        return Err(Error::EmptyInput("scene objects"));
    }
    let mut ranked: Vec<(SceneObject, f64)> = objects
        .iter()
        .map(|o| {
            let score = o.bbox.intersection_area(predicted) / o.bbox.area();
            (o.clone(), score)
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(a.0.bbox.area().partial_cmp(&b.0.bbox.area()).unwrap())
            .then(a.0.object_id.cmp(&b.0.object_id))
    });
    Ok(ranked)
}
