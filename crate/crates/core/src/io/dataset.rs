//! The dataset file: images, person boxes, annotator boxes, consensus
//! ground truth, descriptor references, captions, and scene objects.
//!
//! Boxes may be written either as (x_min, y_min, width, height) or as
//! corner pairs (x1, y1, x2, y2); both parse to the canonical form, in
//! which saves are emitted. On load every box is clamped to the image
//! bounds and each adjustment counts as one warning.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::apps::SceneObject;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

use super::descriptors::DescriptorStore;

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub version: u32,
    pub images: Vec<ImageEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub persons: Vec<PersonEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonEntry {
    pub person_box: BoundingBox,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotator_boxes: Option<Vec<BoundingBox>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_interactee: Option<BoundingBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descriptor_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub captions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene_objects: Option<Vec<SceneObject>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interactee_category: Option<String>,
}

// Raw mirror types: boxes in either representation, validated on convert.

#[derive(Deserialize)]
#[serde(untagged)]
enum RawBox {
    Tlwh {
        x_min: f64,
        y_min: f64,
        width: f64,
        height: f64,
    },
    Corners {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
    },
}

#[derive(Deserialize)]
struct RawSceneObject {
    bbox: RawBox,
    category: String,
    object_id: String,
}

#[derive(Deserialize)]
struct RawPerson {
    person_box: RawBox,
    #[serde(default)]
    annotator_boxes: Option<Vec<RawBox>>,
    #[serde(default)]
    gt_interactee: Option<RawBox>,
    #[serde(default)]
    descriptor_ref: Option<String>,
    #[serde(default)]
    captions: Option<Vec<String>>,
    #[serde(default)]
    scene_objects: Option<Vec<RawSceneObject>>,
    #[serde(default)]
    interactee_category: Option<String>,
}

#[derive(Deserialize)]
struct RawImage {
    image_id: String,
    width: f64,
    height: f64,
    persons: Vec<RawPerson>,
}

#[derive(Deserialize)]
struct RawDataset {
    version: u32,
    images: Vec<RawImage>,
}

fn convert_box(raw: &RawBox, locator: &str) -> Result<BoundingBox> {
    let (x_min, y_min, width, height) = match *raw {
        RawBox::Tlwh {
            x_min,
            y_min,
            width,
            height,
        } => (x_min, y_min, width, height),
        RawBox::Corners { x1, y1, x2, y2 } => {
            (x1.min(x2), y1.min(y2), (x2 - x1).abs(), (y2 - y1).abs())
        }
    };
    if ![x_min, y_min, width, height].iter().all(|v| v.is_finite()) {
        return Err(Error::validation(locator, "box fields must be finite"));
    }
    if width <= 0.0 || height <= 0.0 {
        return Err(Error::validation(
            locator,
            format!("box dimensions must be positive, got {width}x{height}"),
        ));
    }
    Ok(BoundingBox::new(x_min, y_min, width, height))
}

/// Intersects a box with [0, w] x [0, h]; errors when nothing positive is
/// left, bumps the warning counter when anything was trimmed.
fn clamp_box(
    b: BoundingBox,
    image_w: f64,
    image_h: f64,
    locator: &str,
    warnings: &mut usize,
) -> Result<BoundingBox> {
    let x0 = b.x_min.max(0.0);
    let y0 = b.y_min.max(0.0);
    let x1 = b.x_max().min(image_w);
    let y1 = b.y_max().min(image_h);
    if x1 - x0 <= 0.0 || y1 - y0 <= 0.0 {
        return Err(Error::validation(
            locator,
            "box lies entirely outside the image bounds",
        ));
    }
    let clamped = BoundingBox::new(x0, y0, x1 - x0, y1 - y0);
    if clamped != b {
        *warnings += 1;
    }
    Ok(clamped)
}

/// Loads and validates a dataset. Returns the dataset and the number of
/// boxes that needed clamping to the image bounds.
pub fn load_dataset(path: &Path) -> Result<(Dataset, usize)> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawDataset = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;

    let mut warnings = 0usize;
    let mut images = Vec::with_capacity(raw.images.len());
    for (ii, img) in raw.images.iter().enumerate() {
        let img_loc = format!("images[{ii}]");
        if raw.images[..ii].iter().any(|o| o.image_id == img.image_id) {
            return Err(Error::validation(
                format!("{img_loc}.image_id"),
                format!("duplicate image_id {:?}", img.image_id),
            ));
        }
        if !(img.width > 0.0 && img.height > 0.0) {
            return Err(Error::validation(
                &img_loc,
                "image width and height must be positive",
            ));
        }
        let mut persons = Vec::with_capacity(img.persons.len());
        for (pi, p) in img.persons.iter().enumerate() {
            let loc = format!("{img_loc}.persons[{pi}]");
            let person_box = clamp_box(
                convert_box(&p.person_box, &format!("{loc}.person_box"))?,
                img.width,
                img.height,
                &format!("{loc}.person_box"),
                &mut warnings,
            )?;
            let annotator_boxes = match &p.annotator_boxes {
                None => None,
                Some(list) => {
                    let mut out = Vec::with_capacity(list.len());
                    for (bi, rb) in list.iter().enumerate() {
                        let bloc = format!("{loc}.annotator_boxes[{bi}]");
                        out.push(clamp_box(
                            convert_box(rb, &bloc)?,
                            img.width,
                            img.height,
                            &bloc,
                            &mut warnings,
                        )?);
                    }
                    Some(out)
                }
            };
            let gt_interactee = match &p.gt_interactee {
                None => None,
                Some(rb) => {
                    let bloc = format!("{loc}.gt_interactee");
                    Some(clamp_box(
                        convert_box(rb, &bloc)?,
                        img.width,
                        img.height,
                        &bloc,
                        &mut warnings,
                    )?)
                }
            };
            let scene_objects = match &p.scene_objects {
                None => None,
                Some(list) => {
                    let mut out = Vec::with_capacity(list.len());
                    for (oi, ro) in list.iter().enumerate() {
                        let oloc = format!("{loc}.scene_objects[{oi}].bbox");
                        out.push(SceneObject {
                            bbox: clamp_box(
                                convert_box(&ro.bbox, &oloc)?,
                                img.width,
                                img.height,
                                &oloc,
                                &mut warnings,
                            )?,
                            category: ro.category.clone(),
                            object_id: ro.object_id.clone(),
                        });
                    }
                    Some(out)
                }
            };
            persons.push(PersonEntry {
                person_box,
                annotator_boxes,
                gt_interactee,
                descriptor_ref: p.descriptor_ref.clone(),
                captions: p.captions.clone(),
                scene_objects,
                interactee_category: p.interactee_category.clone(),
            });
        }
        images.push(ImageEntry {
            image_id: img.image_id.clone(),
            width: img.width,
            height: img.height,
            persons,
        });
    }

    Ok((
        Dataset {
            version: raw.version,
            images,
        },
        warnings,
    ))
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut text = serde_json::to_string_pretty(dataset).expect("dataset serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

impl Dataset {
    /// Checks that every descriptor_ref names a row of the store.
    pub fn validate_descriptor_refs(&self, store: &DescriptorStore) -> Result<()> {
        for (ii, img) in self.images.iter().enumerate() {
            for (pi, p) in img.persons.iter().enumerate() {
                if let Some(key) = &p.descriptor_ref {
                    if store.get(key).is_none() {
                        return Err(Error::validation(
                            format!("images[{ii}].persons[{pi}].descriptor_ref"),
                            format!("descriptor key {key:?} not found in the store"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_file_loads() {
        let f = write_temp(
            r#"{"version":1,"images":[{"image_id":"a","width":100,"height":80,
                "persons":[{"person_box":{"x_min":1,"y_min":2,"width":10,"height":20}}]}]}"#,
        );
        let (ds, warnings) = load_dataset(f.path()).unwrap();
        assert_eq!(warnings, 0);
        assert_eq!(ds.images.len(), 1);
        assert_eq!(
            ds.images[0].persons[0].person_box,
            BoundingBox::new(1.0, 2.0, 10.0, 20.0)
        );
    }

    #[test]
    fn corner_boxes_convert() {
        let f = write_temp(
            r#"{"version":1,"images":[{"image_id":"a","width":100,"height":80,
                "persons":[{"person_box":{"x1":30,"y1":40,"x2":10,"y2":20}}]}]}"#,
        );
        let (ds, _) = load_dataset(f.path()).unwrap();
        assert_eq!(
            ds.images[0].persons[0].person_box,
            BoundingBox::new(10.0, 20.0, 20.0, 20.0)
        );
    }

    #[test]
    fn duplicate_image_id_rejected_with_locator() {
        let f = write_temp(
            r#"{"version":1,"images":[
                {"image_id":"a","width":10,"height":10,"persons":[]},
                {"image_id":"a","width":10,"height":10,"persons":[]}]}"#,
        );
        match load_dataset(f.path()) {
            Err(Error::Validation { locator, message }) => {
                assert_eq!(locator, "images[1].image_id");
                assert!(message.contains("\"a\""));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_box_clamps_with_warning() {
        let f = write_temp(
            r#"{"version":1,"images":[{"image_id":"a","width":100,"height":80,
                "persons":[{"person_box":{"x_min":-5,"y_min":0,"width":20,"height":90}}]}]}"#,
        );
        let (ds, warnings) = load_dataset(f.path()).unwrap();
        assert_eq!(warnings, 1);
        assert_eq!(
            ds.images[0].persons[0].person_box,
            BoundingBox::new(0.0, 0.0, 15.0, 80.0)
        );
    }

    #[test]
    fn fully_outside_box_rejected() {
        let f = write_temp(
            r#"{"version":1,"images":[{"image_id":"a","width":100,"height":80,
                "persons":[{"person_box":{"x_min":200,"y_min":0,"width":20,"height":20}}]}]}"#,
        );
        assert!(matches!(load_dataset(f.path()), Err(Error::Validation { .. })));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        let f = write_temp("{not json");
        assert!(matches!(load_dataset(f.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let f = write_temp(
            r#"{"version":1,"images":[{"image_id":"a","width":100,"height":80,
                "persons":[{"person_box":{"x_min":1,"y_min":2,"width":10,"height":20},
                            "annotator_boxes":[{"x_min":0,"y_min":0,"width":5,"height":5}],
                            "gt_interactee":{"x_min":3,"y_min":3,"width":4,"height":4},
                            "descriptor_ref":"a#0",
                            "captions":["a person does a thing"],
                            "interactee_category":"cup"}]}]}"#,
        );
        let (ds, _) = load_dataset(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_dataset(out.path(), &ds).unwrap();
        let (again, warnings) = load_dataset(out.path()).unwrap();
        assert_eq!(ds, again);
        assert_eq!(warnings, 0);
    }
}
