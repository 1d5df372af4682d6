//! Category-independent localization of a person's interactee: the object
//! of their action, predicted as a person-normalized displacement and area.
//!
//! The crate covers the full pipeline: fusing annotator boxes into ground
//! truth, quantizing interactions into 40 types, assembling descriptors
//! with per-block distance normalization, the two predictors (weighted
//! nearest-neighbor regression and a mixture density network), the
//! evaluation protocol with Near Person and Random baselines, and four
//! downstream applications (detection priming, interactee-aware seam
//! carving, importance ranking, retrieval-based captioning with BLEU).
//!
//! The `interactee` binary exposes each stage as a subcommand.

pub mod apps;
pub mod consensus;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod io;
pub mod knn;
pub mod mdn;
pub mod quantize;

pub use error::{Error, Result};
pub use geometry::{
    denormalize_to_box, iou, normalize_localization, person_scale, BoundingBox,
    LocalizationParams, PersonInstance,
};
