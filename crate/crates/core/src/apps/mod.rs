//! Downstream consumers of a predicted interactee box: detector priming,
//! interactee-aware retargeting, object importance ranking, and
//! retrieval-based captioning with BLEU scoring.

pub mod caption;
pub mod importance;
pub mod priming;
pub mod retarget;

pub use caption::{bleu, retrieve_captions, tokenize, BleuScore, CaptionedExample};
pub use importance::{rank_importance, SceneObject};
pub use priming::{enlarge_box, prime_detections, prime_detections_with, Detection, PrimingRule};
pub use retarget::{
    boost_energy, find_min_vertical_seam, gradient_energy, luminance, retarget,
    vertical_seam_with_total, EnergyMap, Grid, RgbGrid,
};
