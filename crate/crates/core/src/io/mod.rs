//! File formats: dataset JSON, the binary descriptor store, model
//! persistence, and image output helpers.

pub mod dataset;
pub mod descriptors;
pub mod models;
pub mod pgm;
pub mod png;

pub use dataset::{load_dataset, save_dataset, Dataset, ImageEntry, PersonEntry};
pub use descriptors::DescriptorStore;
pub use models::{
    load_knn_model, load_mdn, load_quantizer, save_knn_model, save_mdn, save_quantizer,
    KnnModelFile,
};
