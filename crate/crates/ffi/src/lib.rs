//! C ABI for the interactee prediction library.
//!
//! Conventions: value types are plain repr(C) structs; models are opaque
//! handles created and freed by this library; every fallible call returns
//! an [`ItcStatus`] and leaves a message retrievable with
//! [`itc_last_error_message`] on failure. Out-parameters are written only
//! on `Ok`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use interactee::apps::{bleu, tokenize};
use interactee::consensus::{consensus_box, AnnotationSet};
use interactee::error::Error;
use interactee::eval::near_person_baseline;
use interactee::features::{assemble, DescriptorBlock, DescriptorVector};
use interactee::geometry::{
    denormalize_to_box, iou, normalize_localization, person_scale, BoundingBox,
    LocalizationParams, PersonInstance,
};
use interactee::io::{load_knn_model, load_mdn, save_mdn, DescriptorStore};
use interactee::knn::KnnModel;
use interactee::mdn::{mdn_init, mdn_predict, train, MdnNetwork, TrainConfig};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    LayoutMismatch = 3,
    TooFewExamples = 4,
    IoError = 5,
    InternalError = 6,
}

/// Axis-aligned box, pixels.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ItcBox {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
}

/// Person-normalized localization parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ItcParams {
    pub dx: f64,
    pub dy: f64,
    pub a: f64,
}

/// MDN training configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ItcMdnConfig {
    pub hidden_width: usize,
    pub components: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub sigma_floor: f64,
}

/// Opaque KNN model handle.
pub struct ItcKnnModel(KnnModel);

/// Opaque MDN handle.
pub struct ItcMdnModel(MdnNetwork);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: ItcStatus, message: impl Into<Vec<u8>>) -> ItcStatus {
    set_error(message);
    status
}

fn fail_with(err: &Error) -> ItcStatus {
    let status = match err {
        Error::LayoutMismatch(_) | Error::DimensionMismatch { .. } => ItcStatus::LayoutMismatch,
        Error::TooFewExamples { .. } | Error::TooFewDistinctPoints { .. } => {
            ItcStatus::TooFewExamples
        }
        Error::Io(_) | Error::Parse { .. } | Error::Image(_) => ItcStatus::IoError,
        Error::Validation { .. } | Error::EmptyInput(_) | Error::TargetLargerThanSource { .. } => {
            ItcStatus::InvalidArgument
        }
        Error::DuplicateBlockName(_) | Error::NonFiniteLoss { .. } => ItcStatus::InternalError,
    };
    fail(status, err.to_string())
}

/// Copies the last error message into `buf` (NUL terminated, truncating)
/// and returns the full message length in bytes, excluding the NUL.
/// A zero return means no error is stored. `buf` may be null to query the
/// needed length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn itc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let borrow = slot.borrow();
        let Some(message) = borrow.as_ref() else {
            return 0;
        };
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

fn check_box(b: &ItcBox) -> Result<BoundingBox, ItcStatus> {
    let finite =
        b.x_min.is_finite() && b.y_min.is_finite() && b.width.is_finite() && b.height.is_finite();
    if !finite || b.width <= 0.0 || b.height <= 0.0 {
        return Err(fail(
            ItcStatus::InvalidArgument,
            "box must be finite with positive width and height",
        ));
    }
    Ok(BoundingBox::new(b.x_min, b.y_min, b.width, b.height))
}

fn to_itc_box(b: &BoundingBox) -> ItcBox {
    ItcBox {
        x_min: b.x_min,
        y_min: b.y_min,
        width: b.width,
        height: b.height,
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, ItcStatus> {
    if ptr.is_null() {
        return Err(fail(ItcStatus::NullArgument, "null path"));
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail(ItcStatus::InvalidArgument, "path is not valid UTF-8")),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn itc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Person scale: sqrt of the box area. Returns a negative value on an
/// invalid box.
#[no_mangle]
pub extern "C" fn itc_person_scale(person: ItcBox) -> f64 {
    match check_box(&person) {
        Ok(b) => person_scale(&b),
        Err(_) => -1.0,
    }
}

/// Person-normalized localization of an interactee box.
///
/// # Safety
/// `out` must point to a writable `ItcParams`.
#[no_mangle]
pub unsafe extern "C" fn itc_normalize_localization(
    person: ItcBox,
    interactee: ItcBox,
    out: *mut ItcParams,
) -> ItcStatus {
    if out.is_null() {
        return fail(ItcStatus::NullArgument, "null out pointer");
    }
    let (p, i) = match (check_box(&person), check_box(&interactee)) {
        (Ok(p), Ok(i)) => (p, i),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    let y = normalize_localization(&p, &i);
    unsafe {
        *out = ItcParams {
            dx: y.dx,
            dy: y.dy,
            a: y.a,
        };
    }
    ItcStatus::Ok
}

/// Square pixel box for localization parameters on a person.
///
/// # Safety
/// `out` must point to a writable `ItcBox`.
#[no_mangle]
pub unsafe extern "C" fn itc_denormalize_to_box(
    params: ItcParams,
    person: ItcBox,
    out: *mut ItcBox,
) -> ItcStatus {
    if out.is_null() {
        return fail(ItcStatus::NullArgument, "null out pointer");
    }
    let p = match check_box(&person) {
        Ok(p) => p,
        Err(s) => return s,
    };
    if !(params.a > 0.0) {
        return fail(ItcStatus::InvalidArgument, "params.a must be positive");
    }
    let b = denormalize_to_box(
        &LocalizationParams::new(params.dx, params.dy, params.a),
        &p,
    );
    unsafe { *out = to_itc_box(&b) };
    ItcStatus::Ok
}

/// Intersection over union. Returns a negative value on invalid boxes.
#[no_mangle]
pub extern "C" fn itc_iou(a: ItcBox, b: ItcBox) -> f64 {
    match (check_box(&a), check_box(&b)) {
        (Ok(a), Ok(b)) => iou(&a, &b),
        _ => -1.0,
    }
}

/// Near Person baseline box (centered square, 0.74 of the person's area).
///
/// # Safety
/// `out` must point to a writable `ItcBox`.
#[no_mangle]
pub unsafe extern "C" fn itc_near_person_baseline(person: ItcBox, out: *mut ItcBox) -> ItcStatus {
    if out.is_null() {
        return fail(ItcStatus::NullArgument, "null out pointer");
    }
    let p = match check_box(&person) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let instance = PersonInstance {
        image_id: String::new(),
        person_box: p,
        image_width: f64::MAX,
        image_height: f64::MAX,
    };
    unsafe { *out = to_itc_box(&near_person_baseline(&instance)) };
    ItcStatus::Ok
}

/// Consensus ground-truth box from annotator boxes via mean shift plus
/// max-mean-overlap selection.
///
/// # Safety
/// `boxes` must point to `len` boxes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itc_consensus_box(
    boxes: *const ItcBox,
    len: usize,
    bandwidth: f64,
    out: *mut ItcBox,
) -> ItcStatus {
    if boxes.is_null() || out.is_null() {
        return fail(ItcStatus::NullArgument, "null boxes or out pointer");
    }
    if len == 0 {
        return fail(ItcStatus::InvalidArgument, "need at least one box");
    }
    if !(bandwidth > 0.0) {
        return fail(ItcStatus::InvalidArgument, "bandwidth must be positive");
    }
    let raw = unsafe { std::slice::from_raw_parts(boxes, len) };
    let mut converted = Vec::with_capacity(len);
    for b in raw {
        match check_box(b) {
            Ok(b) => converted.push(b),
            Err(s) => return s,
        }
    }
    let set = AnnotationSet {
        image_id: String::new(),
        person_index: 0,
        boxes: converted,
    };
    unsafe { *out = to_itc_box(&consensus_box(&set, bandwidth)) };
    ItcStatus::Ok
}

/// Descriptors arrive through the C ABI as one flat block named "raw".
fn raw_descriptor(values: &[f64]) -> DescriptorVector {
    assemble(vec![DescriptorBlock::new("raw", values.to_vec())]).expect("single block")
}

unsafe fn gather_training(
    descriptors: *const f64,
    n: usize,
    dim: usize,
    params: *const ItcParams,
) -> Result<Vec<(DescriptorVector, LocalizationParams)>, ItcStatus> {
    if descriptors.is_null() || params.is_null() {
        return Err(fail(ItcStatus::NullArgument, "null training pointers"));
    }
    if n == 0 || dim == 0 {
        return Err(fail(
            ItcStatus::InvalidArgument,
            "n and dim must be positive",
        ));
    }
    let xs = unsafe { std::slice::from_raw_parts(descriptors, n * dim) };
    let ys = unsafe { std::slice::from_raw_parts(params, n) };
    Ok((0..n)
        .map(|i| {
            (
                raw_descriptor(&xs[i * dim..(i + 1) * dim]),
                LocalizationParams::new(ys[i].dx, ys[i].dy, ys[i].a),
            )
        })
        .collect())
}

/// Fits a KNN model on row-major descriptors (n x dim) and their
/// localization parameters. On success the caller owns the handle and must
/// free it with [`itc_knn_free`].
///
/// # Safety
/// `descriptors` must hold `n * dim` values, `params` `n` entries, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itc_knn_fit(
    descriptors: *const f64,
    n: usize,
    dim: usize,
    params: *const ItcParams,
    k: usize,
    out: *mut *mut ItcKnnModel,
) -> ItcStatus {
    if out.is_null() {
        return fail(ItcStatus::NullArgument, "null out pointer");
    }
    if k == 0 {
        return fail(ItcStatus::InvalidArgument, "k must be at least 1");
    }
    let training = match unsafe { gather_training(descriptors, n, dim, params) } {
        Ok(t) => t,
        Err(s) => return s,
    };
    match KnnModel::fit(training, k) {
        Ok(model) => {
            unsafe { *out = Box::into_raw(Box::new(ItcKnnModel(model))) };
            ItcStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Loads a KNN model JSON plus the descriptor store it references.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itc_knn_load(
    model_path: *const c_char,
    store_path: *const c_char,
    out: *mut *mut ItcKnnModel,
) -> ItcStatus {
    if out.is_null() {
        return fail(ItcStatus::NullArgument, "null out pointer");
    }
    let (model_path, store_path) =
        match (unsafe { path_arg(model_path) }, unsafe { path_arg(store_path) }) {
            (Ok(m), Ok(s)) => (m, s),
            (Err(s), _) | (_, Err(s)) => return s,
        };
    let result = (|| {
        let store = DescriptorStore::load(store_path)?;
        load_knn_model(model_path)?.into_model(&store)
    })();
    match result {
        Ok(model) => {
            unsafe { *out = Box::into_raw(Box::new(ItcKnnModel(model))) };
            ItcStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Number of stored training examples.
///
/// # Safety
/// `model` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn itc_knn_len(model: *const ItcKnnModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.0.len()
}

/// Predicts localization parameters for a flat query descriptor.
///
/// # Safety
/// `model` must be a live handle; `query` must hold `dim` values; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn itc_knn_predict(
    model: *const ItcKnnModel,
    query: *const f64,
    dim: usize,
    out: *mut ItcParams,
) -> ItcStatus {
    if model.is_null() || query.is_null() || out.is_null() {
        return fail(ItcStatus::NullArgument, "null model, query, or out pointer");
    }
    let model = unsafe { &*model };
    let values = unsafe { std::slice::from_raw_parts(query, dim) };
    match model.0.predict(&raw_descriptor(values)) {
        Ok((y, _)) => {
            unsafe {
                *out = ItcParams {
                    dx: y.dx,
                    dy: y.dy,
                    a: y.a,
                };
            }
            ItcStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Frees a KNN handle. Null is a no-op.
///
/// # Safety
/// `model` must originate from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn itc_knn_free(model: *mut ItcKnnModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Trains an MDN on row-major descriptors. The handle must be freed with
/// [`itc_mdn_free`].
///
/// # Safety
/// `descriptors` must hold `n * dim` values, `params` `n` entries, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itc_mdn_train(
    descriptors: *const f64,
    n: usize,
    dim: usize,
    params: *const ItcParams,
    config: ItcMdnConfig,
    out: *mut *mut ItcMdnModel,
) -> ItcStatus {
    if out.is_null() {
        return fail(ItcStatus::NullArgument, "null out pointer");
    }
    if config.hidden_width == 0 || config.components == 0 || config.batch_size == 0 {
        return fail(
            ItcStatus::InvalidArgument,
            "hidden_width, components, and batch_size must be positive",
        );
    }
    let training = match unsafe { gather_training(descriptors, n, dim, params) } {
        Ok(t) => t,
        Err(s) => return s,
    };
    let examples: Vec<(Vec<f64>, LocalizationParams)> = training
        .into_iter()
        .map(|(d, y)| (d.values().to_vec(), y))
        .collect();
    let mut net = mdn_init(dim, &[config.hidden_width], config.components, config.seed);
    let cfg = TrainConfig {
        iterations: config.iterations,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        seed: config.seed,
        sigma_floor: config.sigma_floor,
    };
    match train(&mut net, &examples, &cfg) {
        Ok(_) => {
            unsafe { *out = Box::into_raw(Box::new(ItcMdnModel(net))) };
            ItcStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Loads an MDN from its JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itc_mdn_load(
    path: *const c_char,
    out: *mut *mut ItcMdnModel,
) -> ItcStatus {
    if out.is_null() {
        return fail(ItcStatus::NullArgument, "null out pointer");
    }
    let path = match unsafe { path_arg(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match load_mdn(path) {
        Ok(net) => {
            unsafe { *out = Box::into_raw(Box::new(ItcMdnModel(net))) };
            ItcStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Saves an MDN to a JSON file (bit-exact round trip).
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn itc_mdn_save(model: *const ItcMdnModel, path: *const c_char) -> ItcStatus {
    if model.is_null() {
        return fail(ItcStatus::NullArgument, "null model");
    }
    let path = match unsafe { path_arg(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match save_mdn(path, &unsafe { &*model }.0) {
        Ok(()) => ItcStatus::Ok,
        Err(e) => fail_with(&e),
    }
}

/// Point prediction: highest-prior component mean and its square box on
/// the person.
///
/// # Safety
/// `model` must be a live handle; `x` must hold `dim` values; out pointers
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn itc_mdn_predict(
    model: *const ItcMdnModel,
    x: *const f64,
    dim: usize,
    person: ItcBox,
    out_params: *mut ItcParams,
    out_box: *mut ItcBox,
) -> ItcStatus {
    if model.is_null() || x.is_null() || out_params.is_null() || out_box.is_null() {
        return fail(ItcStatus::NullArgument, "null argument");
    }
    let p = match check_box(&person) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let instance = PersonInstance {
        image_id: String::new(),
        person_box: p,
        image_width: f64::MAX,
        image_height: f64::MAX,
    };
    let values = unsafe { std::slice::from_raw_parts(x, dim) };
    match mdn_predict(&unsafe { &*model }.0, values, &instance) {
        Ok((y, b)) => {
            unsafe {
                *out_params = ItcParams {
                    dx: y.dx,
                    dy: y.dy,
                    a: y.a,
                };
                *out_box = to_itc_box(&b);
            }
            ItcStatus::Ok
        }
        Err(e) => fail_with(&e),
    }
}

/// Frees an MDN handle. Null is a no-op.
///
/// # Safety
/// `model` must originate from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn itc_mdn_free(model: *mut ItcMdnModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Combined BLEU of a candidate sentence against reference sentences,
/// tokenized as the library does (lowercase, punctuation stripped). Writes
/// the combined score to `out`.
///
/// # Safety
/// `candidate` and each of the `n_refs` entries of `references` must be
/// NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itc_bleu(
    candidate: *const c_char,
    references: *const *const c_char,
    n_refs: usize,
    max_n: usize,
    out: *mut f64,
) -> ItcStatus {
    if candidate.is_null() || references.is_null() || out.is_null() {
        return fail(ItcStatus::NullArgument, "null argument");
    }
    if n_refs == 0 || max_n == 0 {
        return fail(
            ItcStatus::InvalidArgument,
            "need at least one reference and max_n >= 1",
        );
    }
    let cand = match unsafe { CStr::from_ptr(candidate) }.to_str() {
        Ok(s) => tokenize(s),
        Err(_) => return fail(ItcStatus::InvalidArgument, "candidate is not valid UTF-8"),
    };
    let ref_ptrs = unsafe { std::slice::from_raw_parts(references, n_refs) };
    let mut refs = Vec::with_capacity(n_refs);
    for &ptr in ref_ptrs {
        if ptr.is_null() {
            return fail(ItcStatus::NullArgument, "null reference string");
        }
        match unsafe { CStr::from_ptr(ptr) }.to_str() {
            Ok(s) => refs.push(tokenize(s)),
            Err(_) => return fail(ItcStatus::InvalidArgument, "reference is not valid UTF-8"),
        }
    }
    unsafe { *out = bleu(&cand, &refs, max_n).combined };
    ItcStatus::Ok
}
