//! C interface to the `rcdt` crate.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns an [`RcdtStatus`];
//! on failure a description is available from [`rcdt_last_error`] on the same
//! thread. Images are row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rcdt::subspace::{self, FitConfig, Model};
use rcdt::transforms::{sw2_squared_from_fields, Transformer};
use rcdt::{io, make_uniform_reference1d, default_projection_grid, Error, LabeledImageSet, RawImage};

/// Status codes. Values from 10 upward coincide with the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcdtStatus {
    Ok = 0,
    /// Internal failure (a panic was caught at the boundary).
    Internal = 1,
    /// Null pointer, bad string or undersized output buffer.
    InvalidArgument = 2,
    AllZeroImage = 10,
    InvalidGrid = 11,
    InvalidDensity = 12,
    NonMonotoneCdf = 13,
    NonMonotoneInput = 14,
    GridTooSmall = 15,
    DimensionMismatch = 16,
    DegenerateClass = 17,
    MissingClass = 18,
    FormatVersionMismatch = 19,
    CorruptFile = 20,
    BadMagic = 21,
    CountMismatch = 22,
    TruncatedFile = 23,
    SupportClipped = 24,
    InsufficientSamples = 25,
    EmptyTestSet = 26,
    OverlappingSpecs = 27,
    InvalidConfig = 28,
    Io = 29,
}

impl RcdtStatus {
    fn from_code(code: i32) -> Self {
        use RcdtStatus::*;
        match code {
            10 => AllZeroImage,
            11 => InvalidGrid,
            12 => InvalidDensity,
            13 => NonMonotoneCdf,
            14 => NonMonotoneInput,
            15 => GridTooSmall,
            16 => DimensionMismatch,
            17 => DegenerateClass,
            18 => MissingClass,
            19 => FormatVersionMismatch,
            20 => CorruptFile,
            21 => BadMagic,
            22 => CountMismatch,
            23 => TruncatedFile,
            24 => SupportClipped,
            25 => InsufficientSamples,
            26 => EmptyTestSet,
            27 => OverlappingSpecs,
            28 => InvalidConfig,
            29 => Io,
            _ => Internal,
        }
    }
}

/// Forward transform bound to one image size and angle count.
pub struct RcdtTransformer {
    inner: Transformer,
}

/// Trained nearest-subspace classifier.
pub struct RcdtModel {
    model: Model,
    transformer: Transformer,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Core(Error),
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn arg(msg: impl Into<String>) -> Fail {
    Fail::Arg(msg.into())
}

/// Runs `f`, converting errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RcdtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RcdtStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            RcdtStatus::from_code(e.code())
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_last_error(msg);
            RcdtStatus::InvalidArgument
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {msg}"));
            RcdtStatus::Internal
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(arg(format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(arg(format!("{what} is null")));
    }
    if len < need {
        return Err(arg(format!("{what} holds {len} values, {need} needed")));
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| arg(format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(arg("path is null"));
    }
    CStr::from_ptr(p).to_str().map(str::to_owned).map_err(|_| arg("path is not valid UTF-8"))
}

unsafe fn image(pixels: *const f64, height: usize, width: usize) -> Result<RawImage, Fail> {
    let n = height.checked_mul(width).ok_or_else(|| arg("image size overflows"))?;
    let data = input(pixels, n, "pixels")?;
    Ok(RawImage::new(height, width, data.to_vec())?)
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(arg("output handle pointer is null"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rcdt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rcdt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a transformer for `height` x `width` images with `n_angles`
/// projection angles and positivity floor `epsilon`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rcdt_transformer_new(
    height: usize,
    width: usize,
    n_angles: usize,
    epsilon: f64,
    out: *mut *mut RcdtTransformer,
) -> RcdtStatus {
    guard(|| {
        let proj = default_projection_grid(height, width, n_angles)?;
        let reference = make_uniform_reference1d(*proj.t_grid());
        store(out, RcdtTransformer { inner: Transformer::new(proj, &reference, epsilon)? })
    })
}

/// # Safety
/// `t` must be null or a handle from [`rcdt_transformer_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rcdt_transformer_free(t: *mut RcdtTransformer) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of values in one transformed field (offsets times angles), or 0
/// for a null handle.
///
/// # Safety
/// `t` must be null or a live transformer handle.
#[no_mangle]
pub unsafe extern "C" fn rcdt_transformer_field_len(t: *const RcdtTransformer) -> usize {
    t.as_ref().map_or(0, |t| t.inner.proj().field_len())
}

/// Transforms one non-negative image. The field is written angle-major into
/// `out`, which must hold at least [`rcdt_transformer_field_len`] values.
///
/// # Safety
/// `pixels` must point to `height * width` readable values and `out` to
/// `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn rcdt_transformer_forward(
    t: *const RcdtTransformer,
    pixels: *const f64,
    height: usize,
    width: usize,
    out: *mut f64,
    out_len: usize,
) -> RcdtStatus {
    guard(|| {
        let t = handle(t, "transformer")?;
        let img = image(pixels, height, width)?;
        let dst = output(out, out_len, t.inner.proj().field_len(), "out")?;
        let field = t.inner.forward_raw(&img)?;
        dst.copy_from_slice(field.values());
        Ok(())
    })
}

/// Sliced-Wasserstein-2 distance between two images of the transformer's
/// size, each normalized to unit mass first.
///
/// # Safety
/// `a` and `b` must each point to `height * width` values; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rcdt_sw2_distance(
    t: *const RcdtTransformer,
    a: *const f64,
    b: *const f64,
    height: usize,
    width: usize,
    out: *mut f64,
) -> RcdtStatus {
    guard(|| {
        let t = handle(t, "transformer")?;
        let dst = output(out, 1, 1, "out")?;
        let fa = t.inner.forward_raw(&image(a, height, width)?)?;
        let fb = t.inner.forward_raw(&image(b, height, width)?)?;
        dst[0] = sw2_squared_from_fields(&fa, &fb, t.inner.weights())?.sqrt();
        Ok(())
    })
}

fn wrap_model(model: Model) -> Result<RcdtModel, Fail> {
    let transformer = model.transformer()?;
    Ok(RcdtModel { model, transformer })
}

/// Trains a classifier on `n` images of `height` x `width` stored back to
/// back, with labels in `0..K`. `enrich_translation` is a boolean.
///
/// # Safety
/// `images` must point to `n * height * width` values, `labels` to `n`
/// values and `out` to storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_fit(
    images: *const f64,
    labels: *const usize,
    n: usize,
    height: usize,
    width: usize,
    n_angles: usize,
    epsilon: f64,
    variance_fraction: f64,
    enrich_translation: c_int,
    out: *mut *mut RcdtModel,
) -> RcdtStatus {
    guard(|| {
        let per = height.checked_mul(width).ok_or_else(|| arg("image size overflows"))?;
        let total = per.checked_mul(n).ok_or_else(|| arg("image buffer size overflows"))?;
        let data = input(images, total, "images")?;
        if n > 0 && labels.is_null() {
            return Err(arg("labels is null"));
        }
        let labels = if n == 0 { Vec::new() } else { slice::from_raw_parts(labels, n).to_vec() };
        let imgs = data
            .chunks_exact(per.max(1))
            .take(n)
            .map(|c| RawImage::new(height, width, c.to_vec()))
            .collect::<rcdt::Result<Vec<_>>>()?;
        let set = LabeledImageSet::from_labels(imgs, labels)?;
        let config = FitConfig {
            n_angles,
            epsilon,
            variance_fraction,
            enrich_translation: enrich_translation != 0,
        };
        store(out, wrap_model(subspace::fit(&set, &config)?)?)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_load(path: *const c_char, out: *mut *mut RcdtModel) -> RcdtStatus {
    guard(|| {
        let path = path_arg(path)?;
        store(out, wrap_model(io::load_model(path)?)?)
    })
}

/// # Safety
/// `m` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_save(m: *const RcdtModel, path: *const c_char) -> RcdtStatus {
    guard(|| {
        let m = handle(m, "model")?;
        io::save_model(&m.model, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_free(m: *mut RcdtModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_num_classes(m: *const RcdtModel) -> usize {
    m.as_ref().map_or(0, |m| m.model.num_classes())
}

/// Image size the model was trained on.
///
/// # Safety
/// `m` must be a live model handle; `height` and `width` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_image_shape(
    m: *const RcdtModel,
    height: *mut usize,
    width: *mut usize,
) -> RcdtStatus {
    guard(|| {
        let m = handle(m, "model")?;
        if height.is_null() || width.is_null() {
            return Err(arg("output pointer is null"));
        }
        let (h, w) = m.model.image_shape();
        *height = h;
        *width = w;
        Ok(())
    })
}

/// Dimension of the subspace kept for class `class_id`.
///
/// # Safety
/// `m` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_class_rank(m: *const RcdtModel, class_id: usize, out: *mut usize) -> RcdtStatus {
    guard(|| {
        let m = handle(m, "model")?;
        let c = m
            .model
            .classes()
            .get(class_id)
            .ok_or_else(|| arg(format!("class {class_id} out of range")))?;
        if out.is_null() {
            return Err(arg("out is null"));
        }
        *out = c.rank();
        Ok(())
    })
}

/// Classifies one image. If `distances` is not null it receives the squared
/// distance to every class and must hold [`rcdt_model_num_classes`] values.
///
/// # Safety
/// `pixels` must point to `height * width` values, `label` must be writable
/// and `distances`, if not null, must point to `distances_len` values.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_predict(
    m: *const RcdtModel,
    pixels: *const f64,
    height: usize,
    width: usize,
    label: *mut usize,
    distances: *mut f64,
    distances_len: usize,
) -> RcdtStatus {
    guard(|| {
        let m = handle(m, "model")?;
        if label.is_null() {
            return Err(arg("label is null"));
        }
        let img = image(pixels, height, width)?;
        let (h, w) = m.model.image_shape();
        if (height, width) != (h, w) {
            return Err(Error::DimensionMismatch { expected: h * w, actual: height * width }.into());
        }
        let field = m.transformer.forward_raw(&img)?;
        let pred = m.model.classify_field(field.values())?;
        if !distances.is_null() {
            output(distances, distances_len, pred.distances.len(), "distances")?.copy_from_slice(&pred.distances);
        }
        *label = pred.label;
        Ok(())
    })
}

/// Classifies `n` images stored back to back, writing one label each.
///
/// # Safety
/// `images` must point to `n * height * width` values and `labels` to `n`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn rcdt_model_predict_batch(
    m: *const RcdtModel,
    images: *const f64,
    n: usize,
    height: usize,
    width: usize,
    labels: *mut usize,
) -> RcdtStatus {
    guard(|| {
        let m = handle(m, "model")?;
        let per = height.checked_mul(width).ok_or_else(|| arg("image size overflows"))?;
        let total = per.checked_mul(n).ok_or_else(|| arg("image buffer size overflows"))?;
        let data = input(images, total, "images")?;
        if n == 0 {
            return Ok(());
        }
        if labels.is_null() {
            return Err(arg("labels is null"));
        }
        let imgs = data
            .chunks_exact(per.max(1))
            .map(|c| RawImage::new(height, width, c.to_vec()))
            .collect::<rcdt::Result<Vec<_>>>()?;
        let pred = subspace::predict_batch(&imgs, &m.model)?;
        slice::from_raw_parts_mut(labels, n).copy_from_slice(&pred);
        Ok(())
    })
}
