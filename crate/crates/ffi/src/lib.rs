//! C ABI over `shiftbench`.
//!
//! Every fallible function returns a [`ShiftbenchStatus`]; on failure the
//! message is available from [`shiftbench_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.
//! Strings returned through out-pointers are owned by the caller and released
//! with [`shiftbench_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use shiftbench::manifest::{label_distribution, load_manifest, save_manifest, DatasetManifest, Split};
use shiftbench::metrics::iou;
use shiftbench::shift::{make_shift, resample, ResamplePlan, ShiftScenario};
use shiftbench::simmap::{cosine_similarity, keyword_embed, EmbeddingStore, EmbeddingVector};
use shiftbench::trainmap::{t_rain, OracleConfig};
use shiftbench::Error;

/// Status codes. The non-zero library codes match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftbenchStatus {
    Ok = 0,
    Validation = 2,
    Io = 3,
    Coverage = 4,
    NullPointer = 5,
    InvalidUtf8 = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftbenchBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

/// Owned dataset manifest.
pub struct ShiftbenchManifest(DatasetManifest);

/// Owned embedding store.
pub struct ShiftbenchEmbeddingStore(EmbeddingStore);

pub const SHIFTBENCH_SPLIT_TRAIN: i32 = 0;
pub const SHIFTBENCH_SPLIT_TEST: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', "\\0");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(ShiftbenchStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            3 => ShiftbenchStatus::Io,
            4 => ShiftbenchStatus::Coverage,
            _ => ShiftbenchStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ShiftbenchStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ShiftbenchStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            ShiftbenchStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ShiftbenchStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ShiftbenchStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn split_arg(split: i32) -> Result<Split, Failure> {
    match split {
        SHIFTBENCH_SPLIT_TRAIN => Ok(Split::Train),
        SHIFTBENCH_SPLIT_TEST => Ok(Split::Test),
        other => Err(Failure(
            ShiftbenchStatus::Validation,
            format!("unknown split code {other}"),
        )),
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(ShiftbenchStatus::Validation, "string contains NUL".into()))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn shiftbench_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shiftbench_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a JSONL manifest.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_manifest_load(
    path: *const c_char,
    out: *mut *mut ShiftbenchManifest,
) -> ShiftbenchStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let m = load_manifest(&path)?;
        *out = Box::into_raw(Box::new(ShiftbenchManifest(m)));
        Ok(())
    })
}

/// Writes a manifest as JSONL, atomically.
///
/// # Safety
/// `manifest` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_manifest_save(
    manifest: *const ShiftbenchManifest,
    path: *const c_char,
) -> ShiftbenchStatus {
    guard(|| {
        let m = manifest.as_ref().ok_or_else(|| null("manifest"))?;
        let path = PathBuf::from(str_arg(path, "path")?);
        save_manifest(&m.0, &path)?;
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `manifest` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_manifest_len(manifest: *const ShiftbenchManifest) -> usize {
    manifest.as_ref().map_or(0, |m| m.0.len())
}

/// Label count for `class` within `split`.
///
/// # Safety
/// `manifest` must be a live handle, `class` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_manifest_class_count(
    manifest: *const ShiftbenchManifest,
    split: i32,
    class: *const c_char,
    out: *mut u64,
) -> ShiftbenchStatus {
    guard(|| {
        let m = manifest.as_ref().ok_or_else(|| null("manifest"))?;
        let out = out_arg(out, "out")?;
        let class = shiftbench::manifest::ClassLabel::new(str_arg(class, "class")?)?;
        *out = label_distribution(&m.0, split_arg(split)?).get(&class).unwrap_or(0);
        Ok(())
    })
}

/// # Safety
/// `manifest` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_manifest_free(manifest: *mut ShiftbenchManifest) {
    if !manifest.is_null() {
        drop(Box::from_raw(manifest));
    }
}

/// Draws a shifted label distribution from `scenario_json` and resamples
/// `split` of `manifest` to it.
///
/// # Safety
/// `manifest` must be a live handle, `scenario_json` a NUL-terminated string
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_shift_simulate(
    manifest: *const ShiftbenchManifest,
    scenario_json: *const c_char,
    split: i32,
    with_replacement: bool,
    seed: u64,
    out: *mut *mut ShiftbenchManifest,
) -> ShiftbenchStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = manifest.as_ref().ok_or_else(|| null("manifest"))?;
        let scenario: ShiftScenario = serde_json::from_str(str_arg(scenario_json, "scenario_json")?)
            .map_err(|e| Failure(ShiftbenchStatus::Validation, format!("scenario: {e}")))?;
        let split = split_arg(split)?;
        let target = make_shift(&scenario, &label_distribution(&m.0, split), seed)?;
        let plan = ResamplePlan {
            target,
            with_replacement,
            seed,
        };
        let shifted = resample(&m.0, &plan, split)?;
        *out = Box::into_raw(Box::new(ShiftbenchManifest(shifted)));
        Ok(())
    })
}

/// Loads an embedding CSV (`key,dim,v0,...`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_store_load(
    path: *const c_char,
    out: *mut *mut ShiftbenchEmbeddingStore,
) -> ShiftbenchStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let store = EmbeddingStore::load_csv(&path)?;
        *out = Box::into_raw(Box::new(ShiftbenchEmbeddingStore(store)));
        Ok(())
    })
}

/// Creates an empty store; scoring then falls back to keyword embeddings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_store_new(
    dims: usize,
    out: *mut *mut ShiftbenchEmbeddingStore,
) -> ShiftbenchStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let store = EmbeddingStore::new(dims)?;
        *out = Box::into_raw(Box::new(ShiftbenchEmbeddingStore(store)));
        Ok(())
    })
}

/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_store_dims(store: *const ShiftbenchEmbeddingStore) -> usize {
    store.as_ref().map_or(0, |s| s.0.dims())
}

/// # Safety
/// `store` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_store_free(store: *mut ShiftbenchEmbeddingStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Cosine similarity of two `len`-element vectors.
///
/// # Safety
/// `x` and `y` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_cosine(
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> ShiftbenchStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if x.is_null() || y.is_null() {
            return Err(null("vector"));
        }
        let x = EmbeddingVector::new(std::slice::from_raw_parts(x, len).to_vec())?;
        let y = EmbeddingVector::new(std::slice::from_raw_parts(y, len).to_vec())?;
        *out = cosine_similarity(&x, &y)?;
        Ok(())
    })
}

/// Hashed keyword embedding of `n_tokens` strings into `out[0..dims]`.
///
/// # Safety
/// `tokens` must point to `n_tokens` NUL-terminated strings and `out` to
/// `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_keyword_embed(
    tokens: *const *const c_char,
    n_tokens: usize,
    dims: usize,
    out: *mut f64,
    out_len: usize,
) -> ShiftbenchStatus {
    guard(|| {
        if tokens.is_null() || out.is_null() {
            return Err(null("tokens or out"));
        }
        if out_len < dims {
            return Err(Failure(
                ShiftbenchStatus::BufferTooSmall,
                format!("output holds {out_len} values, need {dims}"),
            ));
        }
        let words = std::slice::from_raw_parts(tokens, n_tokens)
            .iter()
            .map(|&t| str_arg(t, "token"))
            .collect::<Result<Vec<_>, _>>()?;
        let v = keyword_embed(&words, dims)?;
        std::slice::from_raw_parts_mut(out, dims).copy_from_slice(v.values());
        Ok(())
    })
}

/// Intersection over union of two boxes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftbench_iou(
    a: ShiftbenchBox,
    b: ShiftbenchBox,
    out: *mut f64,
) -> ShiftbenchStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let a = shiftbench::manifest::BBox::new(a.x1, a.y1, a.x2, a.y2)?;
        let b = shiftbench::manifest::BBox::new(b.x1, b.y1, b.x2, b.y2)?;
        *out = iou(&a, &b);
        Ok(())
    })
}

/// Runs similarity-mapped augmentation. `dims` and `iterations` of 0 select
/// the store dimension and the real training-set size. On success `*out`
/// receives the augmented manifest and, if `report_json` is non-null, it
/// receives the augmentation report as JSON.
///
/// # Safety
/// `real`, `synthetic` and `store` must be live handles; `out` writable;
/// `report_json` null or writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn shiftbench_augment(
    real: *const ShiftbenchManifest,
    synthetic: *const ShiftbenchManifest,
    store: *const ShiftbenchEmbeddingStore,
    eta: usize,
    beta: usize,
    dims: usize,
    iterations: usize,
    seed: u64,
    out: *mut *mut ShiftbenchManifest,
    report_json: *mut *mut c_char,
) -> ShiftbenchStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if let Some(r) = report_json.as_mut() {
            *r = ptr::null_mut();
        }
        let real = real.as_ref().ok_or_else(|| null("real"))?;
        let synthetic = synthetic.as_ref().ok_or_else(|| null("synthetic"))?;
        let store = store.as_ref().ok_or_else(|| null("store"))?;
        let dims = if dims == 0 { store.0.dims() } else { dims };
        let cfg = OracleConfig::new(eta, beta, dims, seed)?;
        let iterations = (iterations > 0).then_some(iterations);
        let result = t_rain(&real.0, &synthetic.0, &store.0, &cfg, iterations)?;
        if let Some(r) = report_json.as_mut() {
            let text = serde_json::to_string(&result.report)
                .map_err(|e| Failure(ShiftbenchStatus::Validation, e.to_string()))?;
            *r = into_c_string(text)?;
        }
        *out = Box::into_raw(Box::new(ShiftbenchManifest(result.manifest)));
        Ok(())
    })
}
