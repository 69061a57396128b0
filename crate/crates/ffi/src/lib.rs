//! C ABI over the somnogray core.
//!
//! Every fallible call returns an [`SgStatus`]. On failure a message is kept
//! per thread and can be fetched with [`sg_last_error_message`]. Objects are
//! opaque handles created by `*_new`/`*_load`/`*_read_csv` calls and released
//! with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use somnogray::dsp::PreprocConfig;
use somnogray::edf::ChannelSignal;
use somnogray::eval::{agreement, confusion};
use somnogray::hypno::{EpochGrid, Hypnodensity, Hypnogram, Stage, N_STAGES};
use somnogray::reportio::{read_hypnodensity_csv, read_model, read_text};
use somnogray::stager::{stage_recording, SoftmaxModel};
use somnogray::uncertainty::{compute_uncertainty, select_gray_rank, select_gray_threshold, RankPooling, UncertaintyMetric};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or a buffer had the wrong length.
    InvalidArgument = 2,
    /// Input data could not be read or failed validation.
    Data = 3,
    /// A numeric routine failed.
    Numeric = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Uncertainty metric selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgMetric {
    LeastConfidence = 0,
    Margin = 1,
    Ratio = 2,
    Unlikeability = 3,
    Entropy = 4,
}

impl From<SgMetric> for UncertaintyMetric {
    fn from(m: SgMetric) -> Self {
        match m {
            SgMetric::LeastConfidence => UncertaintyMetric::LeastConfidence,
            SgMetric::Margin => UncertaintyMetric::MarginOfConfidence,
            SgMetric::Ratio => UncertaintyMetric::RatioOfConfidence,
            SgMetric::Unlikeability => UncertaintyMetric::Unlikeability,
            SgMetric::Entropy => UncertaintyMetric::Entropy,
        }
    }
}

/// Opaque per-epoch stage probabilities.
pub struct SgHypnodensity(Hypnodensity);

/// Opaque trained stager.
pub struct SgModel(SoftmaxModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (SgStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SgStatus::Panic
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    (SgStatus::Data, e.to_string())
}

fn invalid(msg: impl Into<String>) -> Failure {
    (SgStatus::InvalidArgument, msg.into())
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err((SgStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    non_null(p, "path")?;
    let s = unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(Path::new(s))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, expected: usize, name: &str) -> Result<&'a mut [T], Failure> {
    non_null(p, name)?;
    if len != expected {
        return Err(invalid(format!("{name} has length {len}, expected {expected}")));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    non_null(p, name)?;
    Ok(unsafe { &*p })
}

fn boxed<T>(out: *mut *mut T, value: T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Builds a hypnodensity from `n_epochs × 5` row-major probabilities.
///
/// # Safety
/// `probs` must point to `n_epochs * 5` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sg_hypnodensity_new(
    probs: *const f64,
    n_epochs: usize,
    out: *mut *mut SgHypnodensity,
) -> SgStatus {
    guard(|| {
        non_null(probs, "probs")?;
        non_null(out, "out")?;
        let len = n_epochs.checked_mul(N_STAGES).ok_or_else(|| invalid("n_epochs too large"))?;
        let flat = unsafe { std::slice::from_raw_parts(probs, len) };
        let rows = flat.chunks_exact(N_STAGES).map(|c| c.try_into().expect("chunk of five")).collect();
        let h = Hypnodensity::new(EpochGrid::new("ffi", n_epochs).map_err(data)?, rows).map_err(data)?;
        boxed(out, SgHypnodensity(h));
        Ok(())
    })
}

/// Reads a hypnodensity CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sg_hypnodensity_read_csv(path: *const c_char, out: *mut *mut SgHypnodensity) -> SgStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        non_null(out, "out")?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let h = read_hypnodensity_csv(&read_text(path).map_err(data)?, &id).map_err(data)?;
        boxed(out, SgHypnodensity(h));
        Ok(())
    })
}

/// Number of epochs, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_hypnodensity_len(h: *const SgHypnodensity) -> usize {
    if h.is_null() {
        0
    } else {
        unsafe { &*h }.0.len()
    }
}

/// Copies the probabilities into `out` (`len` must equal epochs × 5).
///
/// # Safety
/// `h` must be a live handle and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_hypnodensity_copy(h: *const SgHypnodensity, out: *mut f64, len: usize) -> SgStatus {
    guard(|| {
        let h = &unsafe { handle(h, "hypnodensity") }?.0;
        let dst = unsafe { out_slice(out, len, h.len() * N_STAGES, "out") }?;
        for (d, s) in dst.iter_mut().zip(h.rows().iter().flatten()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Releases a hypnodensity. Null is ignored.
///
/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_hypnodensity_free(h: *mut SgHypnodensity) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Writes one uncertainty value per epoch into `out`.
///
/// # Safety
/// `h` must be a live handle and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_uncertainty(h: *const SgHypnodensity, metric: SgMetric, out: *mut f64, len: usize) -> SgStatus {
    guard(|| {
        let h = &unsafe { handle(h, "hypnodensity") }?.0;
        let dst = unsafe { out_slice(out, len, h.len(), "out") }?;
        dst.copy_from_slice(compute_uncertainty(h, metric.into()).values());
        Ok(())
    })
}

/// Marks the `round(pct × epochs)` most uncertain epochs with 1 in `mask`.
///
/// # Safety
/// `h` must be a live handle and `mask` must hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sg_gray_rank(
    h: *const SgHypnodensity,
    metric: SgMetric,
    pct: f64,
    mask: *mut u8,
    len: usize,
) -> SgStatus {
    guard(|| {
        let h = &unsafe { handle(h, "hypnodensity") }?.0;
        let dst = unsafe { out_slice(mask, len, h.len(), "mask") }?;
        let series = compute_uncertainty(h, metric.into());
        let sel = select_gray_rank(std::slice::from_ref(&series), pct, RankPooling::Dataset)
            .map_err(|e| invalid(e.to_string()))?;
        for (d, &g) in dst.iter_mut().zip(sel[0].mask()) {
            *d = g as u8;
        }
        Ok(())
    })
}

/// Marks epochs strictly more uncertain than `threshold` with 1 in `mask`.
///
/// # Safety
/// `h` must be a live handle and `mask` must hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sg_gray_threshold(
    h: *const SgHypnodensity,
    metric: SgMetric,
    threshold: f64,
    mask: *mut u8,
    len: usize,
) -> SgStatus {
    guard(|| {
        let h = &unsafe { handle(h, "hypnodensity") }?.0;
        let dst = unsafe { out_slice(mask, len, h.len(), "mask") }?;
        if threshold.is_nan() {
            return Err(invalid("threshold is NaN"));
        }
        let sel = select_gray_threshold(&compute_uncertainty(h, metric.into()), threshold);
        for (d, &g) in dst.iter_mut().zip(sel.mask()) {
            *d = g as u8;
        }
        Ok(())
    })
}

fn stages(codes: &[u8]) -> Result<Vec<Stage>, Failure> {
    codes
        .iter()
        .map(|&c| match c {
            5 => Ok(Stage::Unscored),
            c => Stage::from_index(c as usize).ok_or_else(|| invalid(format!("stage code {c} outside 0..=5"))),
        })
        .collect()
}

/// Accuracy and Cohen's kappa of two stage sequences. Codes are 0 W, 1 N1,
/// 2 N2, 3 N3, 4 REM and 5 unscored; unscored epochs are skipped.
///
/// # Safety
/// `reference` and `predicted` must hold `n` readable bytes; `accuracy` and
/// `kappa` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_agreement(
    reference: *const u8,
    predicted: *const u8,
    n: usize,
    accuracy: *mut f64,
    kappa: *mut f64,
) -> SgStatus {
    guard(|| {
        non_null(reference, "reference")?;
        non_null(predicted, "predicted")?;
        non_null(accuracy, "accuracy")?;
        non_null(kappa, "kappa")?;
        let grid = EpochGrid::new("ffi", n).map_err(data)?;
        let r = stages(unsafe { std::slice::from_raw_parts(reference, n) })?;
        let p = stages(unsafe { std::slice::from_raw_parts(predicted, n) })?;
        let flags = vec![false; n];
        let r = Hypnogram::new(grid.clone(), r, flags.clone()).map_err(data)?;
        let p = Hypnogram::new(grid, p, flags).map_err(data)?;
        let report = agreement(&confusion(&r, &p, None).map_err(data)?).map_err(|e| (SgStatus::Numeric, e.to_string()))?;
        unsafe {
            *accuracy = report.accuracy;
            *kappa = report.cohen_kappa;
        }
        Ok(())
    })
}

/// Loads a trained stager from a model JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sg_model_load(path: *const c_char, out: *mut *mut SgModel) -> SgStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        non_null(out, "out")?;
        let model = read_model(&read_text(path).map_err(data)?).map_err(data)?;
        boxed(out, SgModel(model));
        Ok(())
    })
}

/// Stages one raw channel sampled at `fs` Hz with the default preprocessing.
///
/// # Safety
/// `model` must be a live handle, `samples` must hold `n` readable doubles
/// and `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sg_model_stage(
    model: *const SgModel,
    samples: *const f64,
    n: usize,
    fs: f64,
    out: *mut *mut SgHypnodensity,
) -> SgStatus {
    guard(|| {
        let model = &unsafe { handle(model, "model") }?.0;
        non_null(samples, "samples")?;
        non_null(out, "out")?;
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(invalid("fs must be positive"));
        }
        let x = unsafe { std::slice::from_raw_parts(samples, n) }.to_vec();
        let channel = ChannelSignal::new("ffi", fs, x);
        let h = stage_recording(model, &[channel], &PreprocConfig::default(), "ffi").map_err(data)?;
        boxed(out, SgHypnodensity(h));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_model_free(m: *mut SgModel) {
    if !m.is_null() {
        drop(unsafe { Box::from_raw(m) });
    }
}
