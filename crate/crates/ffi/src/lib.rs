//! C ABI over the `ecgscalo` pipeline.
//!
//! Handles are opaque and owned by the caller until passed to the matching `*_free`.
//! Every fallible call returns an [`EcgStatus`]; on failure the message is kept per
//! thread and can be copied out with [`ecg_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ecgscalo::dataset::{fix_length, normalize, resample};
use ecgscalo::evaluate::{argmax_class, ensemble_average, ProbVector};
use ecgscalo::imaging::{render_scalogram, Colormap, ScalogramConfig, IMAGE_BYTES};
use ecgscalo::models::{Classifier, ModelProfile};
use ecgscalo::{Error, RgbImage, Signal};

/// Bytes of one 224x224 RGB image.
pub const ECG_IMAGE_BYTES: usize = 224 * 224 * 3;
pub const ECG_NUM_CLASSES: usize = 3;

const _: () = assert!(ECG_IMAGE_BYTES == IMAGE_BYTES);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Io = 5,
    Shape = 6,
    CorruptCheckpoint = 7,
    DigestMismatch = 8,
    Divergence = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcgProfile {
    CustomCnn = 0,
    Ensemble = 1,
}

impl From<EcgProfile> for ModelProfile {
    fn from(p: EcgProfile) -> Self {
        match p {
            EcgProfile::CustomCnn => ModelProfile::CustomCnn,
            EcgProfile::Ensemble => ModelProfile::Ensemble,
        }
    }
}

/// Opaque recording.
pub struct EcgSignal {
    inner: Signal,
}

/// Opaque trained classifier.
pub struct EcgClassifier {
    inner: Classifier,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> EcgStatus {
    match e {
        Error::Io { .. } => EcgStatus::Io,
        Error::InvalidArgument(_) => EcgStatus::InvalidArgument,
        Error::Config(_) => EcgStatus::Config,
        Error::Shape(_) => EcgStatus::Shape,
        Error::CorruptCheckpoint(_) => EcgStatus::CorruptCheckpoint,
        Error::DigestMismatch { .. } => EcgStatus::DigestMismatch,
        Error::Divergence { .. } => EcgStatus::Divergence,
        _ => EcgStatus::Data,
    }
}

fn fail(status: EcgStatus, msg: impl Into<String>) -> EcgStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), EcgStatus>) -> EcgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EcgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(EcgStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: ecgscalo::Result<T>) -> Result<T, EcgStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn null(what: &str) -> EcgStatus {
    fail(EcgStatus::NullPointer, format!("{what} is null"))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ecg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a recording from `n` samples at `fs` Hz.
///
/// # Safety
/// `samples` must be valid for `n` reads; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecg_signal_new(samples: *const f64, n: usize, fs: f64, out: *mut *mut EcgSignal) -> EcgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if samples.is_null() {
            return Err(null("samples"));
        }
        let data = std::slice::from_raw_parts(samples, n).to_vec();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(fail(EcgStatus::InvalidArgument, "non-finite sample"));
        }
        let s = lift(Signal::new("ffi", data, fs))?;
        *out = Box::into_raw(Box::new(EcgSignal { inner: s }));
        Ok(())
    })
}

/// # Safety
/// `signal` must be null or a pointer from [`ecg_signal_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ecg_signal_free(signal: *mut EcgSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecg_signal_len(signal: *const EcgSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.inner.len())
}

/// Sampling rate in Hz, or 0 for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecg_signal_fs(signal: *const EcgSignal) -> f64 {
    signal.as_ref().map_or(0.0, |s| s.inner.fs)
}

/// Copies the samples into `out`, which must hold at least [`ecg_signal_len`] values.
///
/// # Safety
/// `signal` must be a live handle; `out` must be valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn ecg_signal_samples(signal: *const EcgSignal, out: *mut f64, cap: usize) -> EcgStatus {
    guard(|| {
        let s = signal.as_ref().ok_or_else(|| null("signal"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if cap < s.inner.len() {
            return Err(fail(
                EcgStatus::BufferTooSmall,
                format!("need {} samples", s.inner.len()),
            ));
        }
        ptr::copy_nonoverlapping(s.inner.samples.as_ptr(), out, s.inner.len());
        Ok(())
    })
}

unsafe fn with_signal(signal: *mut EcgSignal, f: impl FnOnce(&Signal) -> ecgscalo::Result<Signal>) -> EcgStatus {
    guard(|| {
        let s = signal.as_mut().ok_or_else(|| null("signal"))?;
        s.inner = lift(f(&s.inner))?;
        Ok(())
    })
}

/// Scales the recording in place by its max-abs value.
///
/// # Safety
/// `signal` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecg_signal_normalize(signal: *mut EcgSignal) -> EcgStatus {
    with_signal(signal, |s| Ok(normalize(s)))
}

/// Linearly resamples in place to `target_fs` Hz.
///
/// # Safety
/// `signal` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecg_signal_resample(signal: *mut EcgSignal, target_fs: f64) -> EcgStatus {
    with_signal(signal, |s| resample(s, target_fs))
}

/// Truncates or zero-pads in place to `n` samples.
///
/// # Safety
/// `signal` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecg_signal_fix_length(signal: *mut EcgSignal, n: usize) -> EcgStatus {
    if n == 0 {
        return fail(EcgStatus::InvalidArgument, "length must be >= 1");
    }
    with_signal(signal, |s| Ok(fix_length(s, n)))
}

/// Renders the default scalogram (Morlet, 12 voices, jet colormap) into `out` as
/// row-major RGB bytes; `len` must be at least [`ECG_IMAGE_BYTES`].
///
/// # Safety
/// `signal` must be a live handle; `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ecg_render_scalogram(signal: *const EcgSignal, out: *mut u8, len: usize) -> EcgStatus {
    guard(|| {
        let s = signal.as_ref().ok_or_else(|| null("signal"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < ECG_IMAGE_BYTES {
            return Err(fail(EcgStatus::BufferTooSmall, format!("need {ECG_IMAGE_BYTES} bytes")));
        }
        let img = lift(render_scalogram(
            &s.inner,
            &ScalogramConfig::default(),
            &Colormap::jet(),
        ))?;
        ptr::copy_nonoverlapping(img.as_bytes().as_ptr(), out, ECG_IMAGE_BYTES);
        Ok(())
    })
}

/// Loads a checkpoint written for `profile`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecg_classifier_load(
    path: *const c_char,
    profile: EcgProfile,
    out: *mut *mut EcgClassifier,
) -> EcgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(EcgStatus::InvalidArgument, "path is not UTF-8"))?;
        let c = lift(Classifier::load(profile.into(), Path::new(p)))?;
        *out = Box::into_raw(Box::new(EcgClassifier { inner: c }));
        Ok(())
    })
}

/// # Safety
/// `classifier` must be null or a pointer from [`ecg_classifier_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ecg_classifier_free(classifier: *mut EcgClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

/// Classifies one image of [`ECG_IMAGE_BYTES`] RGB bytes. Writes the three class
/// probabilities (ARR, NSR, CHF) to `probs` and the argmax class index to `label`.
///
/// # Safety
/// `classifier` must be a live handle; `rgb` valid for `len` reads; `probs` valid for
/// 3 writes; `label` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ecg_classifier_predict(
    classifier: *mut EcgClassifier,
    rgb: *const u8,
    len: usize,
    probs: *mut f64,
    label: *mut u32,
) -> EcgStatus {
    guard(|| {
        let c = classifier.as_mut().ok_or_else(|| null("classifier"))?;
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        if probs.is_null() {
            return Err(null("probs"));
        }
        if len != ECG_IMAGE_BYTES {
            return Err(fail(
                EcgStatus::Shape,
                format!("expected {ECG_IMAGE_BYTES} bytes, got {len}"),
            ));
        }
        let img = lift(RgbImage::from_bytes(std::slice::from_raw_parts(rgb, len).to_vec()))?;
        let p = lift(c.inner.predict(&img))?;
        ptr::copy_nonoverlapping(p.values().as_ptr(), probs, ECG_NUM_CLASSES);
        if !label.is_null() {
            *label = argmax_class(&p).index() as u32;
        }
        Ok(())
    })
}

/// Soft vote: `probs` holds `models` rows of 3 probabilities; their element-wise mean
/// goes to `out`.
///
/// # Safety
/// `probs` must be valid for `3 * models` reads and `out` for 3 writes.
#[no_mangle]
pub unsafe extern "C" fn ecg_ensemble_average(probs: *const f64, models: usize, out: *mut f64) -> EcgStatus {
    guard(|| {
        if probs.is_null() {
            return Err(null("probs"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let rows = std::slice::from_raw_parts(probs, models * ECG_NUM_CLASSES)
            .chunks_exact(ECG_NUM_CLASSES)
            .map(ProbVector::from_slice)
            .collect::<ecgscalo::Result<Vec<_>>>();
        let avg = lift(rows.and_then(|r| ensemble_average(&r)))?;
        ptr::copy_nonoverlapping(avg.values().as_ptr(), out, ECG_NUM_CLASSES);
        Ok(())
    })
}
