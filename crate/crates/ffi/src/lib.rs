//! C ABI over the `locomode` pipeline.
//!
//! Models and trials are opaque handles created by `*_load` and released by
//! the matching `*_free`. Every fallible call returns an [`LmStatus`]; on
//! failure [`lm_last_error`] describes the most recent error on the calling
//! thread. Category codes are 0..=4 for RA, RD, SA, SD, LW. Matrices are
//! row-major `frames × channels` buffers of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use locomode::corpus::{self, SignalSource, Trial};
use locomode::eval::{f1_breakdown, ConfusionMatrix};
use locomode::features::extract_from_matrix;
use locomode::{LdaModel, LstmModel, Matrix};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    ShapeMismatch = 5,
    Panic = 6,
}

/// Channel subsets accepted by [`lm_trial_signal`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmSource {
    Feet = 0,
    TrunkPelvis = 1,
    Forearms = 2,
    Fusion = 3,
}

impl From<LmSource> for SignalSource {
    fn from(s: LmSource) -> Self {
        match s {
            LmSource::Feet => SignalSource::Feet,
            LmSource::TrunkPelvis => SignalSource::TrunkPelvis,
            LmSource::Forearms => SignalSource::Forearms,
            LmSource::Fusion => SignalSource::Fusion,
        }
    }
}

pub struct LmLda(LdaModel);
pub struct LmLstm(LstmModel);
pub struct LmTrial(Trial);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(LmStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Self(LmStatus::NullPointer, format!("{what} is null"))
    }
    fn arg(msg: impl Into<String>) -> Self {
        Self(LmStatus::InvalidArgument, msg.into())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LmStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(Failure::null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure::arg("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn store_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn window_arg(data: *const f64, frames: usize, channels: usize) -> Result<Matrix, Failure> {
    let len = frames
        .checked_mul(channels)
        .ok_or_else(|| Failure::arg("window size overflows"))?;
    let values = slice_arg(data, len, "window")?;
    Ok(Matrix::from_vec(frames, channels, values.to_vec()))
}

fn shape(msg: impl ToString) -> Failure {
    Failure(LmStatus::ShapeMismatch, msg.to_string())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Number of 50-frame windows at stride 25 in a trial of `frames` frames.
#[no_mangle]
pub extern "C" fn lm_window_count(frames: usize) -> usize {
    corpus::window_count(frames)
}

/// Six features per channel (min, max, mean, std, first, last), channel
/// major. `out_len` must equal `6 * channels`.
///
/// # Safety
/// `window` must point to `frames * channels` doubles and `out` to
/// `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lm_extract_features(
    window: *const f64,
    frames: usize,
    channels: usize,
    out: *mut f64,
    out_len: usize,
) -> LmStatus {
    guard(|| {
        if out_len != 6 * channels {
            return Err(shape(format!("out_len {out_len} != 6 * {channels}")));
        }
        let m = window_arg(window, frames, channels)?;
        let f = extract_from_matrix(&m).map_err(|e| Failure::arg(e.to_string()))?;
        out_arg(out, out_len, "out")?.copy_from_slice(f.as_slice());
        Ok(())
    })
}

/// Per-category precision, recall and F1 from a 6×5 confusion matrix (rows
/// RA, RD, SA, SD, LWp, LWf; columns RA, RD, SA, SD, LW). Each output
/// receives six values in row order; any output may be null.
///
/// # Safety
/// `counts` must point to 30 values; non-null outputs to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lm_f1_breakdown(
    counts: *const u64,
    precision: *mut f64,
    recall: *mut f64,
    f1: *mut f64,
) -> LmStatus {
    guard(|| {
        let c = slice_arg(counts, 30, "counts")?;
        let mut cm = ConfusionMatrix::default();
        for (i, v) in c.iter().enumerate() {
            cm.counts[i / 5][i % 5] = *v;
        }
        let b = f1_breakdown(&cm);
        for (p, vals) in [(precision, b.precision), (recall, b.recall), (f1, b.f1)] {
            if !p.is_null() {
                std::slice::from_raw_parts_mut(p, 6).copy_from_slice(&vals);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lm_lda_load(path: *const c_char, out: *mut *mut LmLda) -> LmStatus {
    guard(|| {
        let path = path_arg(path)?;
        let model = LdaModel::load(&path).map_err(|e| {
            let status = match e {
                locomode::lda::LdaError::Io(_) => LmStatus::Io,
                _ => LmStatus::Format,
            };
            Failure(status, format!("{}: {e}", path.display()))
        })?;
        store_handle(out, LmLda(model))
    })
}

/// # Safety
/// `model` must come from [`lm_lda_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lm_lda_free(model: *mut LmLda) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lm_lda_feature_dim(model: *const LmLda) -> usize {
    model.as_ref().map_or(0, |m| m.0.feature_dim())
}

/// Discriminant scores for the five categories; absent categories score
/// negative infinity.
///
/// # Safety
/// `features` must point to `len` doubles and `scores` to 5 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lm_lda_scores(
    model: *const LmLda,
    features: *const f64,
    len: usize,
    scores: *mut f64,
) -> LmStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = slice_arg(features, len, "features")?;
        let s = m.0.scores(x).map_err(shape)?;
        out_arg(scores, 5, "scores")?.copy_from_slice(&s);
        Ok(())
    })
}

/// # Safety
/// `features` must point to `len` doubles and `category` be writable.
#[no_mangle]
pub unsafe extern "C" fn lm_lda_predict(
    model: *const LmLda,
    features: *const f64,
    len: usize,
    category: *mut i32,
) -> LmStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = slice_arg(features, len, "features")?;
        let c = m.0.predict(x).map_err(shape)?;
        out_arg(category, 1, "category")?[0] = c.index() as i32;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lm_lstm_load(path: *const c_char, out: *mut *mut LmLstm) -> LmStatus {
    guard(|| {
        let path = path_arg(path)?;
        let model = LstmModel::load(&path).map_err(|e| {
            let status = match e {
                locomode::lstm::LstmError::Io(_) => LmStatus::Io,
                _ => LmStatus::Format,
            };
            Failure(status, format!("{}: {e}", path.display()))
        })?;
        store_handle(out, LmLstm(model))
    })
}

/// # Safety
/// `model` must come from [`lm_lstm_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lm_lstm_free(model: *mut LmLstm) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input channel count, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lm_lstm_input_dim(model: *const LmLstm) -> usize {
    model.as_ref().map_or(0, |m| m.0.dims().input)
}

/// Softmax output for one window; `probs` receives one value per output.
///
/// # Safety
/// `window` must point to `frames * channels` doubles and `probs` to
/// `probs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lm_lstm_probabilities(
    model: *const LmLstm,
    window: *const f64,
    frames: usize,
    channels: usize,
    probs: *mut f64,
    probs_len: usize,
) -> LmStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if probs_len != m.0.dims().output {
            return Err(shape(format!(
                "probs_len {probs_len} != {} outputs",
                m.0.dims().output
            )));
        }
        let w = window_arg(window, frames, channels)?;
        let p = m.0.forward(&w).map_err(shape)?;
        out_arg(probs, probs_len, "probs")?.copy_from_slice(&p);
        Ok(())
    })
}

/// # Safety
/// `window` must point to `frames * channels` doubles and `category` be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lm_lstm_predict(
    model: *const LmLstm,
    window: *const f64,
    frames: usize,
    channels: usize,
    category: *mut i32,
) -> LmStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let w = window_arg(window, frames, channels)?;
        let c = m.0.predict(&w).map_err(shape)?;
        out_arg(category, 1, "category")?[0] = c.index() as i32;
        Ok(())
    })
}

/// Load and validate a trial CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lm_trial_load(path: *const c_char, out: *mut *mut LmTrial) -> LmStatus {
    guard(|| {
        let path = path_arg(path)?;
        let trial = corpus::load_trial(&path).map_err(|e| {
            let status = match e {
                corpus::CorpusError::Io { .. } => LmStatus::Io,
                _ => LmStatus::Format,
            };
            Failure(status, e.to_string())
        })?;
        store_handle(out, LmTrial(trial))
    })
}

/// # Safety
/// `trial` must come from [`lm_trial_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lm_trial_free(trial: *mut LmTrial) {
    if !trial.is_null() {
        drop(Box::from_raw(trial));
    }
}

/// Frame count, or 0 for a null handle.
///
/// # Safety
/// `trial` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lm_trial_frames(trial: *const LmTrial) -> usize {
    trial.as_ref().map_or(0, |t| t.0.frames())
}

/// Copies the channels of `source` as a `frames × channels` row-major block.
/// `out_len` must equal frames times the source's channel count (12 or 36).
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lm_trial_signal(
    trial: *const LmTrial,
    source: LmSource,
    out: *mut f64,
    out_len: usize,
) -> LmStatus {
    guard(|| {
        let t = handle(trial, "trial")?;
        let m = corpus::select_source(&t.0, source.into());
        if out_len != m.as_slice().len() {
            return Err(shape(format!(
                "out_len {out_len} != {} x {}",
                m.rows(),
                m.cols()
            )));
        }
        out_arg(out, out_len, "out")?.copy_from_slice(m.as_slice());
        Ok(())
    })
}

/// Per-frame category codes; `out_len` must equal the frame count.
///
/// # Safety
/// `out` must point to `out_len` writable ints.
#[no_mangle]
pub unsafe extern "C" fn lm_trial_labels(
    trial: *const LmTrial,
    out: *mut i32,
    out_len: usize,
) -> LmStatus {
    guard(|| {
        let t = handle(trial, "trial")?;
        if out_len != t.0.frames() {
            return Err(shape(format!("out_len {out_len} != {} frames", t.0.frames())));
        }
        for (o, l) in out_arg(out, out_len, "out")?.iter_mut().zip(t.0.labels()) {
            *o = l.index() as i32;
        }
        Ok(())
    })
}
