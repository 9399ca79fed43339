//! C ABI for the `qoe-narx` engine.
//!
//! Every function returns a [`QnStatus`]; on failure a description is
//! available from [`qn_last_error_message`] on the same thread. Models are
//! opaque handles released with [`qn_model_free`]. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use qoe_narx::metrics::evaluate_slices;
use qoe_narx::narx::{forward_closed_loop, forward_open_loop, load_model, model_from_json};
use qoe_narx::vqa::{FrameMetric, FramePair, LumaFrame};
use qoe_narx::{Error, ErrorClass, NarxModel, SessionTrace, TimeSeries};

/// Result of every call. Values 2 to 5 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnStatus {
    Ok = 0,
    NullPointer = 1,
    Usage = 2,
    Validation = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnLoopMode {
    /// One step ahead, feedback taps from the supplied scores.
    Open = 0,
    /// Free running after the warm-up.
    Closed = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnFrameMetric {
    Psnr = 0,
    Ssim = 1,
    Gmsd = 2,
}

/// Metric values; correlations are NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnEval {
    pub rmse: f64,
    pub plcc: f64,
    pub srocc: f64,
    pub outage_rate: f64,
    pub n_samples: usize,
}

/// Opaque trained model.
pub struct QnModel {
    inner: NarxModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

enum Failure {
    Null(&'static str),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            QnStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            QnStatus::NullPointer
        }
        Ok(Err(Failure::Engine(e))) => {
            set_last_error(&format!("{}: {e}", e.code_name()));
            match e.class() {
                ErrorClass::Usage => QnStatus::Usage,
                ErrorClass::Validation => QnStatus::Validation,
                ErrorClass::Numerical => QnStatus::Numerical,
                ErrorClass::Io => QnStatus::Io,
            }
        }
        Err(_) => {
            set_last_error("internal panic");
            QnStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(p)
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    let p = non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Engine(Error::invalid(format!("{what} is not valid UTF-8"))))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(p, what)?, len))
}

unsafe fn store_model(out: *mut *mut QnModel, model: NarxModel) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(QnModel { inner: model }));
    Ok(())
}

/// Message describing the last failed call on this thread; empty after a
/// successful call. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn qn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a model file written by the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qn_model_load(path: *const c_char, out: *mut *mut QnModel) -> QnStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        store_model(out, load_model(Path::new(path))?)
    })
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qn_model_from_json(
    json: *const c_char,
    out: *mut *mut QnModel,
) -> QnStatus {
    guard(|| {
        let json = c_str(json, "json")?;
        store_model(out, model_from_json(json)?)
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qn_model_free(model: *mut QnModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Number of input channels and the warm-up length the model needs.
///
/// # Safety
/// `model` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qn_model_shape(
    model: *const QnModel,
    n_channels: *mut usize,
    warmup_len: *mut usize,
) -> QnStatus {
    guard(|| {
        let m = &(*non_null(model, "model")?).inner;
        if n_channels.is_null() || warmup_len.is_null() {
            return Err(Failure::Null("out"));
        }
        *n_channels = m.config.n_channels;
        *warmup_len = m.config.t_min();
        Ok(())
    })
}

/// Name of input channel `index`, NUL-terminated, copied into `buf`.
///
/// # Safety
/// `model` must be a live handle; `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qn_model_channel_name(
    model: *const QnModel,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
) -> QnStatus {
    guard(|| {
        let m = &(*non_null(model, "model")?).inner;
        let name = m
            .channel_names
            .get(index)
            .ok_or_else(|| Error::invalid(format!("channel index {index} out of range")))?;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        if name.len() + 1 > buf_len {
            return Err(Error::invalid(format!("buffer needs {} bytes", name.len() + 1)).into());
        }
        std::ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, name.len());
        *buf.add(name.len()) = 0;
        Ok(())
    })
}

/// Forecasts `len` samples.
///
/// `inputs` holds `n_channels * len` values, channel after channel, in the
/// model's channel order. Open loop needs `len` recorded scores in
/// `scores`; closed loop needs at least the warm-up length. `out` receives
/// `len` values, the warm-up copied from `scores`.
///
/// # Safety
/// Pointers must reference arrays of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn qn_model_forecast(
    model: *const QnModel,
    inputs: *const f64,
    n_channels: usize,
    len: usize,
    scores: *const f64,
    scores_len: usize,
    mode: QnLoopMode,
    out: *mut f64,
) -> QnStatus {
    guard(|| {
        let m = &(*non_null(model, "model")?).inner;
        if n_channels != m.config.n_channels {
            return Err(Error::ChannelMismatch {
                expected: m.channel_names.clone(),
                found: (0..n_channels).map(|i| format!("#{i}")).collect(),
            }
            .into());
        }
        let data = slice(inputs, n_channels * len, "inputs")?;
        let scores = slice(scores, scores_len, "scores")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let channels = m
            .channel_names
            .iter()
            .zip(data.chunks_exact(len.max(1)))
            .map(|(name, v)| Ok((name.clone(), TimeSeries::new(v.to_vec(), 1.0, 0.0)?)))
            .collect::<Result<Vec<_>, Error>>()?;
        let subjective = match mode {
            QnLoopMode::Open => {
                if scores.len() != len {
                    return Err(Error::LengthMismatch(scores.len(), len).into());
                }
                Some(TimeSeries::new(scores.to_vec(), 1.0, 0.0)?)
            }
            QnLoopMode::Closed => None,
        };
        let session = SessionTrace::new("ffi", "ffi", channels, subjective)?;
        let forecast = match mode {
            QnLoopMode::Open => forward_open_loop(m, &session)?,
            QnLoopMode::Closed => forward_closed_loop(m, &session, scores)?,
        };
        std::ptr::copy_nonoverlapping(forecast.values.values().as_ptr(), out, len);
        Ok(())
    })
}

/// RMSE, PLCC, SROCC and outage rate of `pred` against `truth`.
///
/// # Safety
/// `pred` and `truth` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qn_evaluate(
    pred: *const f64,
    truth: *const f64,
    len: usize,
    delta: f64,
    out: *mut QnEval,
) -> QnStatus {
    guard(|| {
        let pred = slice(pred, len, "pred")?;
        let truth = slice(truth, len, "truth")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let r = evaluate_slices(pred, truth, delta)?;
        *out = QnEval {
            rmse: r.rmse,
            plcc: r.plcc.unwrap_or(f64::NAN),
            srocc: r.srocc.unwrap_or(f64::NAN),
            outage_rate: r.outage_rate,
            n_samples: r.n_samples,
        };
        Ok(())
    })
}

/// Full-reference quality of one 8-bit luma frame pair, row-major.
///
/// # Safety
/// `reference` and `distorted` must hold `width * height` bytes; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn qn_frame_metric(
    metric: QnFrameMetric,
    reference: *const u8,
    distorted: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> QnStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidFrame("dimensions overflow".into()))?;
        let r = slice(reference, n, "reference")?;
        let d = slice(distorted, n, "distorted")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let pair = FramePair::new(
            LumaFrame::new(width, height, r.to_vec())?,
            LumaFrame::new(width, height, d.to_vec())?,
        )?;
        let metric = match metric {
            QnFrameMetric::Psnr => FrameMetric::Psnr,
            QnFrameMetric::Ssim => FrameMetric::Ssim,
            QnFrameMetric::Gmsd => FrameMetric::Gmsd,
        };
        *out = metric.compute(&pair);
        Ok(())
    })
}

/// Library version, NUL-terminated, static.
#[no_mangle]
pub extern "C" fn qn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
