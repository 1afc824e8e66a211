//! C interface to `fjs-core`.
//!
//! Every function returns an [`FjsStatus`]. Objects cross the boundary as
//! opaque handles owned by the caller and released with the matching
//! `*_free`. On failure the message is kept per thread and read with
//! [`fjs_last_error`]. Panics are caught at the boundary and reported as
//! [`FjsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fjs_core::adaptation::{train_method, AdaptationMethod, MethodInputs, MethodTag, TrainConfig, TrainedPredictor};
use fjs_core::harness::evaluate_nll;
use fjs_core::importance::ImportanceConfig;
use fjs_core::nets::Predictor;
use fjs_core::theory;
use fjs_core::toy::{ground_truth_importance, sample_source, sample_target, Dataset, HexagonSpec, SourceSpec};
use fjs_core::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FjsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Theory = 6,
    Panic = 7,
}

impl From<&Error> for FjsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) | Error::Format { .. } | Error::Geometry(_) => FjsStatus::Config,
            Error::InvalidDistribution(_) | Error::DimensionMismatch { .. } | Error::SizeLimit { .. } => {
                FjsStatus::InvalidArgument
            }
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } => FjsStatus::Numerical,
            Error::Io(_) => FjsStatus::Io,
            Error::SupportViolation { .. }
            | Error::NotFactorizable
            | Error::AmbiguousSupport { .. }
            | Error::CounterexampleFound { .. } => FjsStatus::Theory,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Failure inside a boundary closure.
struct Fail(FjsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(FjsStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FjsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, clearing the last error on success and recording it otherwise.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FjsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FjsStatus::Ok
        }
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            FjsStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for writes of `T`.
unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Fail> {
    p.as_mut().map(|slot| *slot = value).ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or valid for reads of `n` values.
unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fjs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Opaque set of (x, y) samples.
pub struct FjsDataset(Dataset);

/// Opaque trained Gaussian predictor.
pub struct FjsModel(TrainedPredictor);

/// Samples the default benchmark source domain.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_dataset_sample_source(seed: u64, out: *mut *mut FjsDataset) -> FjsStatus {
    guard(|| {
        let ds = sample_source(&HexagonSpec::default(), &SourceSpec::default(), seed)?;
        write(out, Box::into_raw(Box::new(FjsDataset(ds))), "out")
    })
}

/// Samples `n` points of the benchmark target domain.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_dataset_sample_target(n: usize, seed: u64, out: *mut *mut FjsDataset) -> FjsStatus {
    guard(|| {
        let ds = sample_target(&HexagonSpec::default(), n, seed)?;
        write(out, Box::into_raw(Box::new(FjsDataset(ds))), "out")
    })
}

/// # Safety
/// `ds` must be a live dataset handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_dataset_len(ds: *const FjsDataset, out: *mut usize) -> FjsStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        write(out, ds.0.len(), "out")
    })
}

/// Reads sample `index`.
///
/// # Safety
/// `ds` must be a live dataset handle; `x` and `y` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_dataset_get(ds: *const FjsDataset, index: usize, x: *mut f64, y: *mut f64) -> FjsStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let s = ds.0.samples.get(index).ok_or_else(|| {
            Fail(FjsStatus::InvalidArgument, format!("index {index} out of range for {} samples", ds.0.len()))
        })?;
        write(x, s.x, "x")?;
        write(y, s.y, "y")
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fjs_dataset_free(ds: *mut FjsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Trains `method` (for example `"source_only"` or `"jiada"`) with default
/// settings and `epochs` passes over the source. `target` supplies unlabeled
/// target features, and labels for `"target_only"`.
///
/// # Safety
/// `method` must be a NUL-terminated string; `source` and `target` live
/// dataset handles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_model_train(
    method: *const c_char,
    source: *const FjsDataset,
    target: *const FjsDataset,
    epochs: usize,
    seed: u64,
    out: *mut *mut FjsModel,
) -> FjsStatus {
    guard(|| {
        if method.is_null() {
            return Err(null("method"));
        }
        let name = CStr::from_ptr(method)
            .to_str()
            .map_err(|_| Fail(FjsStatus::InvalidArgument, "method is not UTF-8".into()))?;
        let tag: MethodTag = name.parse()?;
        let (source, target) = (
            source.as_ref().ok_or_else(|| null("source"))?,
            target.as_ref().ok_or_else(|| null("target"))?,
        );
        let train = TrainConfig {
            epochs,
            ..TrainConfig::default()
        };
        train.validate()?;
        let importance = ImportanceConfig::default();
        let truth = ground_truth_importance(&HexagonSpec::default(), &SourceSpec::default())?;
        let inputs = MethodInputs {
            source: &source.0,
            target: &target.0,
            train: &train,
            importance: &importance,
            ground_truth: Some(&truth),
            conditional: None,
        };
        let outcome = train_method(&AdaptationMethod::default_for(tag), &inputs, seed, None)?;
        write(out, Box::into_raw(Box::new(FjsModel(outcome.model))), "out")
    })
}

/// Predictive mean and standard deviation at `x`.
///
/// # Safety
/// `model` must be a live model handle; `mu` and `sigma` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_model_predict(model: *const FjsModel, x: f64, mu: *mut f64, sigma: *mut f64) -> FjsStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if !x.is_finite() {
            return Err(Fail(FjsStatus::InvalidArgument, "x must be finite".into()));
        }
        let p = model.0.predict(x);
        write(mu, p.mu, "mu")?;
        write(sigma, p.sigma, "sigma")
    })
}

/// Mean Gaussian negative log-likelihood of `model` on `data`.
///
/// # Safety
/// `model` and `data` must be live handles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_model_nll(model: *const FjsModel, data: *const FjsDataset, out: *mut f64) -> FjsStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        write(out, evaluate_nll(&model.0, &data.0)?, "out")
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fjs_model_free(model: *mut FjsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Expected negative log-likelihood of the optimal predictor on the benchmark target.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_analytic_target_nll(out: *mut f64) -> FjsStatus {
    guard(|| write(out, HexagonSpec::default().analytic_target_nll(), "out"))
}

/// Minimum of the discriminative importance objective over `w` for two
/// distributions of length `n`, written to `value`; the minimiser goes to
/// `w_star` when it is not null.
///
/// # Safety
/// `p` and `q` must hold `n` values; `w_star` must be null or hold `n` values;
/// `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_optimal_importance(
    p: *const f64,
    q: *const f64,
    n: usize,
    w_star: *mut f64,
    value: *mut f64,
) -> FjsStatus {
    guard(|| {
        let (p, q) = (slice(p, n, "p")?, slice(q, n, "q")?);
        let lemma = theory::lemma1_value(p, q)?;
        if !w_star.is_null() {
            std::slice::from_raw_parts_mut(w_star, n).copy_from_slice(&lemma.w_star);
        }
        write(value, lemma.value, "value")
    })
}

/// Runs `trials` random instances of theorem suite `which` (1 or 2). A found
/// counterexample returns [`FjsStatus::Theory`].
///
/// # Safety
/// `checked` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fjs_verify_theorem(which: u32, trials: usize, seed: u64, checked: *mut usize) -> FjsStatus {
    guard(|| {
        let report = match which {
            1 => theory::verify_theorem_1(trials, seed)?,
            2 => theory::verify_theorem_2(trials, seed)?,
            _ => return Err(Fail(FjsStatus::InvalidArgument, format!("no theorem suite {which}"))),
        };
        write(checked, report.trials, "checked")
    })
}
