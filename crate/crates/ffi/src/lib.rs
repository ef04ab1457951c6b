//! C ABI over the `vcshot` library.
//!
//! Every fallible function returns a `VcStatus`. On failure a message is
//! kept per thread and can be read with `vc_last_error_message`. Handles are
//! opaque and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vcshot::episode::{run_benchmark, ClassifierKind, DictionaryScope, EpisodeError, EpisodeSpec};
use vcshot::store::{collect_vectors, read_store, FeatureStore};
use vcshot::vmf::{fit_vmfm, read_dictionary, write_dictionary, FitConfig, FitError, VcDictionary};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Fit = 5,
    Numerical = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VcClassifier {
    Nn = 0,
    Likelihood = 1,
}

/// A loaded feature store.
pub struct VcStore {
    inner: FeatureStore,
}

/// A learned or loaded VC dictionary.
pub struct VcDict {
    inner: VcDictionary,
}

/// Benchmark parameters. Obtain defaults from `vc_episode_spec_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct VcEpisodeSpec {
    pub ways: usize,
    pub shots: usize,
    pub queries: usize,
    pub trials: usize,
    pub seed: u64,
    pub num_vcs: usize,
    pub coverage_target: f64,
    pub threshold_step: f64,
    pub sigma: f64,
    pub radius: usize,
    pub classifier: VcClassifier,
    /// Learn one dictionary from the whole store instead of per trial.
    pub whole_store_dictionary: bool,
    pub shuffle_support_labels: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct VcBenchmarkResult {
    pub mean_accuracy: f64,
    pub ci95_halfwidth: f64,
    pub trials: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: VcStatus, message: impl ToString) -> VcStatus {
    set_error(message.to_string());
    status
}

/// Runs `body`, converting a panic into `VcStatus::Panic`.
fn guard<F>(body: F) -> VcStatus
where
    F: FnOnce() -> VcStatus,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(VcStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<String, VcStatus> {
    if path.is_null() {
        return Err(fail(VcStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(VcStatus::InvalidArgument, "path is not valid UTF-8"))
}

fn fit_status(e: &FitError) -> VcStatus {
    match e {
        FitError::NonFiniteLogLikelihood { .. } => VcStatus::Numerical,
        _ => VcStatus::Fit,
    }
}

/// The message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vc_store_open(path: *const c_char, out: *mut *mut VcStore) -> VcStatus {
    guard(|| {
        if out.is_null() {
            return fail(VcStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) => return fail(VcStatus::Io, format!("{path}: {e}")),
        };
        match read_store(BufReader::new(file)) {
            Ok(store) => {
                *out = Box::into_raw(Box::new(VcStore { inner: store }));
                VcStatus::Ok
            }
            Err(e) => fail(VcStatus::Format, format!("{path}: {e}")),
        }
    })
}

/// # Safety
/// `store` must come from `vc_store_open` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vc_store_free(store: *mut VcStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// # Safety
/// `store` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vc_store_grid_count(store: *const VcStore, out: *mut usize) -> VcStatus {
    if store.is_null() || out.is_null() {
        return fail(VcStatus::NullPointer, "store or out is null");
    }
    *out = (*store).inner.grids().len();
    VcStatus::Ok
}

/// # Safety
/// `store` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vc_store_category_count(store: *const VcStore, out: *mut usize) -> VcStatus {
    if store.is_null() || out.is_null() {
        return fail(VcStatus::NullPointer, "store or out is null");
    }
    *out = (*store).inner.categories().len();
    VcStatus::Ok
}

/// Fits a dictionary of `num_vcs` VCs to every feature vector in `store`.
///
/// # Safety
/// `store` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vc_dictionary_learn(
    store: *const VcStore,
    num_vcs: usize,
    seed: u64,
    out: *mut *mut VcDict,
) -> VcStatus {
    guard(|| {
        if store.is_null() || out.is_null() {
            return fail(VcStatus::NullPointer, "store or out is null");
        }
        let pooled = match collect_vectors(&(*store).inner, |_| true) {
            Ok(p) => p,
            Err(e) => return fail(VcStatus::InvalidArgument, e),
        };
        match fit_vmfm(&pooled.vectors, &FitConfig::new(num_vcs).with_seed(seed)) {
            Ok(dict) => {
                *out = Box::into_raw(Box::new(VcDict { inner: dict }));
                VcStatus::Ok
            }
            Err(e) => fail(fit_status(&e), e),
        }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vc_dictionary_load(path: *const c_char, out: *mut *mut VcDict) -> VcStatus {
    guard(|| {
        if out.is_null() {
            return fail(VcStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) => return fail(VcStatus::Io, format!("{path}: {e}")),
        };
        match read_dictionary(BufReader::new(file)) {
            Ok(dict) => {
                *out = Box::into_raw(Box::new(VcDict { inner: dict }));
                VcStatus::Ok
            }
            Err(e) => fail(VcStatus::Format, format!("{path}: {e}")),
        }
    })
}

/// # Safety
/// `dict` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vc_dictionary_save(dict: *const VcDict, path: *const c_char) -> VcStatus {
    guard(|| {
        if dict.is_null() {
            return fail(VcStatus::NullPointer, "dict is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let file = match File::create(&path) {
            Ok(f) => f,
            Err(e) => return fail(VcStatus::Io, format!("{path}: {e}")),
        };
        let mut w = BufWriter::new(file);
        match write_dictionary(&(*dict).inner, &mut w).map_err(|e| e.to_string()).and_then(|_| w.flush().map_err(|e| e.to_string())) {
            Ok(()) => VcStatus::Ok,
            Err(e) => fail(VcStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// # Safety
/// `dict` must come from a dictionary constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vc_dictionary_free(dict: *mut VcDict) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// # Safety
/// `dict` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vc_dictionary_num_vcs(dict: *const VcDict, out: *mut usize) -> VcStatus {
    if dict.is_null() || out.is_null() {
        return fail(VcStatus::NullPointer, "dict or out is null");
    }
    *out = (*dict).inner.num_vcs();
    VcStatus::Ok
}

/// # Safety
/// `dict` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vc_dictionary_log_likelihood(dict: *const VcDict, out: *mut f64) -> VcStatus {
    if dict.is_null() || out.is_null() {
        return fail(VcStatus::NullPointer, "dict or out is null");
    }
    *out = (*dict).inner.fitted_log_likelihood();
    VcStatus::Ok
}

#[no_mangle]
pub extern "C" fn vc_episode_spec_default() -> VcEpisodeSpec {
    let d = EpisodeSpec::default();
    VcEpisodeSpec {
        ways: d.ways,
        shots: d.shots,
        queries: d.queries,
        trials: d.trials,
        seed: d.seed,
        num_vcs: d.num_vcs,
        coverage_target: d.coverage_target,
        threshold_step: d.threshold_step,
        sigma: d.sigma,
        radius: d.radius,
        classifier: VcClassifier::Likelihood,
        whole_store_dictionary: false,
        shuffle_support_labels: false,
    }
}

impl From<&VcEpisodeSpec> for EpisodeSpec {
    fn from(s: &VcEpisodeSpec) -> Self {
        EpisodeSpec {
            ways: s.ways,
            shots: s.shots,
            queries: s.queries,
            trials: s.trials,
            seed: s.seed,
            num_vcs: s.num_vcs,
            coverage_target: s.coverage_target,
            threshold_step: s.threshold_step,
            sigma: s.sigma,
            radius: s.radius,
            classifier: match s.classifier {
                VcClassifier::Nn => ClassifierKind::Nn,
                VcClassifier::Likelihood => ClassifierKind::Likelihood,
            },
            dictionary_scope: if s.whole_store_dictionary {
                DictionaryScope::WholeStore
            } else {
                DictionaryScope::PerTrial
            },
            shuffle_support_labels: s.shuffle_support_labels,
            ..EpisodeSpec::default()
        }
    }
}

/// Runs `spec->trials` few-shot trials on `store`.
///
/// # Safety
/// All pointers must be valid; `store` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vc_run_benchmark(
    store: *const VcStore,
    spec: *const VcEpisodeSpec,
    out: *mut VcBenchmarkResult,
) -> VcStatus {
    guard(|| {
        if store.is_null() || spec.is_null() || out.is_null() {
            return fail(VcStatus::NullPointer, "store, spec or out is null");
        }
        let spec = EpisodeSpec::from(&*spec);
        match run_benchmark(&(*store).inner, &spec) {
            Ok(report) => {
                *out = VcBenchmarkResult {
                    mean_accuracy: report.mean_accuracy,
                    ci95_halfwidth: report.ci95_halfwidth,
                    trials: report.per_trial.len(),
                };
                VcStatus::Ok
            }
            Err(e) => {
                let status = match &e {
                    e if e.is_numerical() => VcStatus::Numerical,
                    EpisodeError::Fit(_) => VcStatus::Fit,
                    _ => VcStatus::InvalidArgument,
                };
                fail(status, e)
            }
        }
    })
}
