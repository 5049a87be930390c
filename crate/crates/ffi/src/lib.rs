//! C interface to the `aegcn` engine.
//!
//! Objects cross the boundary as opaque pointers created and destroyed by
//! this library. Every fallible call returns an [`AegcnStatus`]; on failure
//! `aegcn_last_error()` describes the problem for the calling thread.
//! Strings handed out by the library are released with `aegcn_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use aegcn::data::read_meta;
use aegcn::harness::{
    default_cases, gradcheck, predict_trained, run_on, ConfigOverrides, Dataset, ModelKind,
    RunOutcome, TrainConfig,
};
use aegcn::Error;

/// Result of every fallible call. Non-zero values match the exit codes of
/// the command-line tool where one exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AegcnStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8, or a buffer of the wrong size.
    InvalidArgument = 1,
    Config = 2,
    Data = 3,
    Numerical = 4,
    /// The engine panicked; the message is in `aegcn_last_error()`.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AegcnModelKind {
    Homogeneous = 0,
    Heterogeneous = 1,
}

impl From<AegcnModelKind> for ModelKind {
    fn from(k: AegcnModelKind) -> Self {
        match k {
            AegcnModelKind::Homogeneous => ModelKind::Homo,
            AegcnModelKind::Heterogeneous => ModelKind::Hetero,
        }
    }
}

/// A loaded graph dataset.
pub struct AegcnDataset {
    data: Dataset,
    dir: PathBuf,
    kind: ModelKind,
}

/// A resolved training configuration.
pub struct AegcnConfig {
    config: TrainConfig,
}

/// The log and trained parameters of one run.
pub struct AegcnRun {
    outcome: RunOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AegcnStatus {
    match e.exit_code() {
        2 => AegcnStatus::Config,
        3 => AegcnStatus::Data,
        4 => AegcnStatus::Numerical,
        _ => AegcnStatus::Internal,
    }
}

struct Failure(AegcnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(AegcnStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AegcnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AegcnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            AegcnStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_value<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = value;
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("no interior nul")
        .into_raw()
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn aegcn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn aegcn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn aegcn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and validates the dataset in directory `dir`.
///
/// # Safety
/// `dir` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aegcn_dataset_load(
    dir: *const c_char,
    kind: AegcnModelKind,
    out: *mut *mut AegcnDataset,
) -> AegcnStatus {
    guard(|| {
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        let kind = ModelKind::from(kind);
        let data = Dataset::load(&dir, kind)?;
        put(out, AegcnDataset { data, dir, kind })
    })
}

/// # Safety
/// `ds` must come from `aegcn_dataset_load` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn aegcn_dataset_free(ds: *mut AegcnDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Node and class counts.
///
/// # Safety
/// `ds` must be a live dataset; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aegcn_dataset_shape(
    ds: *const AegcnDataset,
    nodes: *mut usize,
    classes: *mut usize,
) -> AegcnStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let (n, f) = match &ds.data {
            Dataset::Homo(g) => (g.n(), g.num_classes()),
            Dataset::Hetero(g) => (g.n(), g.num_classes()),
        };
        put_value(nodes, n)?;
        put_value(classes, f)
    })
}

/// Training configuration for `ds`: the published recipe for the dataset,
/// overridden by the fields of `overrides_json` (may be null), which uses
/// the same keys as the command-line config file.
///
/// # Safety
/// `ds` must be a live dataset; `overrides_json` null or a nul-terminated
/// string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aegcn_config_new(
    ds: *const AegcnDataset,
    overrides_json: *const c_char,
    out: *mut *mut AegcnConfig,
) -> AegcnStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let mut o: ConfigOverrides = if overrides_json.is_null() {
            ConfigOverrides::default()
        } else {
            serde_json::from_str(str_arg(overrides_json, "overrides_json")?)
                .map_err(|e| Failure(AegcnStatus::Config, format!("overrides: {e}")))?
        };
        if o.model.is_some_and(|m| m != ds.kind) {
            return Err(Failure(
                AegcnStatus::Config,
                format!(
                    "overrides ask for the {} model on a {} dataset",
                    o.model.unwrap(),
                    ds.kind
                ),
            ));
        }
        o.model = Some(ds.kind);
        o.dataset = Some(ds.dir.clone());
        let meta = read_meta(&ds.dir)?;
        let config = TrainConfig::resolve(&o, &meta.name)?;
        put(out, AegcnConfig { config })
    })
}

/// # Safety
/// `cfg` must come from `aegcn_config_new` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn aegcn_config_free(cfg: *mut AegcnConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live configuration.
#[no_mangle]
pub unsafe extern "C" fn aegcn_config_set_seed(cfg: *mut AegcnConfig, seed: u64) -> AegcnStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| invalid("config is null"))?;
        cfg.config.seed = seed;
        Ok(())
    })
}

/// The resolved configuration as JSON; free with `aegcn_string_free`.
///
/// # Safety
/// `cfg` must be a live configuration; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aegcn_config_to_json(
    cfg: *const AegcnConfig,
    out: *mut *mut c_char,
) -> AegcnStatus {
    guard(|| {
        let cfg = handle(cfg, "config")?;
        let text = serde_json::to_string(&cfg.config).expect("config serializes");
        put_value(out, owned_string(text))
    })
}

/// Trains one model with the configuration's seed.
///
/// # Safety
/// `ds` and `cfg` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aegcn_train(
    ds: *const AegcnDataset,
    cfg: *const AegcnConfig,
    out: *mut *mut AegcnRun,
) -> AegcnStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let cfg = handle(cfg, "config")?;
        let outcome = run_on(&ds.data, &cfg.config)?;
        put(out, AegcnRun { outcome })
    })
}

/// # Safety
/// `run` must come from `aegcn_train` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn aegcn_run_free(run: *mut AegcnRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Test-split accuracy and Macro-F1 (fractions in [0, 1]) of the
/// evaluated parameters.
///
/// # Safety
/// `run` must be live; the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn aegcn_run_test_scores(
    run: *const AegcnRun,
    accuracy: *mut f64,
    macro_f1: *mut f64,
) -> AegcnStatus {
    guard(|| {
        let t = handle(run, "run")?.outcome.log.final_metrics.test;
        put_value(accuracy, t.accuracy)?;
        put_value(macro_f1, t.macro_f1)
    })
}

/// Full run log (per-epoch losses and scores) as JSON; free with
/// `aegcn_string_free`.
///
/// # Safety
/// `run` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aegcn_run_log_json(
    run: *const AegcnRun,
    out: *mut *mut c_char,
) -> AegcnStatus {
    guard(|| {
        let log = &handle(run, "run")?.outcome.log;
        put_value(
            out,
            owned_string(serde_json::to_string(log).expect("log serializes")),
        )
    })
}

/// Writes the `nodes × classes` row-major class probabilities of the
/// trained model on `ds` into `probs`, which must hold exactly `len`
/// values (see `aegcn_dataset_shape`).
///
/// # Safety
/// `run` and `ds` must be live; `probs` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn aegcn_run_predict(
    run: *const AegcnRun,
    ds: *const AegcnDataset,
    probs: *mut f64,
    len: usize,
) -> AegcnStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let ds = handle(ds, "dataset")?;
        if probs.is_null() {
            return Err(invalid("probs is null"));
        }
        let p = predict_trained(&ds.data, &run.outcome.log.config, &run.outcome.params)?;
        if p.values().len() != len {
            return Err(invalid(format!(
                "probs holds {len} values, need {} ({} × {})",
                p.values().len(),
                p.n_rows(),
                p.n_cols()
            )));
        }
        std::slice::from_raw_parts_mut(probs, len).copy_from_slice(p.values());
        Ok(())
    })
}

/// Finite-difference check of every model's gradients on toy graphs.
///
/// # Safety
/// `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aegcn_gradcheck(seed: u64, passed: *mut bool) -> AegcnStatus {
    guard(|| {
        let report = gradcheck(&default_cases(), seed, None)?;
        put_value(passed, report.passed)
    })
}
