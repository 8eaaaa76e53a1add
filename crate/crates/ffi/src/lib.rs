//! C ABI over the simulation engine.
//!
//! Objects cross the boundary as opaque handles created by `la_*_new`-style
//! functions and released with the matching `la_*_free`. Every fallible call
//! returns an [`LaStatus`]; on failure a description is available from
//! [`la_last_error_message`] on the same thread until the next call.
//! Strings returned to the caller are owned by the caller and must be released
//! with [`la_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lyapunov_adiabatic::diagnostics::RabiOracle;
use lyapunov_adiabatic::models::RotatingFieldModel;
use lyapunov_adiabatic::runner::{emit, run, RunError, RunOutput};
use lyapunov_adiabatic::scenario::{parse_scenario, preset, Scenario};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidScenario = 3,
    Numerical = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Parsed, validated scenario.
pub struct LaScenario {
    inner: Scenario,
}

/// Completed run: trajectory, per-sample diagnostics and summary.
pub struct LaRun {
    inner: RunOutput,
}

/// One recorded sample.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LaSample {
    pub t: f64,
    pub fidelity: f64,
    pub lyapunov: f64,
    pub gap: f64,
    pub nonlinear: f64,
    pub tunneling: f64,
    pub regularized: bool,
    pub clamped: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LaSummary {
    pub samples: usize,
    pub min_fidelity: f64,
    pub mean_fidelity: f64,
    pub final_fidelity: f64,
    pub min_gap: f64,
    pub regularized_fraction: f64,
    pub clamped_fraction: f64,
    pub max_norm_drift: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: LaStatus, msg: impl Into<String>) -> LaStatus {
    set_error(msg);
    status
}

fn from_run_error(e: RunError) -> LaStatus {
    let status = match &e {
        RunError::Validation(_) => LaStatus::InvalidScenario,
        RunError::Numerical(_) => LaStatus::Numerical,
        RunError::Io { .. } => LaStatus::Io,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`LaStatus::Panic`].
fn guard(f: impl FnOnce() -> LaStatus) -> LaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(LaStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, LaStatus> {
    if s.is_null() {
        return Err(fail(LaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(LaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn la_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn la_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a scenario JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_scenario_parse(json: *const c_char, out: *mut *mut LaScenario) -> LaStatus {
    guard(|| {
        if out.is_null() {
            return fail(LaStatus::NullPointer, "out is null");
        }
        let text = match read_str(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_scenario(text) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(LaScenario { inner: s }));
                LaStatus::Ok
            }
            Err(e) => fail(LaStatus::InvalidScenario, e.to_string()),
        }
    })
}

/// Loads a built-in preset by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_scenario_preset(name: *const c_char, out: *mut *mut LaScenario) -> LaStatus {
    guard(|| {
        if out.is_null() {
            return fail(LaStatus::NullPointer, "out is null");
        }
        let name = match read_str(name, "name") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match preset(name) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(LaScenario { inner: s }));
                LaStatus::Ok
            }
            Err(e) => fail(LaStatus::InvalidScenario, e.to_string()),
        }
    })
}

/// Fully defaulted scenario as JSON; release with [`la_string_free`].
///
/// # Safety
/// `scenario` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_scenario_to_json(scenario: *const LaScenario, out: *mut *mut c_char) -> LaStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(LaStatus::NullPointer, "scenario or out is null");
        }
        *out = into_c_string((*scenario).inner.to_json_pretty());
        LaStatus::Ok
    })
}

/// # Safety
/// `scenario` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn la_scenario_free(scenario: *mut LaScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Integrates a scenario. Any sweep in the scenario is ignored.
///
/// # Safety
/// `scenario` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_run(scenario: *const LaScenario, out: *mut *mut LaRun) -> LaStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(LaStatus::NullPointer, "scenario or out is null");
        }
        match run(&(*scenario).inner) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(LaRun { inner: r }));
                LaStatus::Ok
            }
            Err(e) => from_run_error(e),
        }
    })
}

/// # Safety
/// `run` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn la_run_free(run: *mut LaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded samples.
///
/// # Safety
/// `run` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_run_len(run: *const LaRun, out: *mut usize) -> LaStatus {
    guard(|| {
        if run.is_null() || out.is_null() {
            return fail(LaStatus::NullPointer, "run or out is null");
        }
        *out = (*run).inner.rows.len();
        LaStatus::Ok
    })
}

/// Number of control fields per sample.
///
/// # Safety
/// `run` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_run_field_count(run: *const LaRun, out: *mut usize) -> LaStatus {
    guard(|| {
        if run.is_null() || out.is_null() {
            return fail(LaStatus::NullPointer, "run or out is null");
        }
        *out = (*run).inner.trajectory.scheme.controls().len();
        LaStatus::Ok
    })
}

/// # Safety
/// `run` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_run_sample(run: *const LaRun, index: usize, out: *mut LaSample) -> LaStatus {
    guard(|| {
        if run.is_null() || out.is_null() {
            return fail(LaStatus::NullPointer, "run or out is null");
        }
        let rows = &(*run).inner.rows;
        let Some(r) = rows.get(index) else {
            return fail(LaStatus::OutOfRange, format!("sample {index} out of range for {} samples", rows.len()));
        };
        *out = LaSample {
            t: r.t,
            fidelity: r.fidelity,
            lyapunov: r.lyapunov,
            gap: r.gap,
            nonlinear: r.nonlinear_coeff,
            tunneling: r.tunneling_coeff,
            regularized: r.regularized,
            clamped: r.clamped,
        };
        LaStatus::Ok
    })
}

/// Copies the control fields of sample `index` into `buf`, which must hold
/// at least [`la_run_field_count`] values.
///
/// # Safety
/// `run` must come from this library and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn la_run_fields(run: *const LaRun, index: usize, buf: *mut f64, len: usize) -> LaStatus {
    guard(|| {
        if run.is_null() {
            return fail(LaStatus::NullPointer, "run is null");
        }
        let rows = &(*run).inner.rows;
        let Some(r) = rows.get(index) else {
            return fail(LaStatus::OutOfRange, format!("sample {index} out of range for {} samples", rows.len()));
        };
        if len < r.fields.len() {
            return fail(LaStatus::OutOfRange, format!("buffer holds {len} values, need {}", r.fields.len()));
        }
        if r.fields.is_empty() {
            return LaStatus::Ok;
        }
        if buf.is_null() {
            return fail(LaStatus::NullPointer, "buf is null");
        }
        ptr::copy_nonoverlapping(r.fields.as_ptr(), buf, r.fields.len());
        LaStatus::Ok
    })
}

/// # Safety
/// `run` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_run_summary(run: *const LaRun, out: *mut LaSummary) -> LaStatus {
    guard(|| {
        if run.is_null() || out.is_null() {
            return fail(LaStatus::NullPointer, "run or out is null");
        }
        let r = &(*run).inner.report;
        *out = LaSummary {
            samples: r.samples,
            min_fidelity: r.min_fidelity,
            mean_fidelity: r.mean_fidelity,
            final_fidelity: r.final_fidelity,
            min_gap: r.min_gap,
            regularized_fraction: r.regularized_fraction,
            clamped_fraction: r.clamped_fraction,
            max_norm_drift: r.max_norm_drift,
        };
        LaStatus::Ok
    })
}

/// Writes the run's output files into `dir`, creating it if needed.
///
/// # Safety
/// `run` must come from this library and `dir` be a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn la_run_write(run: *const LaRun, dir: *const c_char) -> LaStatus {
    guard(|| {
        if run.is_null() {
            return fail(LaStatus::NullPointer, "run is null");
        }
        let dir = match read_str(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match emit(&(*run).inner, Path::new(dir)) {
            Ok(()) => LaStatus::Ok,
            Err(e) => from_run_error(e),
        }
    })
}

/// Exact uncontrolled ground-state fidelity of the rotating-field model.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn la_rabi_oracle(mu_b0: f64, theta: f64, omega: f64, t: f64, out: *mut f64) -> LaStatus {
    guard(|| {
        if out.is_null() {
            return fail(LaStatus::NullPointer, "out is null");
        }
        match RotatingFieldModel::new(mu_b0, theta, omega) {
            Ok(m) => {
                *out = RabiOracle::new(&m).fidelity(t);
                LaStatus::Ok
            }
            Err(e) => fail(LaStatus::InvalidScenario, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not used again.
#[no_mangle]
pub unsafe extern "C" fn la_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
