//! C ABI over the experiment harness. All objects cross the boundary as
//! opaque handles; every fallible call returns a status code and leaves a
//! human-readable message in thread-local storage. See include/mapflow.h
//! for the client-facing declarations.

use mapflow::error::LabError;
use mapflow::harness::{self, ExperimentConfig, ExperimentOutcome};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status codes, aligned with the CLI exit codes.
pub const MAPFLOW_OK: i32 = 0;
pub const MAPFLOW_ERR_PARSE: i32 = 2;
pub const MAPFLOW_ERR_CONFIG: i32 = 3;
pub const MAPFLOW_ERR_CHART_EXIT: i32 = 4;
pub const MAPFLOW_ERR_UNSTABLE: i32 = 5;
pub const MAPFLOW_ERR_IO: i32 = 6;
pub const MAPFLOW_ERR_PANIC: i32 = 100;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &LabError) -> i32 {
    set_error(&err.to_string());
    err.exit_code()
}

/// Runs a closure, converting panics into an error code so unwinding never
/// crosses the FFI boundary.
fn guarded(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            MAPFLOW_ERR_PANIC
        }
    }
}

/// Opaque: a parsed, validated experiment description.
pub struct MapflowExperiment {
    cfg: ExperimentConfig,
}

/// Opaque: the outcome of one experiment run.
pub struct MapflowResult {
    any_fail: bool,
    energy: f64,
    residual_sup: f64,
    sup_dphi: f64,
    summary: CString,
    report_json: CString,
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, i32> {
    if ptr.is_null() {
        set_error("null pointer argument");
        return Err(MAPFLOW_ERR_CONFIG);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        MAPFLOW_ERR_CONFIG
    })
}

fn store_experiment(cfg: ExperimentConfig, out: *mut *mut MapflowExperiment) -> i32 {
    if out.is_null() {
        set_error("null output handle");
        return MAPFLOW_ERR_CONFIG;
    }
    unsafe { *out = Box::into_raw(Box::new(MapflowExperiment { cfg })) };
    MAPFLOW_OK
}

/// Message for the most recent error on this thread; empty string when the
/// last call succeeded. Owned by the library; valid until the next call.
#[no_mangle]
pub extern "C" fn mapflow_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses an experiment config from a TOML file.
#[no_mangle]
pub unsafe extern "C" fn mapflow_experiment_load(
    path: *const c_char,
    out: *mut *mut MapflowExperiment,
) -> i32 {
    guarded(|| {
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(code) => return code,
        };
        match ExperimentConfig::from_path(Path::new(path)) {
            Ok(cfg) => store_experiment(cfg, out),
            Err(e) => fail(&e),
        }
    })
}

/// Parses an experiment config from in-memory TOML text.
#[no_mangle]
pub unsafe extern "C" fn mapflow_experiment_parse(
    text: *const c_char,
    out: *mut *mut MapflowExperiment,
) -> i32 {
    guarded(|| {
        let text = match unsafe { cstr_arg(text) } {
            Ok(t) => t,
            Err(code) => return code,
        };
        match ExperimentConfig::from_toml(text) {
            Ok(cfg) => store_experiment(cfg, out),
            Err(e) => fail(&e),
        }
    })
}

/// Runs the experiment. `artifact_dir` may be null to skip artifact output.
/// On success, `*out` owns the result handle.
#[no_mangle]
pub unsafe extern "C" fn mapflow_experiment_run(
    experiment: *const MapflowExperiment,
    artifact_dir: *const c_char,
    out: *mut *mut MapflowResult,
) -> i32 {
    guarded(|| {
        if experiment.is_null() || out.is_null() {
            set_error("null pointer argument");
            return MAPFLOW_ERR_CONFIG;
        }
        let dir = if artifact_dir.is_null() {
            None
        } else {
            match unsafe { cstr_arg(artifact_dir) } {
                Ok(d) => Some(d.to_string()),
                Err(code) => return code,
            }
        };
        let cfg = unsafe { &(*experiment).cfg };
        let outcome = match harness::run_experiment(cfg, dir.as_deref().map(Path::new)) {
            Ok(o) => o,
            Err(e) => return fail(&e),
        };
        let json = match harness::report_json(&outcome.report) {
            Ok(j) => j,
            Err(e) => return fail(&e),
        };
        let ExperimentOutcome { report, summary, any_fail, .. } = outcome;
        let result = MapflowResult {
            any_fail,
            energy: report.energy,
            residual_sup: report.residual_sup,
            sup_dphi: report.sup_dphi,
            summary: CString::new(summary).unwrap_or_default(),
            report_json: CString::new(json).unwrap_or_default(),
        };
        unsafe { *out = Box::into_raw(Box::new(result)) };
        MAPFLOW_OK
    })
}

/// 1 when any assertion failed, 0 otherwise.
#[no_mangle]
pub unsafe extern "C" fn mapflow_result_any_fail(result: *const MapflowResult) -> i32 {
    if result.is_null() {
        return 1;
    }
    unsafe { (*result).any_fail as i32 }
}

#[no_mangle]
pub unsafe extern "C" fn mapflow_result_energy(result: *const MapflowResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    unsafe { (*result).energy }
}

#[no_mangle]
pub unsafe extern "C" fn mapflow_result_residual_sup(result: *const MapflowResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    unsafe { (*result).residual_sup }
}

#[no_mangle]
pub unsafe extern "C" fn mapflow_result_sup_dphi(result: *const MapflowResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    unsafe { (*result).sup_dphi }
}

/// One line per assertion ("PASS name: detail"). Owned by the result handle.
#[no_mangle]
pub unsafe extern "C" fn mapflow_result_summary(
    result: *const MapflowResult,
) -> *const c_char {
    if result.is_null() {
        return std::ptr::null();
    }
    unsafe { (*result).summary.as_ptr() }
}

/// The full report as a JSON document. Owned by the result handle.
#[no_mangle]
pub unsafe extern "C" fn mapflow_result_report_json(
    result: *const MapflowResult,
) -> *const c_char {
    if result.is_null() {
        return std::ptr::null();
    }
    unsafe { (*result).report_json.as_ptr() }
}

#[no_mangle]
pub unsafe extern "C" fn mapflow_experiment_free(experiment: *mut MapflowExperiment) {
    if !experiment.is_null() {
        drop(unsafe { Box::from_raw(experiment) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn mapflow_result_free(result: *mut MapflowResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    const TINY: &str = r#"
        [domain]
        dim = 1
        h = 0.1
        boundary = "dirichlet"
        region = { kind = "box", min = [-5.0], max = [5.0] }

        [target]
        geometry = "euclidean"
        dim = 1

        [potential]
        kind = "double_well_radial"

        [initial]
        kind = "kink"

        [flow]
        enabled = true
        tol = 1.0e-6

        [[assert]]
        name = "flow-converged"
        kind = "converged"
    "#;

    fn parse(text: &str) -> (*mut MapflowExperiment, i32) {
        let c = CString::new(text).unwrap();
        let mut handle: *mut MapflowExperiment = ptr::null_mut();
        let code = unsafe { mapflow_experiment_parse(c.as_ptr(), &mut handle) };
        (handle, code)
    }

    #[test]
    fn parse_run_and_read_back() {
        let (exp, code) = parse(TINY);
        assert_eq!(code, MAPFLOW_OK);
        let mut result: *mut MapflowResult = ptr::null_mut();
        let code = unsafe { mapflow_experiment_run(exp, ptr::null(), &mut result) };
        assert_eq!(code, MAPFLOW_OK);
        unsafe {
            assert_eq!(mapflow_result_any_fail(result), 0);
            assert!(mapflow_result_residual_sup(result) <= 1e-6);
            assert!(mapflow_result_energy(result).is_finite());
            let summary = CStr::from_ptr(mapflow_result_summary(result));
            assert!(summary.to_str().unwrap().contains("PASS flow-converged"));
            let json = CStr::from_ptr(mapflow_result_report_json(result));
            assert!(json.to_str().unwrap().contains("\"schema_version\""));
            mapflow_result_free(result);
            mapflow_experiment_free(exp);
        }
    }

    #[test]
    fn run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let (exp, code) = parse(TINY);
        assert_eq!(code, MAPFLOW_OK);
        let cdir = CString::new(dir.path().to_str().unwrap()).unwrap();
        let mut result: *mut MapflowResult = ptr::null_mut();
        let code = unsafe { mapflow_experiment_run(exp, cdir.as_ptr(), &mut result) };
        assert_eq!(code, MAPFLOW_OK);
        assert!(dir.path().join("report.json").exists());
        unsafe {
            mapflow_result_free(result);
            mapflow_experiment_free(exp);
        }
    }

    #[test]
    fn parse_errors_set_code_and_message() {
        let (handle, code) = parse("not valid toml {{{");
        assert!(handle.is_null());
        assert_eq!(code, MAPFLOW_ERR_PARSE);
        let msg = unsafe { CStr::from_ptr(mapflow_last_error_message()) };
        assert!(!msg.to_bytes().is_empty());
    }

    #[test]
    fn validation_errors_are_config_code() {
        let (handle, code) = parse(&TINY.replace("dim = 1", "dim = 9"));
        assert!(handle.is_null());
        assert_eq!(code, MAPFLOW_ERR_CONFIG);
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut handle: *mut MapflowExperiment = ptr::null_mut();
        assert_eq!(
            unsafe { mapflow_experiment_load(ptr::null(), &mut handle) },
            MAPFLOW_ERR_CONFIG
        );
        let mut result: *mut MapflowResult = ptr::null_mut();
        assert_eq!(
            unsafe { mapflow_experiment_run(ptr::null(), ptr::null(), &mut result) },
            MAPFLOW_ERR_CONFIG
        );
        unsafe {
            assert_eq!(mapflow_result_any_fail(ptr::null()), 1);
            assert!(mapflow_result_energy(ptr::null()).is_nan());
            assert!(mapflow_result_summary(ptr::null()).is_null());
            mapflow_result_free(ptr::null_mut());
            mapflow_experiment_free(ptr::null_mut());
        }
    }

    #[test]
    fn load_reads_config_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, TINY).unwrap();
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let mut handle: *mut MapflowExperiment = ptr::null_mut();
        let code = unsafe { mapflow_experiment_load(cpath.as_ptr(), &mut handle) };
        assert_eq!(code, MAPFLOW_OK);
        unsafe { mapflow_experiment_free(handle) };
    }
}
