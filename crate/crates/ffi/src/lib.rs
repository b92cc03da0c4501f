//! C ABI over `astrorepair`.
//!
//! Every function returns an [`AstroStatus`]; results come back through out-pointers.
//! On failure the message is kept per thread and read with [`astro_last_error`].
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use astrorepair::cli::{self, Command, Report};
use astrorepair::config::ExperimentConfig;
use astrorepair::netmap::cluster_count_estimate;
use astrorepair::reliability::p_failures;
use astrorepair::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AstroStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numeric = 4,
    Domain = 5,
    Infeasible = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AstroCoreKind {
    Ubrain = 0,
    Crossbar = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AstroCommand {
    Selfrepair = 0,
    Clusters = 1,
    Synthesize = 2,
    Faults = 3,
    Reliability = 4,
    Area = 5,
    Power = 6,
    Pwl = 7,
}

/// Opaque experiment configuration.
pub struct AstroConfig(ExperimentConfig);

/// Opaque result of one experiment run.
pub struct AstroReport {
    report: Report,
    summary: CString,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AstroStatus {
    match e {
        Error::Parameter { .. } | Error::UnsupportedTechnique { .. } | Error::Allocation(_) => AstroStatus::InvalidArgument,
        Error::Config { .. } | Error::Json(_) => AstroStatus::Config,
        Error::Numeric(_) => AstroStatus::Numeric,
        Error::Domain(_) => AstroStatus::Domain,
        Error::Unreachable(_) | Error::Infeasible { .. } => AstroStatus::Infeasible,
        Error::Io(_) => AstroStatus::Io,
    }
}

/// Run `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (AstroStatus, String)>) -> AstroStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AstroStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            AstroStatus::Panic
        }
    }
}

fn lift<T>(r: astrorepair::Result<T>) -> Result<T, (AstroStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (AstroStatus, String) {
    (AstroStatus::NullPointer, format!("`{name}` is null"))
}

/// Last error message on this thread, or an empty string. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn astro_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn astro_config_default(out: *mut *mut AstroConfig) -> AstroStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(AstroConfig(ExperimentConfig::default())));
        Ok(())
    })
}

/// Parse and validate a JSON config.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn astro_config_from_json(json: *const c_char, out: *mut *mut AstroConfig) -> AstroStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| (AstroStatus::InvalidArgument, e.to_string()))?;
        let cfg = lift(ExperimentConfig::from_json(text))?;
        *out = Box::into_raw(Box::new(AstroConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn astro_config_free(cfg: *mut AstroConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run one experiment. Nothing is written to disk; read the outputs from the report.
/// `command` takes an [`AstroCommand`] value.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn astro_run(cfg: *const AstroConfig, command: u32, seed: u64, out: *mut *mut AstroReport) -> AstroStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cmd = *Command::ALL
            .get(command as usize)
            .ok_or_else(|| (AstroStatus::InvalidArgument, format!("unknown command {command}")))?;
        let report = lift(cli::run(cmd, &cfg.0, seed, false))?;
        let summary = CString::new(report.summary()).map_err(|e| (AstroStatus::Io, e.to_string()))?;
        let names = report.artifacts.iter().map(|(n, _)| CString::new(n.as_str()).unwrap_or_default()).collect();
        *out = Box::into_raw(Box::new(AstroReport { report, summary, names }));
        Ok(())
    })
}

/// 1 when every acceptance check in the report passed, else 0; 0 for null.
///
/// # Safety
/// `report` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn astro_report_passed(report: *const AstroReport) -> i32 {
    report.as_ref().map_or(0, |r| i32::from(r.report.passed()))
}

/// The report's summary text, owned by the report.
///
/// # Safety
/// `report` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn astro_report_summary(report: *const AstroReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.summary.as_ptr())
}

/// # Safety
/// `report` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn astro_report_artifact_count(report: *const AstroReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.artifacts.len())
}

/// Borrow artifact `index`: its file name and contents, both owned by the report.
///
/// # Safety
/// `report` must be a live report handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn astro_report_artifact(
    report: *const AstroReport,
    index: usize,
    name: *mut *const c_char,
    data: *mut *const u8,
    len: *mut usize,
) -> AstroStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if name.is_null() || data.is_null() || len.is_null() {
            return Err(null("name/data/len"));
        }
        let (_, bytes) = r
            .report
            .artifacts
            .get(index)
            .ok_or_else(|| (AstroStatus::OutOfRange, format!("artifact {index} of {}", r.report.artifacts.len())))?;
        *name = r.names[index].as_ptr();
        *data = bytes.as_ptr();
        *len = bytes.len();
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn astro_report_free(report: *mut AstroReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Clusters needed for `params` synapses on the config's core of `kind`, an
/// [`AstroCoreKind`] value.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn astro_cluster_count(cfg: *const AstroConfig, kind: u32, params: u64, out: *mut u64) -> AstroStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let core = match kind {
            k if k == AstroCoreKind::Ubrain as u32 => &cfg.0.cores.ubrain,
            k if k == AstroCoreKind::Crossbar as u32 => &cfg.0.cores.crossbar,
            k => return Err((AstroStatus::InvalidArgument, format!("unknown core kind {k}"))),
        };
        *out = cluster_count_estimate(params, core);
        Ok(())
    })
}

/// Poisson probability of exactly `n` failures in `interval_hours` at rate `lambda` per hour.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn astro_p_failures(lambda: f64, interval_hours: f64, n: u32, out: *mut f64) -> AstroStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(p_failures(lambda, interval_hours, n))?;
        Ok(())
    })
}
