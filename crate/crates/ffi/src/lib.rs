//! C interface to the bucketed NER evaluation library.
//!
//! The surface is deliberately small: callers pass a JSON configuration
//! string, receive an opaque report handle, and pull rendered JSON or
//! markdown out of it. All strings returned as `*mut c_char` are owned by
//! the caller and must be released with [`nerdiag_string_free`]; the report
//! handle is released with [`nerdiag_report_free`].
//!
//! Every function is safe to call from multiple threads at once. The last
//! error message is thread-local.
//!
//! The configuration JSON mirrors the CLI:
//!
//! ```json
//! {
//!   "train": "train.conll",
//!   "test": "test.conll",
//!   "predictions": [
//!     {"name": "sysA", "column": 2},
//!     {"name": "sysB", "file": "sysB.conll"}
//!   ],
//!   "scheme": "bio",
//!   "attributes": ["eLen", "sLen"],
//!   "alpha": 0.05,
//!   "lowercase": false,
//!   "default_buckets": 4,
//!   "bucket_overrides": {"sLen": 3},
//!   "compare": ["sysA", "sysB"]
//! }
//! ```
//!
//! Only `train`, `test`, and `predictions` are required. When `compare`
//! names two systems the report additionally carries the comparative
//! section.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use nerdiag::attributes::AttributeId;
use nerdiag::corpus::Scheme;
use nerdiag::pipeline::{run_analyze, run_compare, PipelineError, PredictionSource, RunConfig};
use nerdiag::report::{emit_json, emit_markdown};
use nerdiag::ReportBundle;
use serde::Deserialize;

/// Outcome of an interface call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NerdiagStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration JSON was malformed or inconsistent.
    InvalidConfig = 3,
    /// The analysis itself failed (unreadable files, bad corpus, ...).
    AnalysisFailed = 4,
}

/// Opaque handle to a finished analysis.
pub struct NerdiagReport {
    bundle: ReportBundle,
    warnings: Vec<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message.into()));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FfiPrediction {
    name: String,
    #[serde(default)]
    column: Option<usize>,
    #[serde(default)]
    file: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FfiConfig {
    train: PathBuf,
    test: PathBuf,
    predictions: Vec<FfiPrediction>,
    #[serde(default)]
    scheme: Option<String>,
    #[serde(default)]
    attributes: Option<Vec<String>>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    lowercase: Option<bool>,
    #[serde(default)]
    default_buckets: Option<usize>,
    #[serde(default)]
    bucket_overrides: Option<BTreeMap<String, usize>>,
    #[serde(default)]
    stats_path: Option<PathBuf>,
    #[serde(default)]
    plan_path: Option<PathBuf>,
    #[serde(default)]
    tensor_path: Option<PathBuf>,
    #[serde(default)]
    compare: Option<[String; 2]>,
}

fn build_config(text: &str) -> Result<(RunConfig, Option<[String; 2]>), String> {
    let parsed: FfiConfig =
        serde_json::from_str(text).map_err(|e| format!("configuration JSON: {e}"))?;
    let mut cfg = RunConfig::new(parsed.train, parsed.test);
    for prediction in parsed.predictions {
        let source = match (prediction.column, prediction.file) {
            (Some(column), None) => PredictionSource::Column(column),
            (None, Some(file)) => PredictionSource::File(file),
            _ => {
                return Err(format!(
                    "prediction {}: give exactly one of \"column\" or \"file\"",
                    prediction.name
                ))
            }
        };
        cfg.predictions.push((prediction.name, source));
    }
    if let Some(scheme) = parsed.scheme {
        cfg.scheme = Scheme::parse(&scheme).ok_or_else(|| format!("unknown scheme {scheme:?}"))?;
    }
    if let Some(names) = parsed.attributes {
        let mut attributes = Vec::with_capacity(names.len());
        for name in &names {
            attributes.push(
                AttributeId::parse(name).ok_or_else(|| format!("unknown attribute {name:?}"))?,
            );
        }
        cfg.attributes = attributes;
    }
    if let Some(alpha) = parsed.alpha {
        cfg.alpha = alpha;
    }
    if let Some(lowercase) = parsed.lowercase {
        cfg.lowercase = lowercase;
    }
    if let Some(m) = parsed.default_buckets {
        cfg.buckets.default_m = m;
    }
    for (name, m) in parsed.bucket_overrides.unwrap_or_default() {
        let attr =
            AttributeId::parse(&name).ok_or_else(|| format!("unknown attribute {name:?}"))?;
        cfg.buckets.per_attribute.insert(attr, m);
    }
    cfg.stats_path = parsed.stats_path;
    cfg.plan_path = parsed.plan_path;
    cfg.tensor_path = parsed.tensor_path;
    Ok((cfg, parsed.compare))
}

/// Runs an analysis described by a JSON configuration string.
///
/// On success writes a report handle to `out_report` and returns
/// [`NerdiagStatus::Ok`]. On failure returns the matching status and leaves
/// `out_report` untouched; [`nerdiag_last_error`] describes the problem.
///
/// # Safety
///
/// `config_json` must be a valid NUL-terminated C string and `out_report` a
/// valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn nerdiag_analyze(
    config_json: *const c_char,
    out_report: *mut *mut NerdiagReport,
) -> NerdiagStatus {
    clear_error();
    if config_json.is_null() || out_report.is_null() {
        set_error("null argument to nerdiag_analyze");
        return NerdiagStatus::NullArgument;
    }
    let text = match CStr::from_ptr(config_json).to_str() {
        Ok(text) => text,
        Err(_) => {
            set_error("configuration is not valid UTF-8");
            return NerdiagStatus::InvalidUtf8;
        }
    };
    let (cfg, compare) = match build_config(text) {
        Ok(built) => built,
        Err(message) => {
            set_error(message);
            return NerdiagStatus::InvalidConfig;
        }
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| match &compare {
        Some([a, b]) => run_compare(&cfg, a, b),
        None => run_analyze(&cfg),
    }));
    match outcome {
        Ok(Ok(output)) => {
            let report = Box::new(NerdiagReport {
                bundle: output.bundle,
                warnings: output.warnings,
            });
            *out_report = Box::into_raw(report);
            NerdiagStatus::Ok
        }
        Ok(Err(error)) => {
            let status = match &error {
                PipelineError::Config(_) => NerdiagStatus::InvalidConfig,
                _ => NerdiagStatus::AnalysisFailed,
            };
            set_error(error.to_string());
            status
        }
        Err(_) => {
            set_error("internal panic during analysis");
            NerdiagStatus::AnalysisFailed
        }
    }
}

unsafe fn render(
    report: *const NerdiagReport,
    render: impl Fn(&ReportBundle) -> Result<String, nerdiag::report::ReportError>,
) -> *mut c_char {
    if report.is_null() {
        set_error("null report handle");
        return std::ptr::null_mut();
    }
    match render(&(*report).bundle) {
        Ok(text) => match CString::new(text) {
            Ok(text) => text.into_raw(),
            Err(_) => {
                set_error("rendered report contained a NUL byte");
                std::ptr::null_mut()
            }
        },
        Err(error) => {
            set_error(error.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Renders the report as JSON. Returns NULL on failure; free the result
/// with [`nerdiag_string_free`].
///
/// # Safety
///
/// `report` must be a handle obtained from [`nerdiag_analyze`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn nerdiag_report_json(report: *const NerdiagReport) -> *mut c_char {
    clear_error();
    render(report, emit_json)
}

/// Renders the report as markdown. Returns NULL on failure; free the
/// result with [`nerdiag_string_free`].
///
/// # Safety
///
/// `report` must be a handle obtained from [`nerdiag_analyze`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn nerdiag_report_markdown(report: *const NerdiagReport) -> *mut c_char {
    clear_error();
    render(report, |bundle| Ok(emit_markdown(bundle)))
}

/// Number of warnings the analysis produced (reduced bucket counts,
/// systems without predictions, ...).
///
/// # Safety
///
/// `report` must be a handle obtained from [`nerdiag_analyze`] that has not
/// been freed, or NULL (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn nerdiag_report_warning_count(report: *const NerdiagReport) -> usize {
    if report.is_null() {
        return 0;
    }
    (*report).warnings.len()
}

/// One warning message by index, or NULL when the index is out of range.
/// Free the result with [`nerdiag_string_free`].
///
/// # Safety
///
/// `report` must be a handle obtained from [`nerdiag_analyze`] that has not
/// been freed, or NULL.
#[no_mangle]
pub unsafe extern "C" fn nerdiag_report_warning(
    report: *const NerdiagReport,
    index: usize,
) -> *mut c_char {
    if report.is_null() {
        return std::ptr::null_mut();
    }
    let warnings = &(*report).warnings;
    match warnings.get(index) {
        Some(message) => CString::new(message.as_str())
            .map(CString::into_raw)
            .unwrap_or(std::ptr::null_mut()),
        None => std::ptr::null_mut(),
    }
}

/// Releases a report handle. NULL is ignored.
///
/// # Safety
///
/// `report` must be a handle obtained from [`nerdiag_analyze`], freed at
/// most once.
#[no_mangle]
pub unsafe extern "C" fn nerdiag_report_free(report: *mut NerdiagReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
///
/// `s` must be a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn nerdiag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The last error message on this thread, or NULL when the previous call
/// succeeded. Free the result with [`nerdiag_string_free`].
#[no_mangle]
pub extern "C" fn nerdiag_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_deref() {
        Some(message) => CString::new(message)
            .map(CString::into_raw)
            .unwrap_or(std::ptr::null_mut()),
        None => std::ptr::null_mut(),
    })
}

/// The library version as a static string. Do not free.
#[no_mangle]
pub extern "C" fn nerdiag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    /// The committed header must match what cbindgen generates from this
    /// source file, so consumers can rely on `include/nerdiag.h`.
    #[test]
    fn committed_header_is_current() {
        let generated = std::fs::read_to_string(concat!(env!("OUT_DIR"), "/nerdiag.h")).unwrap();
        let committed = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/include/nerdiag.h"
        ))
        .unwrap();
        assert_eq!(
            committed, generated,
            "include/nerdiag.h is stale; copy the generated header from OUT_DIR"
        );
    }
}
