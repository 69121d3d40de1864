//! Drives the C interface the way a foreign caller would: through raw
//! pointers and the exported functions only.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use nerdiag_ffi::{
    nerdiag_analyze, nerdiag_last_error, nerdiag_report_free, nerdiag_report_json,
    nerdiag_report_markdown, nerdiag_report_warning, nerdiag_report_warning_count,
    nerdiag_string_free, nerdiag_version, NerdiagReport, NerdiagStatus,
};

const TRAIN: &str = include_str!("../../core/tests/fixtures/train.conll");
const TEST: &str = include_str!("../../core/tests/fixtures/test.conll");

/// Takes ownership of a returned C string and frees it through the
/// interface.
unsafe fn take_string(ptr: *mut c_char) -> Option<String> {
    if ptr.is_null() {
        return None;
    }
    let text = CStr::from_ptr(ptr).to_str().unwrap().to_owned();
    nerdiag_string_free(ptr);
    Some(text)
}

unsafe fn last_error() -> Option<String> {
    take_string(nerdiag_last_error())
}

fn analyze(config: &str) -> (NerdiagStatus, *mut NerdiagReport) {
    let config = CString::new(config).unwrap();
    let mut report: *mut NerdiagReport = ptr::null_mut();
    let status = unsafe { nerdiag_analyze(config.as_ptr(), &mut report) };
    (status, report)
}

fn write_fixtures(dir: &std::path::Path) -> (String, String) {
    let train = dir.join("train.conll");
    let test = dir.join("test.conll");
    std::fs::write(&train, TRAIN).unwrap();
    std::fs::write(&test, TEST).unwrap();
    (
        train.to_str().unwrap().to_owned(),
        test.to_str().unwrap().to_owned(),
    )
}

#[test]
fn version_is_a_static_string() {
    let version = unsafe { CStr::from_ptr(nerdiag_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn full_analysis_through_the_c_interface() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = write_fixtures(dir.path());
    let config = format!(
        r#"{{
            "train": {train:?},
            "test": {test:?},
            "predictions": [
                {{"name": "sysA", "column": 2}},
                {{"name": "sysB", "column": 3}},
                {{"name": "sysC", "column": 4}}
            ],
            "compare": ["sysA", "sysC"]
        }}"#
    );
    let (status, report) = analyze(&config);
    assert_eq!(status, NerdiagStatus::Ok);
    assert!(!report.is_null());

    unsafe {
        let json = take_string(nerdiag_report_json(report)).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["overall"].as_array().unwrap().len(), 3);
        assert_eq!(value["comparative"]["system_a"], "sysA");

        let markdown = take_string(nerdiag_report_markdown(report)).unwrap();
        assert!(markdown.starts_with("# Bucketed NER evaluation"));
        assert!(markdown.contains("## Comparative diagnosis"));

        // The fixture reduces the eCon axis, so at least one warning exists
        // and each one is retrievable.
        let count = nerdiag_report_warning_count(report);
        assert!(count >= 1);
        for index in 0..count {
            assert!(take_string(nerdiag_report_warning(report, index)).is_some());
        }
        assert!(nerdiag_report_warning(report, count).is_null());

        nerdiag_report_free(report);
    }
}

#[test]
fn null_arguments_are_rejected() {
    let mut report: *mut NerdiagReport = ptr::null_mut();
    let status = unsafe { nerdiag_analyze(ptr::null(), &mut report) };
    assert_eq!(status, NerdiagStatus::NullArgument);
    assert!(report.is_null());
    assert!(unsafe { last_error() }.unwrap().contains("null"));

    let config = CString::new("{}").unwrap();
    let status = unsafe { nerdiag_analyze(config.as_ptr(), ptr::null_mut()) };
    assert_eq!(status, NerdiagStatus::NullArgument);

    unsafe {
        assert!(nerdiag_report_json(ptr::null()).is_null());
        assert_eq!(nerdiag_report_warning_count(ptr::null()), 0);
        nerdiag_report_free(ptr::null_mut());
        nerdiag_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_rejected() {
    let bytes: &[u8] = b"{\"train\": \"\xFF\"}\0";
    let mut report: *mut NerdiagReport = ptr::null_mut();
    let status =
        unsafe { nerdiag_analyze(bytes.as_ptr() as *const c_char, &mut report) };
    assert_eq!(status, NerdiagStatus::InvalidUtf8);
    assert!(report.is_null());
}

#[test]
fn malformed_configuration_is_rejected() {
    for config in [
        "not json at all",
        r#"{"train": "a"}"#,
        r#"{"train": "a", "test": "b", "predictions": [{"name": "x"}]}"#,
        r#"{"train": "a", "test": "b", "predictions": [{"name": "x", "column": 2, "file": "p"}]}"#,
        r#"{"train": "a", "test": "b", "predictions": [{"name": "x", "column": 2}], "scheme": "bioul"}"#,
        r#"{"train": "a", "test": "b", "predictions": [{"name": "x", "column": 2}], "attributes": ["bogus"]}"#,
        r#"{"train": "a", "test": "b", "predictions": [{"name": "x", "column": 2}], "unknown_key": 1}"#,
    ] {
        let (status, report) = analyze(config);
        assert_eq!(status, NerdiagStatus::InvalidConfig, "config: {config}");
        assert!(report.is_null());
        assert!(unsafe { last_error() }.is_some());
    }
}

#[test]
fn missing_files_fail_the_analysis() {
    let config = r#"{
        "train": "/nonexistent/train.conll",
        "test": "/nonexistent/test.conll",
        "predictions": [{"name": "sysA", "column": 2}]
    }"#;
    let (status, report) = analyze(config);
    assert_eq!(status, NerdiagStatus::AnalysisFailed);
    assert!(report.is_null());
    let message = unsafe { last_error() }.unwrap();
    assert!(message.contains("train.conll"), "message: {message}");
}

#[test]
fn success_clears_the_previous_error() {
    let (status, report) = analyze("not json");
    assert_eq!(status, NerdiagStatus::InvalidConfig);
    assert!(report.is_null());
    assert!(unsafe { last_error() }.is_some());

    let dir = tempfile::tempdir().unwrap();
    let (train, test) = write_fixtures(dir.path());
    let config = format!(
        r#"{{"train": {train:?}, "test": {test:?},
            "predictions": [{{"name": "sysA", "column": 2}}],
            "attributes": ["eLen"]}}"#
    );
    let (status, report) = analyze(&config);
    assert_eq!(status, NerdiagStatus::Ok);
    assert!(unsafe { last_error() }.is_none());
    unsafe { nerdiag_report_free(report) };
}
