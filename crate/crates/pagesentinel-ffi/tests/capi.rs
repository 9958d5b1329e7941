//! Exercises the C ABI the way a C caller would: raw pointers in, status
//! codes and allocated strings out.

use pagesentinel_ffi::{
    sentinel_last_error_message, sentinel_scan_html, sentinel_scan_is_malicious,
    sentinel_scanner_free, sentinel_scanner_new_mock, sentinel_scanner_new_with_config,
    sentinel_string_free, SentinelScanner, SentinelStatus,
};
use std::ffi::{c_char, c_int, CStr, CString};
use std::ptr;

const CLEAN_PAGE: &str = r#"<body><main><h1>Notes</h1>
<form id="search"><input name="q"></form>
<p>Nothing unusual here.</p></main></body>"#;

const ATTACKED_PAGE: &str = r#"<body><main>
<form id="checkout"><input name="card-number"></form>
<form id="checkout"><p>URGENT: verify your identity immediately</p>
<input name="password"></form></main></body>"#;

fn new_mock() -> *mut SentinelScanner {
    let mut scanner = ptr::null_mut();
    let status = unsafe { sentinel_scanner_new_mock(&mut scanner) };
    assert_eq!(status, SentinelStatus::Ok);
    assert!(!scanner.is_null());
    scanner
}

fn last_error() -> String {
    let ptr = sentinel_last_error_message();
    assert!(!ptr.is_null());
    unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_string()
}

fn scan_verdict(scanner: *const SentinelScanner, html: &str) -> c_int {
    let html = CString::new(html).unwrap();
    let mut malicious: c_int = -1;
    let status = unsafe { sentinel_scan_is_malicious(scanner, html.as_ptr(), &mut malicious) };
    assert_eq!(status, SentinelStatus::Ok);
    malicious
}

#[test]
fn mock_scanner_flags_an_injected_page_and_passes_a_clean_one() {
    let scanner = new_mock();
    assert_eq!(scan_verdict(scanner, CLEAN_PAGE), 0);
    assert_eq!(scan_verdict(scanner, ATTACKED_PAGE), 1);
    unsafe { sentinel_scanner_free(scanner) };
}

#[test]
fn scan_report_is_json_with_verdict_and_segments() {
    let scanner = new_mock();
    let html = CString::new(ATTACKED_PAGE).unwrap();
    let mut report_ptr: *mut c_char = ptr::null_mut();
    let status = unsafe { sentinel_scan_html(scanner, html.as_ptr(), &mut report_ptr) };
    assert_eq!(status, SentinelStatus::Ok);
    assert!(!report_ptr.is_null());

    let text = unsafe { CStr::from_ptr(report_ptr) }.to_str().unwrap();
    let report: serde_json::Value = serde_json::from_str(text).unwrap();
    assert_eq!(report["page_prediction"], serde_json::Value::Bool(true));
    let segments = report["segments"].as_array().unwrap();
    assert!(!segments.is_empty());
    assert!(segments.iter().any(|s| s["contaminated"] == true));
    assert!(report["failures"].as_array().unwrap().is_empty());
    assert!(report["extraction_failures"].as_array().unwrap().is_empty());

    unsafe { sentinel_string_free(report_ptr) };
    unsafe { sentinel_scanner_free(scanner) };
}

#[test]
fn config_document_drives_the_scanner() {
    // Disarming the mock lexicon through the config turns the attacked
    // page benign: the document is honored, not just parsed.
    let config = CString::new(r#"{"backend": {"kind": "mock", "coercive_lexicon": []}}"#).unwrap();
    let mut scanner = ptr::null_mut();
    let status = unsafe { sentinel_scanner_new_with_config(config.as_ptr(), &mut scanner) };
    assert_eq!(status, SentinelStatus::Ok);
    assert_eq!(scan_verdict(scanner, ATTACKED_PAGE), 0);
    unsafe { sentinel_scanner_free(scanner) };
}

#[test]
fn bad_configs_are_rejected_with_a_reason() {
    let mut scanner = ptr::null_mut();

    let unknown_key = CString::new(r#"{"no_such_option": 1}"#).unwrap();
    let status = unsafe { sentinel_scanner_new_with_config(unknown_key.as_ptr(), &mut scanner) };
    assert_eq!(status, SentinelStatus::InvalidConfig);
    assert!(scanner.is_null());
    assert!(last_error().contains("no_such_option"), "{}", last_error());

    let not_json = CString::new("backend: mock").unwrap();
    let status = unsafe { sentinel_scanner_new_with_config(not_json.as_ptr(), &mut scanner) };
    assert_eq!(status, SentinelStatus::InvalidConfig);
}

#[test]
fn null_and_invalid_arguments_are_reported_not_fatal() {
    let scanner = new_mock();

    let mut malicious: c_int = -1;
    let status =
        unsafe { sentinel_scan_is_malicious(scanner, ptr::null(), &mut malicious) };
    assert_eq!(status, SentinelStatus::NullArgument);
    assert_eq!(malicious, -1, "out-parameter written on failure");
    assert!(last_error().contains("NULL"));

    let status =
        unsafe { sentinel_scan_is_malicious(ptr::null(), ptr::null(), &mut malicious) };
    assert_eq!(status, SentinelStatus::NullArgument);

    // Invalid UTF-8: a bare 0xFF byte cannot begin a sequence.
    let bytes: [c_char; 2] = [-1, 0];
    let status =
        unsafe { sentinel_scan_is_malicious(scanner, bytes.as_ptr(), &mut malicious) };
    assert_eq!(status, SentinelStatus::InvalidUtf8);
    assert!(last_error().contains("UTF-8"));

    // The handle survives all of the above.
    assert_eq!(scan_verdict(scanner, CLEAN_PAGE), 0);
    unsafe { sentinel_scanner_free(scanner) };
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        sentinel_scanner_free(ptr::null_mut());
        sentinel_string_free(ptr::null_mut());
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("pagesentinel.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for needle in [
        "typedef struct SentinelScanner SentinelScanner;",
        "SENTINEL_STATUS_OK",
        "sentinel_scanner_new_mock",
        "sentinel_scanner_new_with_config",
        "sentinel_scan_html",
        "sentinel_scan_is_malicious",
        "sentinel_scanner_free",
        "sentinel_string_free",
        "sentinel_last_error_message",
    ] {
        assert!(text.contains(needle), "header is missing {needle:?}");
    }
}
