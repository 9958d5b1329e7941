//! C interface to the scanning pipeline.
//!
//! The library hands out one opaque handle type, `SentinelScanner`, and
//! moves everything else across the boundary as UTF-8 strings and status
//! codes. Reports are JSON documents in the shape the CLI prints for each
//! scanned page, plus an `extraction_failures` array.
//!
//! Conventions, uniform across the API:
//! - every fallible function returns a [`SentinelStatus`]; out-parameters
//!   are written only on success
//! - strings returned through out-parameters are owned by the caller and
//!   must be released with [`sentinel_string_free`]
//! - a failing call records a human-readable reason, retrievable through
//!   [`sentinel_last_error_message`] until the next failing call on the
//!   same thread
//! - panics never unwind across the boundary; they surface as
//!   `SENTINEL_STATUS_PANIC`

use pagesentinel::analyze::{analyze_page, AnalyzeOptions, PageVerdict};
use pagesentinel::backend::{Backend, HttpBackend, MockBackend};
use pagesentinel::config::{BackendChoice, CliConfig};
use pagesentinel::extract::{extract_all, ExtractError, ExtractorCall, PatternRegistry};
use pagesentinel::html::Dom;
use pagesentinel::prune::PruneThresholds;
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result of every fallible call in this API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentinelStatus {
    /// The call succeeded and all out-parameters are set.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration document was rejected.
    InvalidConfig = 3,
    /// The library failed internally; see sentinel_last_error_message().
    Internal = 4,
    /// A panic was caught at the boundary; the handle is still usable.
    Panic = 5,
}

/// A configured scanning pipeline. Opaque; create with one of the
/// `sentinel_scanner_new_*` constructors, release with
/// [`sentinel_scanner_free`]. A scanner is immutable after construction
/// and safe to share between threads.
pub struct SentinelScanner {
    backend: Box<dyn Backend>,
    registry: PatternRegistry,
    thresholds: PruneThresholds,
    extractor_template: String,
    analyzer_template: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: SentinelStatus, message: impl Into<String>) -> SentinelStatus {
    let text = message.into().replace('\0', " ");
    let stored = CString::new(text).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
    status
}

/// Runs an FFI body with a panic guard so unwinding never crosses the
/// C boundary.
fn guarded<F: FnOnce() -> SentinelStatus>(body: F) -> SentinelStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(SentinelStatus::Panic, "panic inside pagesentinel-ffi"),
    }
}

/// # Safety
/// `ptr` must be NULL or a valid NUL-terminated string.
unsafe fn read_utf8<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SentinelStatus> {
    if ptr.is_null() {
        return Err(fail(SentinelStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(ptr).to_str().map_err(|err| {
        fail(
            SentinelStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8: {err}"),
        )
    })
}

fn build_scanner(config: CliConfig) -> Result<SentinelScanner, String> {
    let templates = config
        .templates()
        .map_err(|err| format!("cannot load prompt templates: {err}"))?;
    let backend: Box<dyn Backend> = match config.backend {
        BackendChoice::Mock(rules) => Box::new(MockBackend::new(rules)),
        BackendChoice::Http(http) => {
            Box::new(HttpBackend::new(http).map_err(|err| err.to_string())?)
        }
    };
    Ok(SentinelScanner {
        backend,
        registry: config.pattern_registry,
        thresholds: config.prune_thresholds,
        extractor_template: templates.extractor,
        analyzer_template: templates.analyzer,
    })
}

fn run_pipeline(scanner: &SentinelScanner, html: &str) -> (PageVerdict, Vec<ExtractError>) {
    let dom = Dom::parse(html);
    let extraction = extract_all(
        &dom,
        &scanner.registry,
        Some(ExtractorCall {
            backend: scanner.backend.as_ref(),
            template: &scanner.extractor_template,
        }),
    );
    let options = AnalyzeOptions {
        registry: &scanner.registry,
        thresholds: &scanner.thresholds,
        template: &scanner.analyzer_template,
    };
    let verdict = analyze_page(
        &dom,
        &extraction.segments,
        scanner.backend.as_ref(),
        &options,
    );
    (verdict, extraction.failures)
}

/// # Safety
/// `out` must be valid for writing one pointer.
unsafe fn deliver_scanner(
    scanner: Result<SentinelScanner, String>,
    out: *mut *mut SentinelScanner,
) -> SentinelStatus {
    match scanner {
        Ok(scanner) => {
            out.write(Box::into_raw(Box::new(scanner)));
            SentinelStatus::Ok
        }
        Err(message) => fail(SentinelStatus::InvalidConfig, message),
    }
}

/// Creates a scanner over the built-in deterministic mock backend with
/// default rules: fully offline, reproducible verdicts. Writes the new
/// handle to `out` and returns `SENTINEL_STATUS_OK`.
///
/// # Safety
/// `out` must be a valid pointer to a `SentinelScanner*`.
#[no_mangle]
pub unsafe extern "C" fn sentinel_scanner_new_mock(out: *mut *mut SentinelScanner) -> SentinelStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SentinelStatus::NullArgument, "out is NULL");
        }
        deliver_scanner(build_scanner(CliConfig::default()), out)
    })
}

/// Creates a scanner from a JSON configuration document — the same schema
/// the command-line tool accepts via `--config`. An empty document (`{}`)
/// is the mock default; `{"backend": {"kind": "http", ...}}` configures a
/// live endpoint. Template override paths are resolved against the current
/// working directory.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string and `out` a valid
/// pointer to a `SentinelScanner*`.
#[no_mangle]
pub unsafe extern "C" fn sentinel_scanner_new_with_config(
    config_json: *const c_char,
    out: *mut *mut SentinelScanner,
) -> SentinelStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SentinelStatus::NullArgument, "out is NULL");
        }
        let text = match read_utf8(config_json, "config_json") {
            Ok(text) => text,
            Err(status) => return status,
        };
        let config: CliConfig = match serde_json::from_str(text) {
            Ok(config) => config,
            Err(err) => return fail(SentinelStatus::InvalidConfig, err.to_string()),
        };
        deliver_scanner(build_scanner(config), out)
    })
}

/// Releases a scanner. NULL is a no-op. The handle must not be used
/// afterwards.
///
/// # Safety
/// `scanner` must be NULL or a pointer returned by a constructor of this
/// library that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sentinel_scanner_free(scanner: *mut SentinelScanner) {
    if !scanner.is_null() {
        drop(Box::from_raw(scanner));
    }
}

/// Scans one HTML document and writes the page report to
/// `report_json_out` as a newly allocated JSON string: the page verdict,
/// per-segment check results, analysis failures, and any extraction
/// failures. Release the string with [`sentinel_string_free`].
///
/// # Safety
/// `scanner` must be a live handle from this library, `html` a valid
/// NUL-terminated string, and `report_json_out` valid for writing one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn sentinel_scan_html(
    scanner: *const SentinelScanner,
    html: *const c_char,
    report_json_out: *mut *mut c_char,
) -> SentinelStatus {
    guarded(|| {
        if scanner.is_null() || report_json_out.is_null() {
            return fail(SentinelStatus::NullArgument, "scanner or report_json_out is NULL");
        }
        let html = match read_utf8(html, "html") {
            Ok(html) => html,
            Err(status) => return status,
        };
        let (verdict, extract_failures) = run_pipeline(&*scanner, html);
        let mut report = match serde_json::to_value(&verdict) {
            Ok(value) => value,
            Err(err) => return fail(SentinelStatus::Internal, err.to_string()),
        };
        report["extraction_failures"] = extract_failures
            .iter()
            .map(|err| serde_json::Value::String(err.to_string()))
            .collect::<Vec<_>>()
            .into();
        let text = match serde_json::to_string_pretty(&report) {
            Ok(text) => text,
            Err(err) => return fail(SentinelStatus::Internal, err.to_string()),
        };
        match CString::new(text) {
            Ok(owned) => {
                report_json_out.write(owned.into_raw());
                SentinelStatus::Ok
            }
            Err(err) => fail(SentinelStatus::Internal, err.to_string()),
        }
    })
}

/// Scans one HTML document and writes only the page-level verdict:
/// 1 when the page is judged malicious, 0 when benign.
///
/// # Safety
/// `scanner` must be a live handle from this library, `html` a valid
/// NUL-terminated string, and `malicious_out` valid for writing one int.
#[no_mangle]
pub unsafe extern "C" fn sentinel_scan_is_malicious(
    scanner: *const SentinelScanner,
    html: *const c_char,
    malicious_out: *mut c_int,
) -> SentinelStatus {
    guarded(|| {
        if scanner.is_null() || malicious_out.is_null() {
            return fail(SentinelStatus::NullArgument, "scanner or malicious_out is NULL");
        }
        let html = match read_utf8(html, "html") {
            Ok(html) => html,
            Err(status) => return status,
        };
        let (verdict, _) = run_pipeline(&*scanner, html);
        malicious_out.write(c_int::from(verdict.malicious));
        SentinelStatus::Ok
    })
}

/// Releases a string allocated by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a string pointer this library returned that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sentinel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Returns the reason for the most recent failure on this thread, or NULL
/// when no call has failed yet. The pointer stays valid until the next
/// failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn sentinel_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |message| message.as_ptr())
    })
}
