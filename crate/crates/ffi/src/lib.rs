//! C ABI for loading saved offdetect classifiers and scoring text.
//!
//! Every fallible function returns an [`OffdStatus`]. On failure the message
//! is kept per thread and read with [`offd_last_error_message`]. Strings and
//! handles returned by this library must be released with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use offdetect::corpus::{score_to_label, LabelHeuristic};
use offdetect::pipeline::Classifier;
use offdetect::resources::Resources;
use offdetect::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffdStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Format = 5,
    Config = 6,
    Internal = 7,
}

/// A loaded classifier. Opaque to C.
pub struct OffdClassifier {
    inner: Classifier,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: OffdStatus, msg: &str) -> OffdStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> OffdStatus {
    let status = match e {
        Error::Parse { .. } | Error::InvalidInput(_) => OffdStatus::InvalidInput,
        Error::Io { .. } => OffdStatus::Io,
        Error::Format(_) => OffdStatus::Format,
        Error::Config(_) => OffdStatus::Config,
        _ => OffdStatus::Internal,
    };
    fail(status, &e.to_string())
}

fn guarded(f: impl FnOnce() -> OffdStatus) -> OffdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == OffdStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(OffdStatus::Internal, "panic inside offdetect"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, OffdStatus> {
    if p.is_null() {
        return Err(fail(OffdStatus::NullArgument, &format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        fail(
            OffdStatus::InvalidUtf8,
            &format!("{what} is not valid UTF-8"),
        )
    })
}

/// Loads a classifier saved by `offdetect train`. On success `*out` owns a
/// handle for `offd_classifier_free`; on failure it is set to null.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn offd_classifier_load(
    path: *const c_char,
    out: *mut *mut OffdClassifier,
) -> OffdStatus {
    guarded(|| {
        if out.is_null() {
            return fail(OffdStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Classifier::load(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(OffdClassifier { inner }));
                OffdStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Writes the probability that `text` is offensive to `*out_prob`.
///
/// # Safety
/// `handle` must come from `offd_classifier_load`, `text` must be
/// NUL-terminated and `out_prob` valid.
#[no_mangle]
pub unsafe extern "C" fn offd_classifier_predict(
    handle: *const OffdClassifier,
    text: *const c_char,
    out_prob: *mut f64,
) -> OffdStatus {
    guarded(|| {
        if handle.is_null() || out_prob.is_null() {
            return fail(OffdStatus::NullArgument, "handle or out_prob is null");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match (*handle).inner.predict_proba(&[text]) {
            Ok(p) => {
                *out_prob = p[0];
                OffdStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// `"gbdt"` or `"transformer"`; static storage, never freed. Null for a null handle.
///
/// # Safety
/// `handle` must be null or come from `offd_classifier_load`.
#[no_mangle]
pub unsafe extern "C" fn offd_classifier_kind(handle: *const OffdClassifier) -> *const c_char {
    if handle.is_null() {
        return ptr::null();
    }
    let s: &'static CStr = match (*handle).inner.kind_name() {
        "gbdt" => c"gbdt",
        _ => c"transformer",
    };
    s.as_ptr()
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or an unfreed handle from `offd_classifier_load`.
#[no_mangle]
pub unsafe extern "C" fn offd_classifier_free(handle: *mut OffdClassifier) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Applies emoji and hashtag normalization using the resources named by
/// `OFFDETECT_RESOURCES`, or the bundled ones. `*out` receives a string for
/// `offd_string_free`.
///
/// # Safety
/// `text` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn offd_preprocess(text: *const c_char, out: *mut *mut c_char) -> OffdStatus {
    guarded(|| {
        if out.is_null() {
            return fail(OffdStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let res = match Resources::resolve(None) {
            Ok(r) => r,
            Err(e) => return from_error(&e),
        };
        let s = res.preprocessor.apply(text);
        match CString::new(s) {
            Ok(c) => {
                *out = c.into_raw();
                OffdStatus::Ok
            }
            Err(_) => fail(OffdStatus::InvalidInput, "result contains a NUL byte"),
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or an unfreed string from this library.
#[no_mangle]
pub unsafe extern "C" fn offd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The score-to-label rule: 1 for offensive, 0 for not, -1 if the thresholds
/// are invalid (see `offd_last_error_message`).
#[no_mangle]
pub extern "C" fn offd_score_to_label(
    average: f64,
    stdev: f64,
    hi_threshold: f64,
    lo_threshold: f64,
    std_threshold: f64,
) -> c_int {
    match LabelHeuristic::new(hi_threshold, lo_threshold, std_threshold) {
        Ok(h) => c_int::from(score_to_label(average, stdev, &h).is_positive()),
        Err(e) => {
            set_error(&e.to_string());
            -1
        }
    }
}

/// Message of the last failure on this thread, empty after a success. Valid
/// until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn offd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
