//! C interface to `finpot`.
//!
//! Operators live behind the opaque [`FinpotOperator`] handle. Every fallible
//! call returns a [`FinpotStatus`]; on failure the message is available from
//! [`finpot_last_error`] on the same thread. Strings handed out by the library
//! are released with [`finpot_string_free`], handles with
//! [`finpot_operator_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use finpot::conformance::run_conformance_with;
use finpot::io::{parse, parse_str, to_json_string};
use finpot::potency::global_index;
use finpot::report::analyze;
use finpot::spectral::{det_id_plus, tate_trace};
use finpot::{Error, StructuredOperator};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinpotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    MalformedFile = 3,
    /// The description does not define a bounded operator of the class.
    Validation = 4,
    Io = 5,
    /// A rank decision is ambiguous at the requested tolerance.
    DegenerateTolerance = 6,
    /// Series or eigenvalue computation failed.
    Numerical = 7,
    InvalidArgument = 8,
    /// A Rust panic was caught at the boundary.
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinpotComplex {
    pub re: f64,
    pub im: f64,
}

/// Opaque operator handle.
pub struct FinpotOperator {
    inner: StructuredOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> FinpotStatus {
    match e {
        Error::MalformedFile { .. } => FinpotStatus::MalformedFile,
        Error::Validation(_) => FinpotStatus::Validation,
        Error::Io(_) => FinpotStatus::Io,
        Error::DegenerateTolerance { .. } => FinpotStatus::DegenerateTolerance,
        Error::InvalidArgument(_) | Error::UnknownEigenvalue(_) => FinpotStatus::InvalidArgument,
        Error::NotSquareSummable | Error::SeriesBudget { .. } | Error::EigenFailure(_) => {
            FinpotStatus::Numerical
        }
    }
}

struct Fail(FinpotStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), format!("{}: {e}", e.kind()))
    }
}

/// Runs `f`, records failures and converts panics into [`FinpotStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FinpotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FinpotStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            FinpotStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail(FinpotStatus::NullPointer, "null pointer argument".into())
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(FinpotStatus::InvalidUtf8, e.to_string()))
}

unsafe fn op_arg<'a>(p: *const FinpotOperator) -> Result<&'a StructuredOperator, Fail> {
    p.as_ref().map(|h| &h.inner).ok_or_else(null)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

fn handle(op: StructuredOperator) -> *mut FinpotOperator {
    Box::into_raw(Box::new(FinpotOperator { inner: op }))
}

fn c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Fail(FinpotStatus::InvalidArgument, e.to_string()))
}

fn tol_arg(tol: f64) -> Result<f64, Fail> {
    if tol > 0.0 && tol < 1.0 {
        Ok(tol)
    } else {
        Err(Fail(
            FinpotStatus::InvalidArgument,
            format!("tolerance must lie in (0, 1), got {tol}"),
        ))
    }
}

fn to_c(z: finpot::Cx) -> FinpotComplex {
    FinpotComplex { re: z.re, im: z.im }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn finpot_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn finpot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses an operator file held in memory.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_operator_from_json(
    json: *const c_char,
    out: *mut *mut FinpotOperator,
) -> FinpotStatus {
    guard(|| {
        let op = parse_str(str_arg(json)?)?;
        write_out(out, handle(op))
    })
}

/// Parses an operator file from disk.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_operator_from_file(
    path: *const c_char,
    out: *mut *mut FinpotOperator,
) -> FinpotStatus {
    guard(|| {
        let op = parse(str_arg(path)?)?;
        write_out(out, handle(op))
    })
}

/// The worked example operator.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_operator_worked_example(
    out: *mut *mut FinpotOperator,
) -> FinpotStatus {
    guard(|| write_out(out, handle(finpot::worked_example())))
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `op` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn finpot_operator_free(op: *mut FinpotOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// The adjoint as a new handle.
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_operator_adjoint(
    op: *const FinpotOperator,
    out: *mut *mut FinpotOperator,
) -> FinpotStatus {
    guard(|| {
        let star = op_arg(op)?.adjoint();
        write_out(out, handle(star))
    })
}

/// Canonical operator file text; release with [`finpot_string_free`].
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_operator_to_json(
    op: *const FinpotOperator,
    out: *mut *mut c_char,
) -> FinpotStatus {
    guard(|| {
        let s = c_string(to_json_string(op_arg(op)?))?;
        write_out(out, s)
    })
}

/// Global index `i(phi)`.
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_index(
    op: *const FinpotOperator,
    tol: f64,
    out: *mut usize,
) -> FinpotStatus {
    guard(|| {
        let m = global_index(op_arg(op)?, tol_arg(tol)?)?;
        write_out(out, m)
    })
}

/// Trace of the operator restricted to its core.
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_trace(
    op: *const FinpotOperator,
    tol: f64,
    out: *mut FinpotComplex,
) -> FinpotStatus {
    guard(|| {
        let t = tate_trace(op_arg(op)?, tol_arg(tol)?)?;
        write_out(out, to_c(t))
    })
}

/// `Det(Id + phi)` computed as `det(I + B|W)`.
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_det_id_plus(
    op: *const FinpotOperator,
    tol: f64,
    out: *mut FinpotComplex,
) -> FinpotStatus {
    guard(|| {
        let d = det_id_plus(op_arg(op)?, tol_arg(tol)?)?;
        write_out(out, to_c(d.restriction))
    })
}

/// Full analysis report as JSON; release with [`finpot_string_free`].
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finpot_analyze_json(
    op: *const FinpotOperator,
    tol: f64,
    out: *mut *mut c_char,
) -> FinpotStatus {
    guard(|| {
        let a = analyze(op_arg(op)?, tol_arg(tol)?)?;
        let text = serde_json::to_string(&a)
            .map_err(|e| Fail(FinpotStatus::InvalidArgument, e.to_string()))?;
        write_out(out, c_string(text)?)
    })
}

/// Runs the theorem suite; `passed` receives whether every check held.
/// `report_json` may be null; otherwise it receives the report, to be
/// released with [`finpot_string_free`].
///
/// # Safety
/// `op` must be a live handle, `passed` a valid pointer, `report_json` null or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn finpot_verify(
    op: *const FinpotOperator,
    rank_tol: f64,
    check_tol: f64,
    passed: *mut bool,
    report_json: *mut *mut c_char,
) -> FinpotStatus {
    guard(|| {
        let r = run_conformance_with(op_arg(op)?, tol_arg(rank_tol)?, tol_arg(check_tol)?);
        if !report_json.is_null() {
            let text = serde_json::to_string(&r)
                .map_err(|e| Fail(FinpotStatus::InvalidArgument, e.to_string()))?;
            report_json.write(c_string(text)?);
        }
        write_out(passed, r.passed)
    })
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn finpot_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
