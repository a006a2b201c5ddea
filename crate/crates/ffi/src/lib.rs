//! C ABI over the `mmapf` library.
//!
//! Instances and plans cross the boundary as opaque handles created from
//! JSON text (the same formats the command line reads) and released with the
//! matching `*_free` function. Every fallible call returns a [`MapfStatus`];
//! on failure [`mapf_last_error`] describes what went wrong on the calling
//! thread. Strings returned to the caller are owned by the caller and must be
//! released with [`mapf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use mmapf::explain::{answer, ExplainError, ExplainOptions, Query};
use mmapf::io::{from_json, parse_instance, parse_plan, serialize_plan, to_canonical_json};
use mmapf::model::{Instance, Plan};
use mmapf::solver::{solve_optimal, Budget, Relaxation, SolveOutcome};
use mmapf::validate::validate;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Schema = 3,
    Unsat = 4,
    Timeout = 5,
    Negative = 6,
    Internal = 7,
}

/// Opaque instance handle.
pub struct MapfInstance(Instance);

/// Opaque plan handle.
pub struct MapfPlan(Plan);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = CString::new(message.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: MapfStatus, message: impl Into<String>) -> MapfStatus {
    set_error(message);
    status
}

/// Runs `body`, turning panics into [`MapfStatus::Internal`].
fn guard(body: impl FnOnce() -> MapfStatus) -> MapfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(MapfStatus::Internal, "internal error"),
    }
}

/// # Safety
/// `text` must be null or a valid NUL-terminated string.
unsafe fn text<'a>(text: *const c_char) -> Result<&'a str, MapfStatus> {
    if text.is_null() {
        return Err(fail(MapfStatus::NullArgument, "string argument is null"));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|_| fail(MapfStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

fn budget(timeout_ms: u64) -> Budget {
    if timeout_ms == 0 {
        Budget::unlimited()
    } else {
        Budget::with_timeout(Duration::from_millis(timeout_ms))
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mapf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mapf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mapf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an instance file.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_from_json(json: *const c_char, out: *mut *mut MapfInstance) -> MapfStatus {
    guard(|| {
        if out.is_null() {
            return fail(MapfStatus::NullArgument, "out is null");
        }
        let json = match text(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_instance(json.as_bytes()) {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(MapfInstance(instance)));
                MapfStatus::Ok
            }
            Err(e) => fail(MapfStatus::Schema, e.to_string()),
        }
    })
}

/// Releases an instance. Null is ignored.
///
/// # Safety
/// `instance` must be null or a handle from [`mapf_instance_from_json`],
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_free(instance: *mut MapfInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_instance_agent_count(instance: *const MapfInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.agents().len())
}

/// Solves optimally. Returns `Ok` with a plan in `out`, `Unsat`, or
/// `Timeout`. A `timeout_ms` of 0 means no time limit.
///
/// # Safety
/// `instance` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mapf_solve(
    instance: *const MapfInstance,
    timeout_ms: u64,
    out: *mut *mut MapfPlan,
) -> MapfStatus {
    guard(|| {
        let Some(instance) = instance.as_ref() else {
            return fail(MapfStatus::NullArgument, "instance is null");
        };
        if out.is_null() {
            return fail(MapfStatus::NullArgument, "out is null");
        }
        match solve_optimal(&instance.0, &Relaxation::none(), &budget(timeout_ms)).outcome {
            SolveOutcome::Sat(plan) => {
                *out = Box::into_raw(Box::new(MapfPlan(plan)));
                MapfStatus::Ok
            }
            SolveOutcome::Unsat => fail(MapfStatus::Unsat, "no plan within the makespan bound"),
            SolveOutcome::Timeout => fail(MapfStatus::Timeout, "solver budget exhausted"),
        }
    })
}

/// Parses a plan file against `instance`'s graph.
///
/// # Safety
/// `instance` must be a live handle, `json` a valid NUL-terminated string
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mapf_plan_from_json(
    instance: *const MapfInstance,
    json: *const c_char,
    out: *mut *mut MapfPlan,
) -> MapfStatus {
    guard(|| {
        let Some(instance) = instance.as_ref() else {
            return fail(MapfStatus::NullArgument, "instance is null");
        };
        if out.is_null() {
            return fail(MapfStatus::NullArgument, "out is null");
        }
        let json = match text(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_plan(json.as_bytes(), instance.0.graph()) {
            Ok(plan) => {
                *out = Box::into_raw(Box::new(MapfPlan(plan)));
                MapfStatus::Ok
            }
            Err(e) => fail(MapfStatus::Schema, e.to_string()),
        }
    })
}

/// Releases a plan. Null is ignored.
///
/// # Safety
/// `plan` must be null or a live plan handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mapf_plan_free(plan: *mut MapfPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Makespan of the plan (latest completion time), or 0 for null.
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_plan_makespan(plan: *const MapfPlan) -> u32 {
    plan.as_ref().map_or(0, |p| p.0.objective_values().makespan)
}

/// Canonical plan file text, or null for a null handle. Free with
/// [`mapf_string_free`].
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mapf_plan_to_json(plan: *const MapfPlan) -> *mut c_char {
    match plan.as_ref() {
        Some(p) => into_c_string(serialize_plan(&p.0)),
        None => ptr::null_mut(),
    }
}

/// Validates `plan`. Returns `Ok` when feasible and `Negative` otherwise;
/// either way the report JSON is stored in `report` when it is non-null.
///
/// # Safety
/// Handles must be live; `report` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mapf_validate(
    instance: *const MapfInstance,
    plan: *const MapfPlan,
    report: *mut *mut c_char,
) -> MapfStatus {
    guard(|| {
        let (Some(instance), Some(plan)) = (instance.as_ref(), plan.as_ref()) else {
            return fail(MapfStatus::NullArgument, "instance or plan is null");
        };
        let r = validate(&instance.0, &plan.0);
        if !report.is_null() {
            *report = into_c_string(to_canonical_json(&r));
        }
        if r.feasible {
            MapfStatus::Ok
        } else {
            fail(MapfStatus::Negative, "the plan is not feasible")
        }
    })
}

/// Answers a query given as JSON (`{"kind": "why_wait", ...}`, see the
/// command-line documentation). `plan` is required for wait queries and may
/// be null otherwise. The answer JSON goes to `out`.
///
/// # Safety
/// `instance` must be a live handle, `plan` null or live, `query` a valid
/// NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mapf_explain(
    instance: *const MapfInstance,
    plan: *const MapfPlan,
    query: *const c_char,
    timeout_ms: u64,
    out: *mut *mut c_char,
) -> MapfStatus {
    guard(|| {
        let Some(instance) = instance.as_ref() else {
            return fail(MapfStatus::NullArgument, "instance is null");
        };
        if out.is_null() {
            return fail(MapfStatus::NullArgument, "out is null");
        }
        let query = match text(query) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let query: Query = match from_json(query.as_bytes()) {
            Ok(q) => q,
            Err(e) => return fail(MapfStatus::Schema, e.to_string()),
        };
        let options = ExplainOptions::new(budget(timeout_ms));
        match answer(&instance.0, plan.as_ref().map(|p| &p.0), &query, &options) {
            Ok(list) => {
                let json = if matches!(query, Query::WhyInfeasible) {
                    to_canonical_json(&list)
                } else {
                    to_canonical_json(&list[0])
                };
                *out = into_c_string(json);
                MapfStatus::Ok
            }
            Err(e @ ExplainError::Timeout) => fail(MapfStatus::Timeout, e.to_string()),
            Err(e) => fail(MapfStatus::Negative, e.to_string()),
        }
    })
}
