//! C ABI over `coevo-core`.
//!
//! Every fallible function returns a [`CoevoStatus`]; on failure a message is
//! available from [`coevo_last_error_message`] on the same thread. Objects are
//! opaque handles released with their `_free` function, strings returned by
//! the library are released with [`coevo_string_free`]. No panic crosses the
//! boundary: a panic is reported as `COEVO_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use coevo_core::control::{execute, summarize, ControlError, RunConfig};
use coevo_core::dsl::{tree_edit_distance, validate_spec, OperatorSpec};
use coevo_core::problem::{load_instance, optimality_gap, BksRegistry, Domain, InstanceFormat, ProblemInstance};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoevoStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidInstance = 4,
    InvalidEncoding = 5,
    InvalidSpec = 6,
    Config = 7,
    Runtime = 8,
    OverBudget = 9,
    Panic = 10,
}

/// A loaded benchmark instance.
pub struct CoevoInstance {
    inner: Arc<ProblemInstance>,
}

/// A validated operator spec.
pub struct CoevoSpec {
    inner: OperatorSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

type FfiResult = Result<(), (CoevoStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult) -> CoevoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CoevoStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            CoevoStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CoevoStatus, String)> {
    if p.is_null() {
        return Err((CoevoStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CoevoStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> FfiResult {
    if p.is_null() {
        Err((CoevoStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn control_status(e: &ControlError) -> CoevoStatus {
    match e {
        ControlError::Config(_) | ControlError::Schema { .. } => CoevoStatus::Config,
        ControlError::OverBudget { .. } => CoevoStatus::OverBudget,
        ControlError::Problem(_) => CoevoStatus::InvalidInstance,
        ControlError::Io(_) => CoevoStatus::Io,
        _ => CoevoStatus::Runtime,
    }
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn coevo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn coevo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads an instance. `format` may be null to infer it from the extension
/// (`taillard`, `tsplib` or `cvrplib`).
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_load(
    path: *const c_char,
    format: *const c_char,
    bks_registry: *const c_char,
    out: *mut *mut CoevoInstance,
) -> CoevoStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = Path::new(text(path, "path")?);
        let registry_path = Path::new(text(bks_registry, "bks_registry")?);
        let format: InstanceFormat = if format.is_null() {
            match path.extension().and_then(|e| e.to_str()) {
                Some("tsp") => InstanceFormat::Tsplib,
                Some("vrp") => InstanceFormat::Cvrplib,
                _ => InstanceFormat::Taillard,
            }
        } else {
            text(format, "format")?
                .parse()
                .map_err(|e: coevo_core::problem::ProblemError| (CoevoStatus::InvalidInstance, e.to_string()))?
        };
        let registry = BksRegistry::load(registry_path).map_err(|e| (CoevoStatus::Io, e.to_string()))?;
        let inst = load_instance(path, format, &registry).map_err(|e| (CoevoStatus::InvalidInstance, e.to_string()))?;
        *out = Box::into_raw(Box::new(CoevoInstance { inner: Arc::new(inst) }));
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle from [`coevo_instance_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_free(inst: *mut CoevoInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Length of a valid encoding for the instance.
///
/// # Safety
/// `inst` must be a live handle and `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_encoding_len(inst: *const CoevoInstance, out_len: *mut usize) -> CoevoStatus {
    guard(|| {
        non_null(inst, "instance")?;
        non_null(out_len, "out_len")?;
        *out_len = (*inst).inner.encoding_len();
        Ok(())
    })
}

/// Best-known cost of the instance.
///
/// # Safety
/// `inst` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_bks(inst: *const CoevoInstance, out: *mut f64) -> CoevoStatus {
    guard(|| {
        non_null(inst, "instance")?;
        non_null(out, "out")?;
        *out = (*inst).inner.bks().value;
        Ok(())
    })
}

/// Decodes and evaluates an encoding.
///
/// # Safety
/// `encoding` must point to `len` readable values; `out_cost` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_evaluate(
    inst: *const CoevoInstance,
    encoding: *const u32,
    len: usize,
    out_cost: *mut f64,
) -> CoevoStatus {
    guard(|| {
        non_null(inst, "instance")?;
        non_null(encoding, "encoding")?;
        non_null(out_cost, "out_cost")?;
        let enc = std::slice::from_raw_parts(encoding, len);
        let inst = &(*inst).inner;
        inst.check_encoding(enc)
            .map_err(|e| (CoevoStatus::InvalidEncoding, e.to_string()))?;
        *out_cost = inst.cost(enc);
        Ok(())
    })
}

/// Optimality gap in percent.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_gap(cost: f64, bks: f64, out: *mut f64) -> CoevoStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = optimality_gap(cost, bks).map_err(|e| (CoevoStatus::InvalidInstance, e.to_string()))?;
        Ok(())
    })
}

/// Validates a spec document for `domain` (`jssp`, `tsp` or `cvrp`).
/// Violations are joined with newlines in the error message.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_spec_validate(
    json: *const c_char,
    domain: *const c_char,
    out: *mut *mut CoevoSpec,
) -> CoevoStatus {
    guard(|| {
        non_null(out, "out")?;
        let doc = text(json, "json")?;
        let domain: Domain = text(domain, "domain")?
            .parse()
            .map_err(|e: coevo_core::problem::ProblemError| (CoevoStatus::InvalidSpec, e.to_string()))?;
        let spec = validate_spec(doc, domain).map_err(|v| {
            let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
            (CoevoStatus::InvalidSpec, msg)
        })?;
        *out = Box::into_raw(Box::new(CoevoSpec { inner: spec }));
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle from [`coevo_spec_validate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn coevo_spec_free(spec: *mut CoevoSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Canonical JSON of a validated spec. Free with [`coevo_string_free`].
///
/// # Safety
/// `spec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_spec_to_json(spec: *const CoevoSpec, out: *mut *mut c_char) -> CoevoStatus {
    guard(|| {
        non_null(spec, "spec")?;
        non_null(out, "out")?;
        *out = owned_string((*spec).inner.serialize());
        Ok(())
    })
}

/// Unit-cost tree edit distance between two operator graphs.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_spec_tree_distance(
    a: *const CoevoSpec,
    b: *const CoevoSpec,
    out: *mut usize,
) -> CoevoStatus {
    guard(|| {
        non_null(a, "a")?;
        non_null(b, "b")?;
        non_null(out, "out")?;
        *out = tree_edit_distance(&(*a).inner.graph, &(*b).inner.graph);
        Ok(())
    })
}

/// Runs a TOML configuration and returns the run summary as JSON. Relative
/// paths resolve against `base_dir`, or the working directory when null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out_summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coevo_run(
    config_toml: *const c_char,
    base_dir: *const c_char,
    out_summary: *mut *mut c_char,
) -> CoevoStatus {
    guard(|| {
        non_null(out_summary, "out_summary")?;
        let toml = text(config_toml, "config_toml")?;
        let base = if base_dir.is_null() { "." } else { text(base_dir, "base_dir")? };
        let err = |e: ControlError| (control_status(&e), e.to_string());
        let cfg = RunConfig::from_toml_str(toml, Path::new(base)).map_err(err)?;
        let trace = execute(&cfg).map_err(err)?;
        let summary = summarize(&trace).map_err(err)?;
        *out_summary = owned_string(serde_json::to_string(&summary).expect("summary serializes"));
        Ok(())
    })
}
