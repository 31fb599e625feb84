//! C interface to `treeshift`.
//!
//! Shifts are opaque [`TsShift`] handles. Vectors cross the boundary as interleaved
//! `(re, im)` pairs of `double`, so a vector on `V` vertices occupies `2 V` values in
//! breadth-first vertex order. Every fallible call returns a [`TsStatus`]; the message of
//! the last failure on the calling thread is available from [`ts_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use treeshift::model::analytic_coeffs;
use treeshift::shift::{SeparatedBasis, ShiftOperator};
use treeshift::suites::{run, RunConfig};
use treeshift::tree::{ExampleName, TreeSpec};
use treeshift::vector::{L2Vector, C64};
use treeshift::Error;

/// A weighted shift on a truncated tree together with its kernel basis.
pub struct TsShift {
    shift: ShiftOperator,
    basis: SeparatedBasis,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    LengthMismatch = 3,
    MalformedSpec = 4,
    BadParams = 5,
    SupportOverflow = 6,
    NotLeftInvertible = 7,
    Config = 8,
    /// The suite run completed but some checks failed; the report is still returned.
    ChecksFailed = 9,
    Other = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: TsStatus, msg: impl Into<String>) -> TsStatus {
    set_error(msg);
    status
}

fn from_error(err: Error) -> TsStatus {
    let status = match &err {
        Error::MalformedSpec(_) | Error::NonpositiveWeight { .. } | Error::Json(_) => TsStatus::MalformedSpec,
        Error::UnknownExample(_) | Error::BadParams(_) | Error::DepthTooLargeForMemory { .. } => TsStatus::BadParams,
        Error::SupportOverflow { .. } => TsStatus::SupportOverflow,
        Error::NotLeftInvertible { .. } => TsStatus::NotLeftInvertible,
        Error::Config(_) => TsStatus::Config,
        _ => TsStatus::Other,
    };
    fail(status, err.to_string())
}

/// Runs `body`, turning panics into [`TsStatus::Panic`].
fn guard(body: impl FnOnce() -> Result<(), TsStatus>) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(TsStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, TsStatus> {
    if p.is_null() {
        return Err(fail(TsStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TsStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn handle<'a>(p: *const TsShift) -> Result<&'a TsShift, TsStatus> {
    p.as_ref().ok_or_else(|| fail(TsStatus::NullPointer, "null shift handle"))
}

unsafe fn read_vector(data: *const f64, len: usize, vertices: usize) -> Result<L2Vector, TsStatus> {
    if data.is_null() {
        return Err(fail(TsStatus::NullPointer, "null input vector"));
    }
    if len != 2 * vertices {
        return Err(fail(
            TsStatus::LengthMismatch,
            format!("expected {} doubles, got {len}", 2 * vertices),
        ));
    }
    let raw = std::slice::from_raw_parts(data, len);
    Ok(L2Vector::from_vec(raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()))
}

unsafe fn write_values(values: &[C64], out: *mut f64, out_len: usize) -> Result<(), TsStatus> {
    if out.is_null() {
        return Err(fail(TsStatus::NullPointer, "null output buffer"));
    }
    if out_len != 2 * values.len() {
        return Err(fail(
            TsStatus::LengthMismatch,
            format!("output needs {} doubles, got {out_len}", 2 * values.len()),
        ));
    }
    let dst = std::slice::from_raw_parts_mut(out, out_len);
    for (pair, v) in dst.chunks_exact_mut(2).zip(values) {
        pair[0] = v.re;
        pair[1] = v.im;
    }
    Ok(())
}

unsafe fn store_shift(shift: ShiftOperator, out: *mut *mut TsShift) -> Result<(), TsStatus> {
    let basis = SeparatedBasis::new(&shift);
    *out = Box::into_raw(Box::new(TsShift { shift, basis }));
    Ok(())
}

/// Builds a named example (`T2`, `T4`, `UNILATERAL`, `RAYS`) truncated at `depth`.
/// `params` may be null when `n_params` is 0. Free the handle with [`ts_shift_free`].
///
/// # Safety
/// `name` must be a NUL-terminated string, `params` must point to `n_params` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_shift_from_example(
    name: *const c_char,
    depth: usize,
    params: *const f64,
    n_params: usize,
    out: *mut *mut TsShift,
) -> TsStatus {
    guard(|| {
        if out.is_null() || (params.is_null() && n_params > 0) {
            return Err(fail(TsStatus::NullPointer, "null argument"));
        }
        let example: ExampleName = str_arg(name)?.parse().map_err(from_error)?;
        let p = if n_params == 0 { &[][..] } else { std::slice::from_raw_parts(params, n_params) };
        store_shift(ShiftOperator::from_example(example, depth, p).map_err(from_error)?, out)
    })
}

/// Builds a shift from a JSON tree spec (`depth`, `root`, `edges` of `from`/`to`/`weight`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_shift_from_spec_json(json: *const c_char, out: *mut *mut TsShift) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(TsStatus::NullPointer, "null output handle"));
        }
        let spec = TreeSpec::from_json(str_arg(json)?).map_err(from_error)?;
        store_shift(ShiftOperator::from_spec(&spec).map_err(from_error)?, out)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `shift` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ts_shift_free(shift: *mut TsShift) {
    if !shift.is_null() {
        drop(Box::from_raw(shift));
    }
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `shift` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_shift_vertex_count(shift: *const TsShift) -> usize {
    shift.as_ref().map_or(0, |h| h.shift.len())
}

/// Truncation depth, or 0 for a null handle.
///
/// # Safety
/// `shift` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_shift_depth(shift: *const TsShift) -> usize {
    shift.as_ref().map_or(0, |h| h.shift.depth())
}

/// Dimension of the kernel basis, or 0 for a null handle.
///
/// # Safety
/// `shift` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_shift_kernel_dim(shift: *const TsShift) -> usize {
    shift.as_ref().map_or(0, |h| h.basis.dim())
}

unsafe fn vector_op(
    shift: *const TsShift,
    input: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
    op: impl FnOnce(&TsShift, &L2Vector) -> Result<L2Vector, Error>,
) -> TsStatus {
    guard(|| {
        let h = handle(shift)?;
        let f = read_vector(input, len, h.shift.len())?;
        let g = op(h, &f).map_err(from_error)?;
        write_values(g.as_slice(), out, out_len)
    })
}

/// `out = S input`; fails with `SUPPORT_OVERFLOW` if `input` reaches the last generation.
///
/// # Safety
/// `input` and `out` must point to `len` and `out_len` doubles; both lengths are `2 V`.
#[no_mangle]
pub unsafe extern "C" fn ts_shift_apply(
    shift: *const TsShift,
    input: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> TsStatus {
    vector_op(shift, input, len, out, out_len, |h, f| h.shift.apply_shift(f))
}

/// `out = S* input`.
///
/// # Safety
/// As for [`ts_shift_apply`].
#[no_mangle]
pub unsafe extern "C" fn ts_shift_apply_adjoint(
    shift: *const TsShift,
    input: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> TsStatus {
    vector_op(shift, input, len, out, out_len, |h, f| Ok(h.shift.apply_adjoint(f)))
}

/// `out = L input` with `L = (S*S)^-1 S*`.
///
/// # Safety
/// As for [`ts_shift_apply`].
#[no_mangle]
pub unsafe extern "C" fn ts_shift_left_inverse(
    shift: *const TsShift,
    input: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> TsStatus {
    vector_op(shift, input, len, out, out_len, |h, f| h.shift.apply_left_inverse(f))
}

/// `out` = orthogonal projection of `input` onto the kernel of `S*`.
///
/// # Safety
/// As for [`ts_shift_apply`].
#[no_mangle]
pub unsafe extern "C" fn ts_shift_project_kernel(
    shift: *const TsShift,
    input: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> TsStatus {
    vector_op(shift, input, len, out, out_len, |h, f| Ok(h.basis.project(f)))
}

/// Model coefficients `P_E L^n input` for `n = 0..=n_max`, written row by row in kernel-basis
/// coordinates: `out_len` must be `2 (n_max + 1) dim`.
///
/// # Safety
/// As for [`ts_shift_apply`].
#[no_mangle]
pub unsafe extern "C" fn ts_analytic_coeffs(
    shift: *const TsShift,
    input: *const f64,
    len: usize,
    n_max: usize,
    out: *mut f64,
    out_len: usize,
) -> TsStatus {
    guard(|| {
        let h = handle(shift)?;
        let f = read_vector(input, len, h.shift.len())?;
        let c = analytic_coeffs(&h.shift, &h.basis, &f, n_max).map_err(from_error)?;
        let flat: Vec<C64> = c.coeffs.into_iter().flatten().collect();
        write_values(&flat, out, out_len)
    })
}

/// Runs verification suites from a JSON run configuration and stores the JSON Lines report in
/// `*report` (free it with [`ts_string_free`]). Returns `CHECKS_FAILED` when the report
/// contains failures.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_run_suite(config_json: *const c_char, report: *mut *mut c_char) -> TsStatus {
    guard(|| {
        if report.is_null() {
            return Err(fail(TsStatus::NullPointer, "null report pointer"));
        }
        *report = ptr::null_mut();
        let config: RunConfig = serde_json::from_str(str_arg(config_json)?)
            .map_err(|e| fail(TsStatus::Config, format!("bad run configuration: {e}")))?;
        let result = run(&config).map_err(from_error)?;
        let text = result.to_jsonl().map_err(from_error)?;
        *report = CString::new(text).map_err(|_| fail(TsStatus::Other, "report contains NUL"))?.into_raw();
        if result.succeeded() {
            Ok(())
        } else {
            Err(fail(TsStatus::ChecksFailed, "some checks failed"))
        }
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. Valid until the next failing call
/// on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
