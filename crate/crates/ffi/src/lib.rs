//! C ABI for invertkit.
//!
//! Every function returns an [`InvkStatus`]; on failure a message is kept
//! per thread and read with [`invk_last_error`]. Maps are opaque handles
//! released with [`invk_map_free`]; strings handed out by the library are
//! released with [`invk_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use invertkit::criteria::{check_all, CheckConfig};
use invertkit::descent::{solve_with, DescentConfig, SolveOutcome};
use invertkit::gallery::{gallery_json, lookup_map};
use invertkit::linalg::{Matrix, Vector};
use invertkit::mountain_pass::{injectivity_falsifier, FalsifierConfig};
use invertkit::report::to_json;
use invertkit::variational::{banach_constant, TargetFunctional};
use invertkit::{Error, MapUnderTest, Weight};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownMap = 3,
    DimensionMismatch = 4,
    /// The map produced a non-finite value or a singular Jacobian.
    Numerical = 5,
    Precondition = 6,
    Panic = 7,
}

/// Opaque map handle.
pub struct InvkMap {
    inner: MapUnderTest,
}

/// Writes `n` values (the image, or the row-major Jacobian for `n×n`) to
/// `out`; a nonzero return marks the evaluation as failed.
pub type InvkCallback = Option<unsafe extern "C" fn(user_data: *mut c_void, x: *const f64, out: *mut f64) -> c_int>;

struct Failure(InvkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownMap(_) => InvkStatus::UnknownMap,
            Error::Dimension { .. } => InvkStatus::DimensionMismatch,
            Error::Precondition(_) => InvkStatus::Precondition,
            e if e.is_numerical() => InvkStatus::Numerical,
            _ => InvkStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> InvkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            InvkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            InvkStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(InvkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn map_ref<'a>(map: *const InvkMap) -> FfiResult<&'a MapUnderTest> {
    map.as_ref().map(|m| &m.inner).ok_or_else(|| null("map"))
}

unsafe fn vector_in(p: *const f64, len: usize, what: &str) -> FfiResult<Vector> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(Vector::from_column_slice(std::slice::from_raw_parts(p, len)))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> FfiResult<&'a mut [f64]> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> FfiResult<()> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn str_in<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(InvkStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn string_out(s: String, out: *mut *mut c_char) -> FfiResult<()> {
    let c = CString::new(s).map_err(|_| Failure(InvkStatus::InvalidArgument, "output contains NUL".into()))?;
    write_out(out, c.into_raw(), "out_json")
}

unsafe fn starts_in(starts: *const f64, n_starts: usize, dim: usize) -> FfiResult<Vec<Vector>> {
    if n_starts == 0 {
        return Err(Failure(InvkStatus::InvalidArgument, "n_starts must be positive".into()));
    }
    let flat = vector_in(starts, n_starts * dim, "starts")?;
    Ok(flat.as_slice().chunks(dim).map(Vector::from_column_slice).collect())
}

struct Callbacks {
    eval: unsafe extern "C" fn(*mut c_void, *const f64, *mut f64) -> c_int,
    jacobian: unsafe extern "C" fn(*mut c_void, *const f64, *mut f64) -> c_int,
    user_data: *mut c_void,
    dim: usize,
}

// The caller promises in the header contract that the callbacks may run
// concurrently; the checkers evaluate maps from worker threads.
unsafe impl Send for Callbacks {}
unsafe impl Sync for Callbacks {}

impl Callbacks {
    fn call(&self, f: unsafe extern "C" fn(*mut c_void, *const f64, *mut f64) -> c_int, x: &Vector, len: usize) -> Vec<f64> {
        let mut out = vec![f64::NAN; len];
        let rc = unsafe { f(self.user_data, x.as_slice().as_ptr(), out.as_mut_ptr()) };
        if rc != 0 {
            out.fill(f64::NAN);
        }
        out
    }
}

/// Wraps caller-supplied callbacks as a map. `name` may be null. The
/// callbacks must be thread-safe and stay valid until the map is freed;
/// failures they signal surface as `INVK_STATUS_NUMERICAL`.
///
/// # Safety
/// `out_map` must be writable; `name`, if non-null, must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn invk_map_new(
    name: *const c_char,
    dim: usize,
    eval: InvkCallback,
    jacobian: InvkCallback,
    user_data: *mut c_void,
    out_map: *mut *mut InvkMap,
) -> InvkStatus {
    guard(|| {
        let name = if name.is_null() { "callback" } else { str_in(name, "name")? };
        let (Some(eval), Some(jacobian)) = (eval, jacobian) else { return Err(null("callback")) };
        if dim == 0 {
            return Err(Failure(InvkStatus::InvalidArgument, "dim must be positive".into()));
        }
        let cb = Arc::new(Callbacks { eval, jacobian, user_data, dim });
        let cb2 = Arc::clone(&cb);
        let inner = MapUnderTest::new(
            name,
            dim,
            move |x: &Vector| Vector::from_vec(cb.call(cb.eval, x, cb.dim)),
            move |x: &Vector| Matrix::from_row_slice(cb2.dim, cb2.dim, &cb2.call(cb2.jacobian, x, cb2.dim * cb2.dim)),
        );
        write_out(out_map, Box::into_raw(Box::new(InvkMap { inner })), "out_map")
    })
}

/// Looks up a gallery map by spec, e.g. `"complex-exp"` or `"shifted-sine:2,1"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out_map` writable.
#[no_mangle]
pub unsafe extern "C" fn invk_map_from_spec(spec: *const c_char, out_map: *mut *mut InvkMap) -> InvkStatus {
    guard(|| {
        let inner = lookup_map(str_in(spec, "spec")?)?;
        write_out(out_map, Box::into_raw(Box::new(InvkMap { inner })), "out_map")
    })
}

/// # Safety
/// `map` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn invk_map_free(map: *mut InvkMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Dimension of the map, or 0 for a null handle.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn invk_map_dim(map: *const InvkMap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.dim())
}

/// # Safety
/// `x` and `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn invk_map_eval(map: *const InvkMap, x: *const f64, out: *mut f64) -> InvkStatus {
    guard(|| {
        let m = map_ref(map)?;
        let fx = m.try_eval(&vector_in(x, m.dim(), "x")?)?;
        slice_out(out, m.dim(), "out")?.copy_from_slice(fx.as_slice());
        Ok(())
    })
}

/// Jacobian in row-major order.
///
/// # Safety
/// `x` must hold `dim` doubles and `out` `dim·dim`.
#[no_mangle]
pub unsafe extern "C" fn invk_map_jacobian(map: *const InvkMap, x: *const f64, out: *mut f64) -> InvkStatus {
    guard(|| {
        let m = map_ref(map)?;
        let n = m.dim();
        let j = m.try_jacobian(&vector_in(x, n, "x")?)?;
        let out = slice_out(out, n * n, "out")?;
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = j[(r, c)];
            }
        }
        Ok(())
    })
}

/// `F_y(x) = ½|f(x) − y|²`.
///
/// # Safety
/// `x` and `y` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn invk_value(map: *const InvkMap, x: *const f64, y: *const f64, out: *mut f64) -> InvkStatus {
    guard(|| {
        let m = map_ref(map)?;
        let f = TargetFunctional::new(m, vector_in(y, m.dim(), "y")?)?;
        write_out(out, f.value(&vector_in(x, m.dim(), "x")?)?, "out")
    })
}

/// `|df(x)ᵀ(f(x) − y)|`.
///
/// # Safety
/// As [`invk_value`].
#[no_mangle]
pub unsafe extern "C" fn invk_criticality(map: *const InvkMap, x: *const f64, y: *const f64, out: *mut f64) -> InvkStatus {
    guard(|| {
        let m = map_ref(map)?;
        let f = TargetFunctional::new(m, vector_in(y, m.dim(), "y")?)?;
        write_out(out, f.criticality(&vector_in(x, m.dim(), "x")?)?, "out")
    })
}

/// Smallest singular value of the Jacobian at `x`.
///
/// # Safety
/// `x` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn invk_banach_constant(map: *const InvkMap, x: *const f64, out: *mut f64) -> InvkStatus {
    guard(|| {
        let m = map_ref(map)?;
        write_out(out, banach_constant(m, &vector_in(x, m.dim(), "x")?)?, "out")
    })
}

/// Solves `f(x) = y` with the zero weight, trying `n_starts` starts stored
/// back to back. On success `out_solution` receives the solution and
/// `*out_solved` is 1; otherwise `*out_solved` is 0 and `out_solution` is untouched.
///
/// # Safety
/// `y` and `out_solution` hold `dim` doubles, `starts` holds `n_starts·dim`.
#[no_mangle]
pub unsafe extern "C" fn invk_solve(
    map: *const InvkMap,
    y: *const f64,
    starts: *const f64,
    n_starts: usize,
    residual_tol: f64,
    out_solution: *mut f64,
    out_solved: *mut c_int,
) -> InvkStatus {
    guard(|| {
        let m = map_ref(map)?;
        let n = m.dim();
        let y = vector_in(y, n, "y")?;
        let starts = starts_in(starts, n_starts, n)?;
        let mut template = DescentConfig::new(&[]);
        template.residual_tol = residual_tol;
        template.validate()?;
        let outcome = solve_with(m, &y, &Weight::zero(), &starts, &template)?;
        let solved = matches!(outcome, SolveOutcome::Solved { .. });
        if let Some(x) = outcome.solution() {
            slice_out(out_solution, n, "out_solution")?.copy_from_slice(x.as_slice());
        }
        write_out(out_solved, c_int::from(solved), "out_solved")
    })
}

/// Runs the criteria chain and returns the report as JSON. `y` may be null
/// for the origin. Free the string with [`invk_string_free`].
///
/// # Safety
/// `y`, if non-null, holds `dim` doubles; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn invk_check_json(
    map: *const InvkMap,
    radius: f64,
    samples: usize,
    seed: u64,
    y: *const f64,
    out_json: *mut *mut c_char,
) -> InvkStatus {
    guard(|| {
        let m = map_ref(map)?;
        let mut cfg = CheckConfig::new(radius, samples, seed);
        if !y.is_null() {
            cfg.target = Some(vector_in(y, m.dim(), "y")?.as_slice().to_vec());
        }
        string_out(to_json(&check_all(m, &cfg)?)?, out_json)
    })
}

/// Looks for two preimages of `y` from the given starts and, when found,
/// runs the mountain-pass band between them; returns the verdict as JSON.
///
/// # Safety
/// As [`invk_solve`]; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn invk_mpass_json(
    map: *const InvkMap,
    y: *const f64,
    starts: *const f64,
    n_starts: usize,
    out_json: *mut *mut c_char,
) -> InvkStatus {
    guard(|| {
        let m = map_ref(map)?;
        let n = m.dim();
        let y = vector_in(y, n, "y")?;
        let starts = starts_in(starts, n_starts, n)?;
        let verdict = injectivity_falsifier(m, &y, &starts, &Weight::zero(), &FalsifierConfig::new(n))?;
        string_out(to_json(&verdict)?, out_json)
    })
}

/// The gallery listing with ground truth, as JSON.
///
/// # Safety
/// `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn invk_gallery_json(out_json: *mut *mut c_char) -> InvkStatus {
    guard(|| string_out(gallery_json()?, out_json))
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn invk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn invk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
