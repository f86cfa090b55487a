//! C ABI over `subord`.
//!
//! Every function returns a [`SubordStatus`]; on failure the message is
//! available from [`subord_last_error`] on the same thread. Handles are
//! opaque and owned by the caller, who releases them with the matching
//! `*_free` function. Panics are caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use num_complex::Complex64;
use subord::config::{ExperimentConfig, Task};
use subord::symcalc::Symbol;
use subord::torus::{resolvent_solve, semigroup_evolve, Scheme, TorusGrid, TorusGridFn};
use subord::{experiment, torus, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubordStatus {
    Ok = 0,
    Input = 1,
    Domain = 2,
    NumericalIntegrity = 3,
    Capability = 4,
    Degenerate = 5,
    NearSingular = 6,
    Incompatible = 7,
    NonConvergence = 8,
    SymmetryIntegrity = 9,
    AbortedRun = 10,
    Config = 11,
    Io = 12,
    NullPointer = 13,
    InvalidUtf8 = 14,
    Panic = 15,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubordScheme {
    ImplicitEuler = 0,
    CrankNicolson = 1,
}

/// A constructed symbol `p(x, xi)`.
pub struct SubordSymbol {
    inner: Symbol,
}

/// Complex samples on a periodic grid.
pub struct SubordGridFn {
    inner: TorusGridFn,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SubordStatus {
    match e {
        Error::Input(_) => SubordStatus::Input,
        Error::Domain { .. } => SubordStatus::Domain,
        Error::NumericalIntegrity(_) => SubordStatus::NumericalIntegrity,
        Error::Capability(_) => SubordStatus::Capability,
        Error::Degenerate(_) => SubordStatus::Degenerate,
        Error::NearSingular { .. } => SubordStatus::NearSingular,
        Error::Incompatible(_) => SubordStatus::Incompatible,
        Error::NonConvergence { .. } => SubordStatus::NonConvergence,
        Error::SymmetryIntegrity(_) => SubordStatus::SymmetryIntegrity,
        Error::AbortedRun { .. } => SubordStatus::AbortedRun,
        Error::Config(_) => SubordStatus::Config,
        Error::Io(_) => SubordStatus::Io,
    }
}

/// Failure before reaching the library.
struct Boundary(SubordStatus, String);

impl From<Error> for Boundary {
    fn from(e: Error) -> Self {
        Boundary(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Boundary>) -> SubordStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SubordStatus::Ok
        }
        Ok(Err(Boundary(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            SubordStatus::Panic
        }
    }
}

fn null(what: &str) -> Boundary {
    Boundary(SubordStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Boundary> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Boundary(SubordStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Boundary> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Boundary> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Boundary> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed_fn(u: TorusGridFn) -> *mut SubordGridFn {
    Box::into_raw(Box::new(SubordGridFn { inner: u }))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn subord_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn subord_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build the `[symbol]` of a TOML experiment configuration.
///
/// # Safety
/// `config` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subord_symbol_from_config(config: *const c_char, out: *mut *mut SubordSymbol) -> SubordStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_toml(text(config, "config")?)?;
        let sym = cfg.symbol()?;
        write(out, Box::into_raw(Box::new(SubordSymbol { inner: sym })), "out")
    })
}

/// # Safety
/// `symbol` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn subord_symbol_free(symbol: *mut SubordSymbol) {
    if !symbol.is_null() {
        drop(Box::from_raw(symbol));
    }
}

/// Spatial dimension of the symbol.
///
/// # Safety
/// `symbol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subord_symbol_dim(symbol: *const SubordSymbol, out: *mut usize) -> SubordStatus {
    guard(|| write(out, deref(symbol, "symbol")?.inner.dim(), "out"))
}

/// `p(x, xi)` with `x` and `xi` of length `dim`.
///
/// # Safety
/// `x` and `xi` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subord_symbol_eval(
    symbol: *const SubordSymbol,
    x: *const f64,
    xi: *const f64,
    dim: usize,
    out: *mut f64,
) -> SubordStatus {
    guard(|| {
        let s = &deref(symbol, "symbol")?.inner;
        if dim != s.dim() {
            return Err(Boundary(SubordStatus::Input, format!("dim {dim} differs from symbol dim {}", s.dim())));
        }
        let v = s.eval(slice(x, dim, "x")?, slice(xi, dim, "xi")?)?;
        write(out, v, "out")
    })
}

/// Samples on a `dim`-dimensional grid with `points` per axis and period
/// `period`, in row-major order; `im` may be null for real data.
///
/// # Safety
/// `re` (and `im` if non-null) must point to `points^dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn subord_gridfn_new(
    dim: usize,
    points: usize,
    period: f64,
    re: *const f64,
    im: *const f64,
    out: *mut *mut SubordGridFn,
) -> SubordStatus {
    guard(|| {
        let grid = TorusGrid::new(dim, points, period)?;
        let len = grid.len();
        let re = slice(re, len, "re")?;
        let im = if im.is_null() { None } else { Some(slice(im, len, "im")?) };
        let values = (0..len)
            .map(|i| Complex64::new(re[i], im.map_or(0.0, |v| v[i])))
            .collect();
        write(out, boxed_fn(TorusGridFn::new(grid, values)?), "out")
    })
}

/// # Safety
/// `u` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn subord_gridfn_free(u: *mut SubordGridFn) {
    if !u.is_null() {
        drop(Box::from_raw(u));
    }
}

/// Number of samples.
///
/// # Safety
/// `u` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subord_gridfn_len(u: *const SubordGridFn, out: *mut usize) -> SubordStatus {
    guard(|| write(out, deref(u, "u")?.inner.values.len(), "out"))
}

/// Copy the samples out; `len` must equal the sample count. `im` may be
/// null.
///
/// # Safety
/// `re` (and `im` if non-null) must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn subord_gridfn_values(
    u: *const SubordGridFn,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> SubordStatus {
    guard(|| {
        let v = &deref(u, "u")?.inner.values;
        if len != v.len() {
            return Err(Boundary(SubordStatus::Input, format!("buffer length {len}, need {}", v.len())));
        }
        if re.is_null() {
            return Err(null("re"));
        }
        for (i, c) in v.iter().enumerate() {
            re.add(i).write(c.re);
            if !im.is_null() {
                im.add(i).write(c.im);
            }
        }
        Ok(())
    })
}

/// `p(x, D) u`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subord_apply(
    symbol: *const SubordSymbol,
    u: *const SubordGridFn,
    out: *mut *mut SubordGridFn,
) -> SubordStatus {
    guard(|| {
        let v = torus::apply_pdo(&deref(symbol, "symbol")?.inner, &deref(u, "u")?.inner)?;
        write(out, boxed_fn(v), "out")
    })
}

/// Solve `(p(x, D) + lambda) u = f`; `max_iter = 0` selects the default.
/// `iterations` and `residual` may be null.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subord_resolvent_solve(
    symbol: *const SubordSymbol,
    lambda: f64,
    f: *const SubordGridFn,
    tol: f64,
    max_iter: usize,
    out: *mut *mut SubordGridFn,
    iterations: *mut usize,
    residual: *mut f64,
) -> SubordStatus {
    guard(|| {
        let s = resolvent_solve(&deref(symbol, "symbol")?.inner, lambda, &deref(f, "f")?.inner, tol, max_iter)?;
        if !iterations.is_null() {
            iterations.write(s.iterations);
        }
        if !residual.is_null() {
            residual.write(s.residual);
        }
        write(out, boxed_fn(s.u), "out")
    })
}

/// State after `steps` steps of `u' = -p(x, D) u` from `u0`; `scheme` is
/// a `SubordScheme` value.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subord_evolve(
    symbol: *const SubordSymbol,
    u0: *const SubordGridFn,
    dt: f64,
    steps: usize,
    scheme: i32,
    out: *mut *mut SubordGridFn,
) -> SubordStatus {
    guard(|| {
        let scheme = match scheme {
            x if x == SubordScheme::ImplicitEuler as i32 => Scheme::ImplicitEuler,
            x if x == SubordScheme::CrankNicolson as i32 => Scheme::CrankNicolson,
            other => return Err(Boundary(SubordStatus::Input, format!("unknown scheme {other}"))),
        };
        let run = semigroup_evolve(&deref(symbol, "symbol")?.inner, &deref(u0, "u0")?.inner, dt, steps, scheme, &[])?
            .into_result()?;
        write(out, boxed_fn(run.last().clone()), "out")
    })
}

/// Run `task` (a subcommand name) on a TOML configuration, writing
/// artifacts under `out_dir` (null keeps the configured directory).
/// `pass` receives 1 when every verdict passed, 0 otherwise.
///
/// # Safety
/// Strings must be nul-terminated; `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subord_run_experiment(
    config: *const c_char,
    task: *const c_char,
    out_dir: *const c_char,
    pass: *mut i32,
) -> SubordStatus {
    guard(|| {
        let mut cfg = ExperimentConfig::from_toml(text(config, "config")?)?;
        let name = text(task, "task")?;
        let task = Task::ALL
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| Boundary(SubordStatus::Config, format!("unknown task {name:?}")))?;
        if !out_dir.is_null() {
            cfg.output.dir = PathBuf::from(text(out_dir, "out_dir")?);
        }
        let outcome = experiment::run_experiment(&cfg, task)?;
        write(pass, outcome.pass as i32, "pass")
    })
}
