//! C interface to `fracflow`.
//!
//! Objects are opaque handles returned through out-pointers by calls such as
//! `fracflow_config_default` or `fracflow_solve` and released with the
//! matching `*_free`. Every fallible
//! call returns a [`FracflowStatus`]; the message for the most recent failure
//! on the calling thread is available from [`fracflow_last_error`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fracflow::config::RunConfig;
use fracflow::fracint::{scalar_integral, Scheme};
use fracflow::paths::{sample_qfbm, SampledPath};
use fracflow::solver::{solve_mild, SolveReport};
use fracflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NonConvergence = 4,
    NoContraction = 5,
    OutOfRange = 6,
    Io = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracflowScheme {
    MomentAssembly = 0,
    Collapsed = 1,
}

pub struct FracflowConfig(RunConfig);

pub struct FracflowPath(SampledPath);

pub struct FracflowSolution(SolveReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> FracflowStatus {
    match err {
        Error::Config(_) => FracflowStatus::Config,
        Error::NonConvergence { .. } => FracflowStatus::NonConvergence,
        Error::NoContraction { .. } => FracflowStatus::NoContraction,
        Error::OutsideWindow { .. } => FracflowStatus::OutOfRange,
        Error::Io(_) | Error::Csv(_) => FracflowStatus::Io,
        _ => FracflowStatus::InvalidArgument,
    }
}

fn fail(status: FracflowStatus, msg: &str) -> FracflowStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), (FracflowStatus, String)>) -> FracflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FracflowStatus::Ok,
        Ok(Err((status, msg))) => fail(status, &msg),
        Err(_) => fail(FracflowStatus::Internal, "panic inside fracflow"),
    }
}

fn lift(err: Error) -> (FracflowStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (FracflowStatus, String) {
    (FracflowStatus::NullPointer, format!("{what} is null"))
}

fn emit<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers check `out` for null before building the value.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message for the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fracflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fracflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default run configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_config_default(out: *mut *mut FracflowConfig) -> FracflowStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit(out, FracflowConfig(RunConfig::default()));
        Ok(())
    })
}

/// Parses and validates a TOML configuration.
///
/// # Safety
/// `text` must be a NUL-terminated UTF-8 string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fracflow_config_from_toml(text: *const c_char, out: *mut *mut FracflowConfig) -> FracflowStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (FracflowStatus::InvalidArgument, e.to_string()))?;
        let cfg = RunConfig::from_toml(text).map_err(lift)?;
        cfg.validate().map_err(lift)?;
        emit(out, FracflowConfig(cfg));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_config_set_seed(cfg: *mut FracflowConfig, seed: u64) -> FracflowStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let mut next = cfg.0.clone();
        next.seed = seed;
        next.validate().map_err(lift)?;
        cfg.0 = next;
        Ok(())
    })
}

/// Sets the number of time steps to `2^k`.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_config_set_grid_pow(cfg: *mut FracflowConfig, k: u32) -> FracflowStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if !(1..=20).contains(&k) {
            return Err((FracflowStatus::Config, format!("grid power must lie in 1..=20, got {k}")));
        }
        cfg.0.grid.n_steps = 1 << k;
        Ok(())
    })
}

/// Sets the number of spectral modes.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_config_set_modes(cfg: *mut FracflowConfig, n_modes: usize) -> FracflowStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let mut next = cfg.0.clone();
        next.grid.n_modes = n_modes;
        next.validate().map_err(lift)?;
        cfg.0 = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracflow_config_free(cfg: *mut FracflowConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Samples the configured Q-fractional Brownian driver from the config's seed.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fracflow_driver_sample(cfg: *const FracflowConfig, out: *mut *mut FracflowPath) -> FracflowStatus {
    guard(|| {
        let cfg = &cfg.as_ref().ok_or_else(|| null("cfg"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = cfg.build_problem().map_err(lift)?;
        let q = sample_qfbm(&spec.operator, cfg.params.hurst, spec.n_steps, spec.dt(), cfg.seed).map_err(lift)?;
        emit(out, FracflowPath(q.path));
        Ok(())
    })
}

/// # Safety
/// `path` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_path_n_steps(path: *const FracflowPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.n_steps())
}

/// # Safety
/// `path` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_path_n_modes(path: *const FracflowPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.n_modes())
}

/// Coefficient `mode` of the path at node `k`.
///
/// # Safety
/// `path` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fracflow_path_value(path: *const FracflowPath, k: usize, mode: usize, out: *mut f64) -> FracflowStatus {
    guard(|| {
        let p = &path.as_ref().ok_or_else(|| null("path"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = node_value(p, k, mode)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracflow_path_free(path: *mut FracflowPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

fn node_value(p: &SampledPath, k: usize, mode: usize) -> Result<f64, (FracflowStatus, String)> {
    if k > p.n_steps() || mode >= p.n_modes() {
        return Err((
            FracflowStatus::OutOfRange,
            format!("node {k}, mode {mode} outside {} steps x {} modes", p.n_steps(), p.n_modes()),
        ));
    }
    Ok(p.value(k)[mode])
}

/// Solves the configured problem against `driver` from the configured initial value.
///
/// # Safety
/// `cfg` and `driver` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fracflow_solve(
    cfg: *const FracflowConfig,
    driver: *const FracflowPath,
    out: *mut *mut FracflowSolution,
) -> FracflowStatus {
    guard(|| {
        let cfg = &cfg.as_ref().ok_or_else(|| null("cfg"))?.0;
        let drv = &driver.as_ref().ok_or_else(|| null("driver"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = cfg.build_problem().map_err(lift)?;
        let rep = solve_mild(&cfg.initial_value(), drv, &spec, &cfg.solver).map_err(lift)?;
        emit(out, FracflowSolution(rep));
        Ok(())
    })
}

/// Number of distinct fixed points found.
///
/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_solution_count(sol: *const FracflowSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.solutions.len())
}

/// Weight `rho` at which the iteration contracted.
///
/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_solution_rho(sol: *const FracflowSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.rho)
}

/// Coefficient `mode` at node `k` of solution `index`.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fracflow_solution_value(
    sol: *const FracflowSolution,
    index: usize,
    k: usize,
    mode: usize,
    out: *mut f64,
) -> FracflowStatus {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("sol"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let u = s.solutions.elements.get(index).ok_or_else(|| {
            (FracflowStatus::OutOfRange, format!("solution {index} of {}", s.solutions.len()))
        })?;
        *out = node_value(u, k, mode)?;
        Ok(())
    })
}

/// Largest fixed-point residual among the returned solutions.
///
/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracflow_solution_max_residual(sol: *const FracflowSolution) -> f64 {
    sol.as_ref()
        .map_or(f64::NAN, |s| s.0.solutions.residuals.iter().copied().fold(0.0, f64::max))
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracflow_solution_free(sol: *mut FracflowSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Scalar pathwise integral of `g` against `w` over all `n_nodes` grid nodes
/// spaced `dt` apart.
///
/// # Safety
/// `g` and `w` must each point to `n_nodes` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fracflow_integrate_scalar(
    g: *const f64,
    w: *const f64,
    n_nodes: usize,
    dt: f64,
    alpha: f64,
    scheme: FracflowScheme,
    out: *mut f64,
) -> FracflowStatus {
    guard(|| {
        if g.is_null() || w.is_null() || out.is_null() {
            return Err(null("g, w or out"));
        }
        if n_nodes < 2 || !(dt > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
            return Err((
                FracflowStatus::InvalidArgument,
                format!("need n_nodes >= 2, dt > 0, alpha in (0, 1); got {n_nodes}, {dt}, {alpha}"),
            ));
        }
        let (g, w) = (std::slice::from_raw_parts(g, n_nodes), std::slice::from_raw_parts(w, n_nodes));
        let scheme = match scheme {
            FracflowScheme::MomentAssembly => Scheme::MomentAssembly,
            FracflowScheme::Collapsed => Scheme::Collapsed,
        };
        *out = scalar_integral(g, w, dt, alpha, scheme);
        Ok(())
    })
}
