//! C ABI for the photonbec simulator.
//!
//! Conventions:
//! - Opaque handles (`PbecConfig`, `PbecSteady`) are created and destroyed by
//!   this library; callers must free them with the matching `_free` function.
//! - Every fallible call returns a [`PbecStatus`]; on any non-OK status,
//!   `pbec_last_error()` returns a thread-local, NUL-terminated message valid
//!   until the next FFI call on the same thread.
//! - Output parameters are written only on `PBEC_STATUS_OK`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use photonbec::cli::{build_model, parse_config, SweepConfig};
use photonbec::coherence::coherence_analysis;
use photonbec::dynamics::{clamp_diagnostics, solve_steady, ModelParams, SteadyState};
use photonbec::Error;

/// Call status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbecStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8, or out-of-range argument.
    InvalidArgument = 1,
    /// Config file unreadable or invalid.
    Config = 2,
    /// Steady-state solver did not converge.
    NonConverged = 3,
    /// Other numerical failure.
    Numerical = 4,
    /// I/O failure.
    Io = 5,
}

/// Opaque simulation configuration.
pub struct PbecConfig {
    inner: SweepConfig,
}

/// Opaque solved steady state with its coherence summary.
pub struct PbecSteady {
    params: ModelParams,
    state: SteadyState,
    tau0: f64,
    tau0_closed: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new("").unwrap());
}

fn status_of(err: &Error) -> PbecStatus {
    match err {
        Error::Config(_) | Error::RateTable(_) => PbecStatus::Config,
        Error::NonConverged { .. } => PbecStatus::NonConverged,
        Error::Io(_) => PbecStatus::Io,
        Error::InvalidParameter(_) | Error::GridMismatch(_) | Error::OutOfRange(_) => {
            PbecStatus::InvalidArgument
        }
        Error::Numerical(_) => PbecStatus::Numerical,
    }
}

/// Returns the last error message for this thread (empty string when the last
/// call succeeded). The pointer stays valid until the next FFI call on the
/// same thread; do not free it.
#[no_mangle]
pub extern "C" fn pbec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a configuration with the built-in defaults. Never fails.
/// Free with `pbec_config_free`.
#[no_mangle]
pub extern "C" fn pbec_config_default() -> *mut PbecConfig {
    clear_error();
    Box::into_raw(Box::new(PbecConfig { inner: SweepConfig::default() }))
}

/// Loads a configuration from a TOML file. On success writes the new handle
/// to `out`. Free with `pbec_config_free`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn pbec_config_from_file(
    path: *const c_char,
    out: *mut *mut PbecConfig,
) -> PbecStatus {
    clear_error();
    if path.is_null() || out.is_null() {
        set_error("null pointer argument");
        return PbecStatus::InvalidArgument;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("path is not valid UTF-8");
            return PbecStatus::InvalidArgument;
        }
    };
    match parse_config(Path::new(path)) {
        Ok(cfg) => {
            *out = Box::into_raw(Box::new(PbecConfig { inner: cfg }));
            PbecStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Number of cavity modes in the configuration.
///
/// # Safety
/// `cfg` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn pbec_config_n_modes(cfg: *const PbecConfig) -> usize {
    if cfg.is_null() {
        return 0;
    }
    (*cfg).inner.n_modes
}

/// Frees a configuration handle (null is a no-op).
///
/// # Safety
/// `cfg` must be null or a live handle from this library; it is invalid after
/// this call.
#[no_mangle]
pub unsafe extern "C" fn pbec_config_free(cfg: *mut PbecConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Solves the steady state at `pump_over_gdown` (pump rate in units of the
/// molecular decay rate) and runs the coherence analysis. On success writes
/// the new handle to `out`. Free with `pbec_steady_free`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbec_solve(
    cfg: *const PbecConfig,
    pump_over_gdown: f64,
    out: *mut *mut PbecSteady,
) -> PbecStatus {
    clear_error();
    if cfg.is_null() || out.is_null() {
        set_error("null pointer argument");
        return PbecStatus::InvalidArgument;
    }
    if !pump_over_gdown.is_finite() || pump_over_gdown < 0.0 {
        set_error("pump_over_gdown must be finite and non-negative");
        return PbecStatus::InvalidArgument;
    }
    let cfg = &(*cfg).inner;
    let run = || -> photonbec::Result<PbecSteady> {
        let params = build_model(cfg, pump_over_gdown)?;
        let state = solve_steady(&params, None, cfg.tol, cfg.max_iterations)?;
        let coh =
            coherence_analysis(&params, &state, cfg.coherence_t_max_factor, cfg.coherence_samples)?;
        Ok(PbecSteady { params, state, tau0: coh.tau[0], tau0_closed: coh.tau_closed[0] })
    };
    match run() {
        Ok(s) => {
            *out = Box::into_raw(Box::new(s));
            PbecStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

unsafe fn write_out(out: *mut f64, v: f64) -> PbecStatus {
    if out.is_null() {
        set_error("null output pointer");
        return PbecStatus::InvalidArgument;
    }
    *out = v;
    PbecStatus::Ok
}

/// Steady-state population n_pp of `mode`.
///
/// # Safety
/// `ss` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbec_steady_population(
    ss: *const PbecSteady,
    mode: usize,
    out: *mut f64,
) -> PbecStatus {
    clear_error();
    if ss.is_null() {
        set_error("null steady-state handle");
        return PbecStatus::InvalidArgument;
    }
    let s = &*ss;
    let m = s.params.basis.n_modes;
    if mode >= m {
        set_error(&format!("mode {mode} out of range (n_modes = {m})"));
        return PbecStatus::InvalidArgument;
    }
    write_out(out, s.state.n_matrix[(mode, mode)])
}

/// Equal-time intermode correlation n_pq.
///
/// # Safety
/// `ss` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbec_steady_correlation(
    ss: *const PbecSteady,
    p: usize,
    q: usize,
    out: *mut f64,
) -> PbecStatus {
    clear_error();
    if ss.is_null() {
        set_error("null steady-state handle");
        return PbecStatus::InvalidArgument;
    }
    let s = &*ss;
    let m = s.params.basis.n_modes;
    if p >= m || q >= m {
        set_error(&format!("mode pair ({p}, {q}) out of range (n_modes = {m})"));
        return PbecStatus::InvalidArgument;
    }
    write_out(out, s.state.n_matrix[(p, q)])
}

/// Ground-mode coherence time from the propagated trace (ps; +inf when
/// divergent).
///
/// # Safety
/// `ss` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbec_steady_tau0(ss: *const PbecSteady, out: *mut f64) -> PbecStatus {
    clear_error();
    if ss.is_null() {
        set_error("null steady-state handle");
        return PbecStatus::InvalidArgument;
    }
    write_out(out, (*ss).tau0)
}

/// Ground-mode closed-form coherence time (ps; +inf when divergent).
///
/// # Safety
/// `ss` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbec_steady_tau0_closed(
    ss: *const PbecSteady,
    out: *mut f64,
) -> PbecStatus {
    clear_error();
    if ss.is_null() {
        set_error("null steady-state handle");
        return PbecStatus::InvalidArgument;
    }
    write_out(out, (*ss).tau0_closed)
}

/// Gain-clamping ratio (A₀+E₀)f₀₀ / (κ + A₀h₀₀).
///
/// # Safety
/// `ss` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbec_steady_clamp_ratio(
    ss: *const PbecSteady,
    out: *mut f64,
) -> PbecStatus {
    clear_error();
    if ss.is_null() {
        set_error("null steady-state handle");
        return PbecStatus::InvalidArgument;
    }
    let s = &*ss;
    write_out(out, clamp_diagnostics(&s.state, &s.params).clamp_ratio)
}

/// Frees a steady-state handle (null is a no-op).
///
/// # Safety
/// `ss` must be null or a live handle from this library; it is invalid after
/// this call.
#[no_mangle]
pub unsafe extern "C" fn pbec_steady_free(ss: *mut PbecSteady) {
    if !ss.is_null() {
        drop(Box::from_raw(ss));
    }
}
