//! C ABI for the qedlab scheduling laboratory.
//!
//! The surface is handle-based: parse an experiment config into an opaque
//! `QedModel`, solve it, then query values/policies or run queue
//! simulations. Every call returns a [`QedStatus`]; on failure a
//! thread-local message is retrievable via [`qed_last_error_message`] until
//! the next failing call on the same thread. The generated header lands in
//! `include/qedlab.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qedlab::config::{build_policy, parse_policy_descriptor, ExperimentConfig};
use qedlab::error::Error;
use qedlab::hjb::{extract_policy_fn, solve_hjb, ValueGrid};
use qedlab::params::{build_system, diffusion_coeffs, DiffusionCoeffs};
use qedlab::policy::PolicyFn;
use qedlab::queue::replicate;

/// Status codes returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QedStatus {
    QedOk = 0,
    /// A pointer was null or a buffer length did not match the class count.
    QedInvalidArgument = 1,
    /// The config TOML failed to parse or validate.
    QedParseError = 2,
    /// The HJB solve failed.
    QedSolverError = 3,
    /// A simulation failed (invariant breach or policy contract violation).
    QedSimulationError = 4,
    /// The call needs a solved model; call qed_model_solve first.
    QedNotSolved = 5,
    /// A panic was caught at the FFI boundary.
    QedPanic = 6,
}

/// Aggregate result of a batch of queue-simulation replications.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QedSimSummary {
    pub mean_cost: f64,
    pub std_error: f64,
    pub horizon: f64,
    /// Max over classes of the abandonment-identity gap in SE units.
    pub lemma1_gap_max_se: f64,
    pub wc_violations: u64,
    pub np_violations: u64,
    pub event_count: u64,
}

/// Opaque model handle.
pub struct QedModel {
    cfg: ExperimentConfig,
    coeffs: DiffusionCoeffs,
    grid: Option<ValueGrid>,
    markov: Option<PolicyFn>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> QedStatus {
    match err {
        Error::BalanceViolation { .. }
        | Error::NonPositiveRate { .. }
        | Error::NegativeAbandonment { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidCostSpec(_)
        | Error::InvalidGrid(_)
        | Error::InvalidConfig(_)
        | Error::ConfigParse(_) => QedStatus::QedParseError,
        Error::NoConvergence { .. } | Error::SingularLinearSystem { .. } => {
            QedStatus::QedSolverError
        }
        _ => QedStatus::QedSimulationError,
    }
}

fn guarded(f: impl FnOnce() -> QedStatus) -> QedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic at FFI boundary".into());
            set_error(msg);
            QedStatus::QedPanic
        }
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qed_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses and validates an experiment config (TOML text) into a model
/// handle. On success writes the handle to `out`; free with qed_model_free.
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn qed_model_new(
    config_toml: *const c_char,
    out: *mut *mut QedModel,
) -> QedStatus {
    guarded(|| {
        if config_toml.is_null() || out.is_null() {
            set_error("null pointer".into());
            return QedStatus::QedInvalidArgument;
        }
        let text = match unsafe { CStr::from_ptr(config_toml) }.to_str() {
            Ok(t) => t,
            Err(e) => {
                set_error(format!("config is not UTF-8: {e}"));
                return QedStatus::QedInvalidArgument;
            }
        };
        match ExperimentConfig::from_toml(text) {
            Ok(cfg) => {
                let coeffs = diffusion_coeffs(&cfg.limits);
                let model = Box::new(QedModel {
                    cfg,
                    coeffs,
                    grid: None,
                    markov: None,
                });
                unsafe { *out = Box::into_raw(model) };
                QedStatus::QedOk
            }
            Err(e) => {
                let st = status_for(&e);
                set_error(e.to_string());
                st
            }
        }
    })
}

/// Releases a model handle. A null handle is a no-op.
///
/// # Safety
/// `model` must be a handle from qed_model_new that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn qed_model_free(model: *mut QedModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of customer classes k of the model.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qed_model_class_count(model: *const QedModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.cfg.limits.k()
}

/// Solves the configured HJB problem and stores the value grid plus the
/// extracted Markov policy inside the handle.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qed_model_solve(model: *mut QedModel) -> QedStatus {
    guarded(|| {
        if model.is_null() {
            set_error("null model".into());
            return QedStatus::QedInvalidArgument;
        }
        let m = unsafe { &mut *model };
        match solve_hjb(&m.cfg.grid, &m.cfg.cost, &m.coeffs, &m.cfg.limits) {
            Ok(vg) => {
                m.markov = Some(extract_policy_fn(&vg));
                m.grid = Some(vg);
                QedStatus::QedOk
            }
            Err(e) => {
                let st = status_for(&e);
                set_error(e.to_string());
                st
            }
        }
    })
}

fn solved(m: &QedModel) -> Result<&ValueGrid, QedStatus> {
    m.grid.as_ref().ok_or_else(|| {
        set_error("model not solved; call qed_model_solve".into());
        QedStatus::QedNotSolved
    })
}

/// Interpolated value function at `x` (length k); clamped to the grid box.
///
/// # Safety
/// `model` must be a live handle, `x` an array of length `len`, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qed_model_value_at(
    model: *const QedModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> QedStatus {
    guarded(|| {
        if model.is_null() || x.is_null() || out.is_null() {
            set_error("null pointer".into());
            return QedStatus::QedInvalidArgument;
        }
        let m = unsafe { &*model };
        if len != m.cfg.limits.k() {
            set_error(format!("x has length {len}, expected {}", m.cfg.limits.k()));
            return QedStatus::QedInvalidArgument;
        }
        let vg = match solved(m) {
            Ok(v) => v,
            Err(st) => return st,
        };
        let xs = unsafe { std::slice::from_raw_parts(x, len) };
        unsafe { *out = vg.value_at(xs) };
        QedStatus::QedOk
    })
}

/// Interpolated simplex policy at `x`; writes k components into `out_u`.
///
/// # Safety
/// `model` must be a live handle, `x` and `out_u` arrays of length `len`.
#[no_mangle]
pub unsafe extern "C" fn qed_model_policy_at(
    model: *const QedModel,
    x: *const f64,
    len: usize,
    out_u: *mut f64,
) -> QedStatus {
    guarded(|| {
        if model.is_null() || x.is_null() || out_u.is_null() {
            set_error("null pointer".into());
            return QedStatus::QedInvalidArgument;
        }
        let m = unsafe { &*model };
        if len != m.cfg.limits.k() {
            set_error(format!("x has length {len}, expected {}", m.cfg.limits.k()));
            return QedStatus::QedInvalidArgument;
        }
        if m.grid.is_none() {
            set_error("model not solved; call qed_model_solve".into());
            return QedStatus::QedNotSolved;
        }
        let h = m.markov.as_ref().expect("policy extracted with the grid");
        let xs = unsafe { std::slice::from_raw_parts(x, len) };
        let outs = unsafe { std::slice::from_raw_parts_mut(out_u, len) };
        h.eval_into(xs, outs);
        QedStatus::QedOk
    })
}

/// Writes the solved grid as CSV.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qed_model_grid_save_csv(
    model: *const QedModel,
    path: *const c_char,
) -> QedStatus {
    guarded(|| {
        if model.is_null() || path.is_null() {
            set_error("null pointer".into());
            return QedStatus::QedInvalidArgument;
        }
        let m = unsafe { &*model };
        let vg = match solved(m) {
            Ok(v) => v,
            Err(st) => return st,
        };
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(p) => p,
            Err(e) => {
                set_error(format!("path is not UTF-8: {e}"));
                return QedStatus::QedInvalidArgument;
            }
        };
        match vg.save_csv(std::path::Path::new(path)) {
            Ok(()) => QedStatus::QedOk,
            Err(e) => {
                set_error(e.to_string());
                QedStatus::QedSimulationError
            }
        }
    })
}

/// Runs `reps` queue-simulation replications of policy descriptor `policy`
/// (pscp, nscp1, nscp2\[:e\], prio:i,j,..., cmu, cmutheta) at system size `n`
/// from the config's x0, with seeds base_seed, base_seed+1, ... The horizon
/// comes from the config's tail rule. Policies driven by the Markov policy
/// require a solved model.
///
/// # Safety
/// `model` must be a live handle, `policy` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qed_model_simulate(
    model: *mut QedModel,
    n: u64,
    policy: *const c_char,
    reps: usize,
    base_seed: u64,
    out: *mut QedSimSummary,
) -> QedStatus {
    guarded(|| {
        if model.is_null() || policy.is_null() || out.is_null() {
            set_error("null pointer".into());
            return QedStatus::QedInvalidArgument;
        }
        if reps < 2 {
            set_error("reps must be at least 2".into());
            return QedStatus::QedInvalidArgument;
        }
        let m = unsafe { &mut *model };
        let desc_text = match unsafe { CStr::from_ptr(policy) }.to_str() {
            Ok(p) => p,
            Err(e) => {
                set_error(format!("policy is not UTF-8: {e}"));
                return QedStatus::QedInvalidArgument;
            }
        };
        let desc = match parse_policy_descriptor(desc_text, m.cfg.limits.k()) {
            Ok(d) => d,
            Err(e) => {
                set_error(e.to_string());
                return QedStatus::QedInvalidArgument;
            }
        };
        if desc.needs_markov_policy() && m.markov.is_none() {
            set_error("policy needs the Markov policy; call qed_model_solve".into());
            return QedStatus::QedNotSolved;
        }
        let run = || -> Result<QedSimSummary, Error> {
            let sys = build_system(&m.cfg.limits, n)?;
            let sched = build_policy(&desc, m.markov.as_ref(), &m.cfg.cost, &sys)?;
            let horizon = qedlab::cli::derive_horizon(&m.cfg, &sched, n)?;
            let rep = replicate(
                &sys,
                &sched,
                &m.cfg.cost,
                &m.cfg.limits,
                &m.cfg.experiment.x0,
                horizon,
                reps,
                base_seed,
            )?;
            Ok(QedSimSummary {
                mean_cost: rep.mean_cost,
                std_error: rep.std_error,
                horizon,
                lemma1_gap_max_se: rep.lemma1_gap_se.iter().cloned().fold(0.0, f64::max),
                wc_violations: rep.wc_violations,
                np_violations: rep.np_violations,
                event_count: rep.event_count,
            })
        };
        match run() {
            Ok(summary) => {
                unsafe { *out = summary };
                QedStatus::QedOk
            }
            Err(e) => {
                let st = status_for(&e);
                set_error(e.to_string());
                st
            }
        }
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn qed_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}
