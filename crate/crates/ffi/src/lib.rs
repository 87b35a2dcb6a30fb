//! C ABI over the `skewlab` crate.
//!
//! Models are opaque handles built from a TOML experiment document. Every
//! fallible call returns a [`SkewlabStatus`]; on failure the message is
//! available from [`skewlab_last_error`] on the calling thread. Panics never
//! cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use skewlab::attractor::pullback_upper;
use skewlab::base_flow::BasePoint;
use skewlab::bifurcation::homogeneous_oracle;
use skewlab::cocycle::{CocycleTrace, LinearCocycle};
use skewlab::config::Model;
use skewlab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkewlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Invalid configuration, precondition or argument.
    Config = 3,
    /// The computation failed: blow-up, no convergence, scheme violation.
    Numerical = 4,
    BufferTooSmall = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Experiment handle.
pub struct SkewlabModel {
    model: Model,
    hash: CString,
}

/// Recorded `ln c(t, p)` series.
pub struct SkewlabTrace {
    trace: CocycleTrace,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SkewlabExponent {
    pub value: f64,
    pub horizon: f64,
    /// Difference between the full-horizon and half-horizon estimates.
    pub gap: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SkewlabPullback {
    pub b_norm: f64,
    pub min_b: f64,
    pub horizon: f64,
    pub cauchy_gap: f64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SkewlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numerical() { SkewlabStatus::Numerical } else { SkewlabStatus::Config };
        Failure(status, e.to_string())
    }
}

fn fail(status: SkewlabStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SkewlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SkewlabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            SkewlabStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(m: *const SkewlabModel) -> Result<&'a SkewlabModel, Failure> {
    m.as_ref().ok_or_else(|| fail(SkewlabStatus::NullPointer, "model handle is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(SkewlabStatus::NullPointer, format!("{what} is null")))
}

fn point(m: &Model, theta1: f64, theta2: f64) -> BasePoint {
    BasePoint::new([theta1, theta2], m.config.omega())
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn skewlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn skewlab_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"",
    };
    V.as_ptr()
}

/// Parse and validate a TOML experiment document. On success `*out` owns a
/// new handle that must be released with [`skewlab_model_free`].
#[no_mangle]
pub unsafe extern "C" fn skewlab_model_from_toml(toml: *const c_char, out: *mut *mut SkewlabModel) -> SkewlabStatus {
    guard(|| {
        let out = out_ref(out, "output handle")?;
        *out = ptr::null_mut();
        if toml.is_null() {
            return Err(fail(SkewlabStatus::NullPointer, "config text is null"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| fail(SkewlabStatus::InvalidUtf8, format!("config text is not UTF-8: {e}")))?;
        let model = Model::from_toml(text, &[])?;
        let hash = CString::new(model.config.hash.clone()).unwrap_or_default();
        *out = Box::into_raw(Box::new(SkewlabModel { model, hash }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn skewlab_model_free(model: *mut SkewlabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Config hash of the model, valid while the handle lives. Null for a null
/// handle.
#[no_mangle]
pub unsafe extern "C" fn skewlab_model_config_hash(model: *const SkewlabModel) -> *const c_char {
    model.as_ref().map_or(ptr::null(), |m| m.hash.as_ptr())
}

/// Number of grid nodes, `n_cells + 1`.
#[no_mangle]
pub unsafe extern "C" fn skewlab_model_node_count(model: *const SkewlabModel, out: *mut usize) -> SkewlabStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_ref(out, "output")? = m.model.disc.n_nodes();
        Ok(())
    })
}

/// First eigenvalue and, when `e0` is not null, the eigenfield normalized to
/// sup-norm one. `e0` must hold `len >= node count` values.
#[no_mangle]
pub unsafe extern "C" fn skewlab_first_eigenpair(
    model: *const SkewlabModel,
    gamma0: *mut f64,
    e0: *mut f64,
    len: usize,
) -> SkewlabStatus {
    guard(|| {
        let m = model_ref(model)?;
        let ground = &m.model.disc.ground;
        *out_ref(gamma0, "gamma0")? = ground.gamma0;
        if !e0.is_null() {
            let n = ground.e0.len();
            if len < n {
                return Err(fail(SkewlabStatus::BufferTooSmall, format!("e0 needs {n} values, got {len}")));
            }
            std::slice::from_raw_parts_mut(e0, n).copy_from_slice(&ground.e0.values);
        }
        Ok(())
    })
}

/// Upper Lyapunov exponent of `gamma + h` from the base point
/// `(theta1, theta2)` over `horizon`.
#[no_mangle]
pub unsafe extern "C" fn skewlab_lyapunov(
    model: *const SkewlabModel,
    theta1: f64,
    theta2: f64,
    horizon: f64,
    out: *mut SkewlabExponent,
) -> SkewlabStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out, "output")?;
        let mm = &m.model;
        let h = if mm.problem.gamma == 0.0 { mm.problem.h.clone() } else { mm.problem.h.shifted(mm.problem.gamma) };
        let est = LinearCocycle::new(&mm.disc, &h, mm.config.cocycle.clone())?.lyapunov_exponent(&point(mm, theta1, theta2), horizon)?;
        *out = SkewlabExponent { value: est.value, horizon: est.horizon, gap: est.convergence_gap };
        Ok(())
    })
}

/// Record `ln c(t, p)` of `gamma + h` over `horizon`. Release the trace with
/// [`skewlab_trace_free`].
#[no_mangle]
pub unsafe extern "C" fn skewlab_trace_new(
    model: *const SkewlabModel,
    theta1: f64,
    theta2: f64,
    horizon: f64,
    out: *mut *mut SkewlabTrace,
) -> SkewlabStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out, "output handle")?;
        *out = ptr::null_mut();
        let mm = &m.model;
        let h = if mm.problem.gamma == 0.0 { mm.problem.h.clone() } else { mm.problem.h.shifted(mm.problem.gamma) };
        let trace = LinearCocycle::new(&mm.disc, &h, mm.config.cocycle.clone())?.trace(&point(mm, theta1, theta2), horizon)?;
        *out = Box::into_raw(Box::new(SkewlabTrace { trace }));
        Ok(())
    })
}

/// Number of records, zero for a null trace.
#[no_mangle]
pub unsafe extern "C" fn skewlab_trace_len(trace: *const SkewlabTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.log_c.len())
}

/// Record `index`: its time and `ln c`.
#[no_mangle]
pub unsafe extern "C" fn skewlab_trace_get(
    trace: *const SkewlabTrace,
    index: usize,
    t: *mut f64,
    log_c: *mut f64,
) -> SkewlabStatus {
    guard(|| {
        let tr = &trace.as_ref().ok_or_else(|| fail(SkewlabStatus::NullPointer, "trace handle is null"))?.trace;
        if index >= tr.log_c.len() {
            return Err(fail(SkewlabStatus::OutOfRange, format!("index {index} out of range for {} records", tr.log_c.len())));
        }
        *out_ref(t, "t")? = tr.times[index];
        *out_ref(log_c, "log_c")? = tr.log_c[index];
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn skewlab_trace_free(trace: *mut SkewlabTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Upper boundary `b(p)` of the pullback attractor at `(theta1, theta2)`.
/// When `b` is not null it receives `len >= node count` values.
#[no_mangle]
pub unsafe extern "C" fn skewlab_pullback(
    model: *const SkewlabModel,
    theta1: f64,
    theta2: f64,
    b: *mut f64,
    len: usize,
    out: *mut SkewlabPullback,
) -> SkewlabStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out, "output")?;
        let mm = &m.model;
        if !b.is_null() && len < mm.disc.n_nodes() {
            return Err(fail(SkewlabStatus::BufferTooSmall, format!("b needs {} values, got {len}", mm.disc.n_nodes())));
        }
        let pb = pullback_upper(&mm.disc, &point(mm, theta1, theta2), &mm.problem, &mm.config.pullback)?;
        if !b.is_null() {
            std::slice::from_raw_parts_mut(b, pb.b_field.len()).copy_from_slice(&pb.b_field.values);
        }
        *out = SkewlabPullback {
            b_norm: pb.b_norm(),
            min_b: pb.b_field.min(),
            horizon: pb.horizon,
            cauchy_gap: pb.cauchy_gap,
            converged: pb.converged,
        };
        Ok(())
    })
}

/// Positive equilibrium of `y' = gamma y - k (y - r0)^3`; all parameters
/// must be positive.
#[no_mangle]
pub unsafe extern "C" fn skewlab_homogeneous_oracle(gamma: f64, k: f64, r0: f64, out: *mut f64) -> SkewlabStatus {
    guard(|| {
        let out = out_ref(out, "output")?;
        if !(gamma > 0.0 && k > 0.0 && r0 > 0.0 && gamma.is_finite() && k.is_finite() && r0.is_finite()) {
            return Err(fail(SkewlabStatus::Config, format!("gamma, k and r0 must be positive and finite, got {gamma}, {k}, {r0}")));
        }
        *out = homogeneous_oracle(gamma, k, r0);
        Ok(())
    })
}

/// Torus rotation: `out = theta + t omega` modulo one.
#[no_mangle]
pub unsafe extern "C" fn skewlab_advance(theta: *const f64, omega: *const f64, t: f64, out: *mut f64) -> SkewlabStatus {
    guard(|| {
        if theta.is_null() || omega.is_null() || out.is_null() {
            return Err(fail(SkewlabStatus::NullPointer, "theta, omega and out must not be null"));
        }
        let th = std::slice::from_raw_parts(theta, 2);
        let om = std::slice::from_raw_parts(omega, 2);
        let q = BasePoint::new([th[0], th[1]], [om[0], om[1]]).advance(t);
        std::slice::from_raw_parts_mut(out, 2).copy_from_slice(&q.theta);
        Ok(())
    })
}
