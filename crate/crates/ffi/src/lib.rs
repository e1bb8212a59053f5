//! C ABI for `smc-tune`.
//!
//! Every fallible function returns an [`SmcStatus`]; on failure the message
//! is available from [`smc_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use smc_tune::adapt::AdaptConfig;
use smc_tune::experiment::{run_experiment, ExperimentSpec};
use smc_tune::kernels::{Backward, KernelFamily, KernelSpec, StepParams};
use smc_tune::model::{
    make_schedule, AnnealedPath, Funnel, LogisticRegression, ScheduleKind, ShiftedGaussian, TargetModel,
};
use smc_tune::optim1d::{find_feasible, minimize, Objective, SearchParams};
use smc_tune::smc::{smc_run as run_smc, Policy, RunConfig, RunResult};
use smc_tune::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSchedule = 3,
    NoFeasiblePoint = 4,
    BracketNotFound = 5,
    Collapse = 6,
    Io = 7,
    Parse = 8,
    AllReplicationsFailed = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmcKernel {
    Lmc = 0,
    Klmc = 1,
    Mala = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmcBackward {
    TimeCorrectForward = 0,
    Forward = 1,
    DetailedBalance = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmcSchedule {
    Linear = 0,
    Quadratic = 1,
}

/// Settings for [`smc_run`]. Start from [`smc_run_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SmcRunOptions {
    pub kernel: SmcKernel,
    /// Ignored for KLMC; MALA requires `DETAILED_BALANCE`.
    pub backward: SmcBackward,
    pub schedule: SmcSchedule,
    pub steps: usize,
    pub particles: usize,
    pub seed: u64,
    /// Nonzero tunes the kernel at every step; zero uses `h` and `rho`.
    pub adaptive: i32,
    pub h: f64,
    pub rho: f64,
    pub resample_threshold: f64,
}

/// Opaque target density.
pub struct SmcTarget {
    inner: Arc<dyn TargetModel>,
}

/// Opaque result of one run.
pub struct SmcResult {
    inner: RunResult,
}

/// Objective callback for [`smc_minimize`]: returns `f(x)`; NaN and `+inf`
/// mark infeasible points.
pub type SmcObjectiveFn = Option<extern "C" fn(x: f64, user_data: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SmcStatus {
    match err {
        Error::NoFeasiblePoint { .. } => SmcStatus::NoFeasiblePoint,
        Error::BracketNotFound { .. } => SmcStatus::BracketNotFound,
        Error::InvalidSchedule(_) => SmcStatus::InvalidSchedule,
        Error::Collapse { .. } => SmcStatus::Collapse,
        Error::Io(_) => SmcStatus::Io,
        Error::Csv(e) if e.is_io_error() => SmcStatus::Io,
        Error::Csv(_) | Error::Json(_) => SmcStatus::Parse,
        Error::AllReplicationsFailed(_) => SmcStatus::AllReplicationsFailed,
        Error::InvalidTriplet(_)
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::UnknownPreset(_)
        | Error::Config(_) => SmcStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), (SmcStatus, String)>) -> SmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SmcStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            SmcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SmcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SmcStatus, String) {
    (SmcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (SmcStatus, String) {
    (SmcStatus::InvalidArgument, msg.into())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn smc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn smc_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn smc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn write_target(out: *mut *mut SmcTarget, target: Arc<dyn TargetModel>) {
    *out = Box::into_raw(Box::new(SmcTarget { inner: target }));
}

/// `N(mean·1_dim, I)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn smc_target_gaussian(dim: usize, mean: f64, out: *mut *mut SmcTarget) -> SmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 || !mean.is_finite() {
            return Err(invalid("dim must be positive and mean finite"));
        }
        write_target(out, Arc::new(ShiftedGaussian::new(dim, mean)));
        Ok(())
    })
}

/// Neal's funnel in `dim ≥ 2` dimensions.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn smc_target_funnel(dim: usize, out: *mut *mut SmcTarget) -> SmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if dim < 2 {
            return Err(invalid("funnel needs dim >= 2"));
        }
        write_target(out, Arc::new(Funnel::new(dim)));
        Ok(())
    })
}

/// Logistic regression on a CSV file whose last column holds the labels.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smc_target_logistic_csv(path: *const c_char, out: *mut *mut SmcTarget) -> SmcStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| invalid(e.to_string()))?;
        let model = LogisticRegression::from_csv(path).map_err(lib_err)?;
        write_target(out, Arc::new(model));
        Ok(())
    })
}

/// Logistic regression on a synthetic dataset; `dim = features + 1`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn smc_target_logistic_synthetic(
    rows: usize,
    features: usize,
    seed: u64,
    out: *mut *mut SmcTarget,
) -> SmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if rows == 0 || features == 0 {
            return Err(invalid("rows and features must be positive"));
        }
        let model = LogisticRegression::synthetic(rows, features, seed).map_err(lib_err)?;
        write_target(out, Arc::new(model));
        Ok(())
    })
}

/// Dimension of a target; 0 for a null handle.
///
/// # Safety
/// `target` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smc_target_dim(target: *const SmcTarget) -> usize {
    target.as_ref().map_or(0, |t| t.inner.dim())
}

/// Unnormalized log density of the target at `x[0..len]`.
///
/// # Safety
/// `target` must be a live handle, `x` must point to `len` doubles and `out`
/// to one writable double.
#[no_mangle]
pub unsafe extern "C" fn smc_target_log_density(
    target: *const SmcTarget,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> SmcStatus {
    guard(|| {
        let t = target.as_ref().ok_or_else(|| null("target"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if len != t.inner.dim() {
            return Err(lib_err(Error::DimensionMismatch {
                expected: t.inner.dim(),
                got: len,
            }));
        }
        *out = t.inner.log_density(std::slice::from_raw_parts(x, len));
        Ok(())
    })
}

/// # Safety
/// `target` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn smc_target_free(target: *mut SmcTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// Adaptive LMC with the time-correct forward potential, quadratic schedule,
/// 64 steps, 1024 particles.
#[no_mangle]
pub extern "C" fn smc_run_options_default() -> SmcRunOptions {
    SmcRunOptions {
        kernel: SmcKernel::Lmc,
        backward: SmcBackward::TimeCorrectForward,
        schedule: SmcSchedule::Quadratic,
        steps: 64,
        particles: 1024,
        seed: 0,
        adaptive: 1,
        h: 0.1,
        rho: 0.5,
        resample_threshold: 0.5,
    }
}

fn kernel_spec(o: &SmcRunOptions) -> KernelSpec {
    match o.kernel {
        SmcKernel::Klmc => KernelSpec::klmc(),
        SmcKernel::Mala => KernelSpec::mala(),
        SmcKernel::Lmc => KernelSpec::lmc(match o.backward {
            SmcBackward::TimeCorrectForward => Backward::TimeCorrectForward,
            SmcBackward::Forward => Backward::Forward,
            SmcBackward::DetailedBalance => Backward::DetailedBalance,
        }),
    }
}

fn run_with(target: &SmcTarget, o: &SmcRunOptions) -> Result<RunResult, Error> {
    let kind = match o.schedule {
        SmcSchedule::Linear => ScheduleKind::Linear,
        SmcSchedule::Quadratic => ScheduleKind::Quadratic,
    };
    let schedule = make_schedule(kind, o.steps, None)?;
    let spec = kernel_spec(o);
    if o.kernel == SmcKernel::Mala && o.backward != SmcBackward::DetailedBalance {
        return Err(Error::Config("MALA is weighted with the detailed-balance potential only".into()));
    }
    let cfg = RunConfig {
        particles: o.particles,
        resample_threshold: o.resample_threshold,
        seed: o.seed,
        ..Default::default()
    };
    let policy = if o.adaptive != 0 {
        let mut adapt = AdaptConfig::for_family(spec.family);
        adapt.subsample = adapt.subsample.min(o.particles);
        Policy::Adaptive(adapt)
    } else {
        let params = match spec.family {
            KernelFamily::Klmc => StepParams::klmc(o.h, o.rho),
            _ => StepParams::lmc(o.h),
        };
        Policy::constant(params, o.steps)
    };
    let path = AnnealedPath::new(target.inner.clone(), schedule);
    run_smc(&path, spec, &policy, &cfg)
}

/// Runs SMC on `target`; writes a result handle to `out`.
///
/// # Safety
/// `target` must be a live handle, `options` null (defaults) or valid, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smc_run(
    target: *const SmcTarget,
    options: *const SmcRunOptions,
    out: *mut *mut SmcResult,
) -> SmcStatus {
    guard(|| {
        let t = target.as_ref().ok_or_else(|| null("target"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = options.as_ref().copied().unwrap_or_else(|| smc_run_options_default());
        let res = run_with(t, &o).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SmcResult { inner: res }));
        Ok(())
    })
}

/// `log Ẑ`; NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smc_result_log_z(result: *const SmcResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.log_z_hat)
}

/// Number of SMC steps `T`.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smc_result_steps(result: *const SmcResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.steps.len())
}

/// Total objective evaluations spent on tuning.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn smc_result_evaluations(result: *const SmcResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.total_evaluations())
}

/// Step size and refreshment rate used at step `t` (1-based). `rho` is set
/// to NaN for kernels without momentum; either output may be null.
///
/// # Safety
/// `result` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn smc_result_step(result: *const SmcResult, t: usize, h: *mut f64, rho: *mut f64) -> SmcStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let step = t
            .checked_sub(1)
            .and_then(|i| r.inner.steps.get(i))
            .ok_or_else(|| invalid(format!("step {t} outside 1..={}", r.inner.steps.len())))?;
        if !h.is_null() {
            *h = step.h;
        }
        if !rho.is_null() {
            *rho = step.rho.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

fn into_c_string(s: String, out: *mut *mut c_char) -> Result<(), (SmcStatus, String)> {
    let c = CString::new(s).map_err(|e| invalid(e.to_string()))?;
    // SAFETY: caller checked `out` for null.
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Per-step diagnostics as a JSON string; free it with [`smc_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smc_result_to_json(result: *const SmcResult, out: *mut *mut c_char) -> SmcStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string(&r.inner).map_err(|e| lib_err(e.into()))?;
        into_c_string(text, out)
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn smc_result_free(result: *mut SmcResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Runs a replicated experiment described by a flat JSON config and writes
/// its summary and diagnostics as JSON to `out`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smc_experiment_run_json(config_json: *const c_char, out: *mut *mut c_char) -> SmcStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(config_json).to_str().map_err(|e| invalid(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| lib_err(e.into()))?;
        let spec = ExperimentSpec::from_value(value).map_err(lib_err)?;
        let output = run_experiment(&spec).map_err(lib_err)?;
        let json = serde_json::to_string(&output).map_err(|e| lib_err(e.into()))?;
        into_c_string(json, out)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn smc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Minimizes a one-dimensional objective from `x0` by feasibility back-off,
/// bracketing and golden-section search. Writes the minimizer and the number
/// of distinct objective evaluations.
///
/// # Safety
/// `f` must be safe to call with `user_data`; `x_out` must be writable and
/// `evaluations_out` null or writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn smc_minimize(
    f: SmcObjectiveFn,
    user_data: *mut c_void,
    x0: f64,
    c: f64,
    r: f64,
    epsilon: f64,
    delta: f64,
    x_out: *mut f64,
    evaluations_out: *mut usize,
) -> SmcStatus {
    guard(|| {
        let f = f.ok_or_else(|| null("f"))?;
        if x_out.is_null() {
            return Err(null("x_out"));
        }
        let params = SearchParams::new(c, r, epsilon, delta).map_err(lib_err)?;
        let mut obj = Objective::new(|x| f(x, user_data));
        let start = find_feasible(&mut obj, x0, delta).map_err(lib_err)?;
        let x = minimize(&mut obj, start, &params).map_err(lib_err)?;
        *x_out = x;
        if !evaluations_out.is_null() {
            *evaluations_out = obj.evaluations();
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping_covers_library_errors() {
        assert_eq!(status_of(&Error::Collapse { step: 3 }), SmcStatus::Collapse);
        assert_eq!(status_of(&Error::Config("x".into())), SmcStatus::InvalidArgument);
        assert_eq!(
            status_of(&Error::NoFeasiblePoint { start: 1.0, steps: 2 }),
            SmcStatus::NoFeasiblePoint
        );
    }

    #[test]
    fn guard_catches_panics() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, SmcStatus::Panic);
        let msg = unsafe { CStr::from_ptr(smc_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
        assert_eq!(guard(|| Ok(())), SmcStatus::Ok);
        assert!(smc_last_error_message().is_null());
    }
}
