//! C ABI for `conekit`.
//!
//! Models and results are opaque handles owned by the caller and released
//! with the matching `_free` function. Every entry point returns a
//! [`ConekitStatus`]; on failure the message is available from
//! [`conekit_last_error_message`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use conekit::kinetics::{audit_assumptions, CollisionModel, Envelope, RateTable};
use conekit::transport::{solve_mild, TransportSpec};
use conekit::{
    Error, KernelFamily, KernelSpec, ModelSpec, SolveResult, SolverConfig, StateVec, TimeGrid,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConekitStatus {
    Ok = 0,
    NullPointer = 1,
    Panic = 2,
    ConeViolation = 10,
    ShapeMismatch = 11,
    DomainError = 12,
    AssumptionViolation = 13,
    NoDefault = 14,
    InternalOrderError = 15,
    MaxItersExceeded = 16,
    NonfiniteState = 17,
    ClampBudgetExceeded = 18,
    IncompatibleGrid = 19,
    StepTooLarge = 20,
    InvalidKernel = 21,
    InvalidConfig = 22,
    GridMismatch = 23,
    IoError = 24,
}

impl From<&Error> for ConekitStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ConeViolation { .. } => Self::ConeViolation,
            Error::ShapeMismatch { .. } => Self::ShapeMismatch,
            Error::Domain(_) => Self::DomainError,
            Error::AssumptionViolation(_) => Self::AssumptionViolation,
            Error::NoDefault(_) => Self::NoDefault,
            Error::InternalOrder { .. } => Self::InternalOrderError,
            Error::MaxItersExceeded { .. } => Self::MaxItersExceeded,
            Error::NonfiniteState { .. } => Self::NonfiniteState,
            Error::ClampBudgetExceeded { .. } => Self::ClampBudgetExceeded,
            Error::IncompatibleGrid { .. } => Self::IncompatibleGrid,
            Error::StepTooLarge(_) => Self::StepTooLarge,
            Error::InvalidKernel(_) => Self::InvalidKernel,
            Error::InvalidConfig(_) => Self::InvalidConfig,
            Error::GridMismatch(_) => Self::GridMismatch,
            Error::Io { .. } => Self::IoError,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConekitKernel {
    Constant = 0,
    Additive = 1,
    Multiplicative = 2,
}

/// `a(x) = intercept + slope * x`
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ConekitEnvelope {
    pub intercept: f64,
    pub slope: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ConekitSolverConfig {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iters: usize,
    /// Nonzero to audit the model before solving.
    pub audit_first: i32,
}

/// Opaque model handle.
pub struct ConekitModel {
    inner: ModelSpec,
}

/// Opaque solve result.
pub struct ConekitResult {
    inner: SolveResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|e| {
        let mut bytes = e.into_vec();
        bytes.retain(|b| *b != 0);
        CString::new(bytes).unwrap_or_default()
    });
    LAST_ERROR.with(|l| *l.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|l| *l.borrow_mut() = None);
}

struct Failure(ConekitStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), format!("{} [{}]", e, e.code()))
    }
}

fn null(what: &str) -> Failure {
    Failure(ConekitStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> ConekitStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ConekitStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ConekitStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn envelope(e: ConekitEnvelope) -> Result<Envelope, Failure> {
    Ok(Envelope::new(e.intercept, e.slope)?)
}

fn solver_config(cfg: *const ConekitSolverConfig) -> SolverConfig {
    match unsafe { cfg.as_ref() } {
        None => SolverConfig::default(),
        Some(c) => SolverConfig {
            tol_abs: c.tol_abs,
            tol_rel: c.tol_rel,
            max_iters: c.max_iters,
            audit_first: c.audit_first != 0,
        },
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn conekit_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next `conekit_*` call on the same thread.
#[no_mangle]
pub extern "C" fn conekit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|l| l.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Model with `λ_k = lambda0 + k` and the default envelopes for `kernel`.
/// `kappa` is used by the constant kernel only.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn conekit_model_new(
    kernel: ConekitKernel,
    kappa: f64,
    sizes: usize,
    lambda0: f64,
    out: *mut *mut ConekitModel,
) -> ConekitStatus {
    guard(|| {
        let family = match kernel {
            ConekitKernel::Constant => KernelFamily::Constant { kappa },
            ConekitKernel::Additive => KernelFamily::Additive,
            ConekitKernel::Multiplicative => KernelFamily::Multiplicative,
        };
        let inner = ModelSpec::with_defaults(KernelSpec::new(family)?, sizes, lambda0)?;
        write_out(out, ConekitModel { inner })
    })
}

/// Model from a symmetric `n x n` rate table (row-major, 0-based sizes)
/// with caller-supplied envelopes and `Λ₁ = Λ`.
///
/// # Safety
/// `rates` must point to `n * n` doubles and `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn conekit_model_new_tabulated(
    rates: *const f64,
    n: usize,
    sizes: usize,
    lambda0: f64,
    a_env: ConekitEnvelope,
    rho_env: ConekitEnvelope,
    out: *mut *mut ConekitModel,
) -> ConekitStatus {
    guard(|| {
        let flat = slice(
            rates,
            n.checked_mul(n)
                .ok_or_else(|| Failure(ConekitStatus::DomainError, "n * n overflows".into()))?,
            "rates",
        )?;
        let rows: Vec<Vec<f64>> = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let kernel = KernelSpec::new(KernelFamily::Tabulated(RateTable::from_matrix(&rows)?))?;
        let lambda = conekit::DiagonalOperator::affine(lambda0, sizes)?;
        let inner = ModelSpec::new(
            kernel,
            lambda.clone(),
            lambda,
            envelope(a_env)?,
            envelope(rho_env)?,
        )?;
        write_out(out, ConekitModel { inner })
    })
}

/// Replaces the envelopes of `model`.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn conekit_model_set_envelopes(
    model: *mut ConekitModel,
    a_env: ConekitEnvelope,
    rho_env: ConekitEnvelope,
) -> ConekitStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let (a, rho) = (envelope(a_env)?, envelope(rho_env)?);
        m.inner = m.inner.clone().with_envelopes(a, rho);
        Ok(())
    })
}

/// Sets a per-cell kernel multiplier of length `cells`.
///
/// # Safety
/// `model` must be a live handle and `modulation` must point to `cells` doubles.
#[no_mangle]
pub unsafe extern "C" fn conekit_model_set_modulation(
    model: *mut ConekitModel,
    modulation: *const f64,
    cells: usize,
) -> ConekitStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let modulation = slice(modulation, cells, "modulation")?.to_vec();
        let old = &m.inner;
        let kernel = old.kernel().clone().with_modulation(modulation)?;
        let inner = ModelSpec::new(
            kernel,
            old.lambda().clone(),
            old.lambda1().clone(),
            old.a_env(),
            old.rho_env(),
        )?;
        m.inner = inner;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conekit_model_free(model: *mut ConekitModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the assumption audit. `failed` receives the number of failing
/// checks, whose names are then in [`conekit_last_error_message`].
///
/// # Safety
/// `model` must be a live handle and `failed` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn conekit_audit(
    model: *const ConekitModel,
    samples: usize,
    seed: u64,
    failed: *mut usize,
) -> ConekitStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let failed = failed.as_mut().ok_or_else(|| null("failed"))?;
        let report = audit_assumptions(&m.inner, samples, seed);
        *failed = report.failed().len();
        if *failed > 0 {
            set_error(format!("failed checks: {}", report.failed().join(", ")));
        }
        Ok(())
    })
}

unsafe fn initial(
    model: &ModelSpec,
    f0: *const f64,
    len: usize,
    cells: usize,
) -> Result<StateVec, Failure> {
    let data = slice(f0, len, "f0")?.to_vec();
    Ok(StateVec::new(model.sizes(), cells, data)?)
}

/// Solves on `steps` uniform steps over `[0, horizon]`. `f0` holds
/// `sizes * cells` values, cell by cell. `cfg` may be null for defaults.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn conekit_solve(
    model: *const ConekitModel,
    f0: *const f64,
    len: usize,
    cells: usize,
    horizon: f64,
    steps: usize,
    cfg: *const ConekitSolverConfig,
    out: *mut *mut ConekitResult,
) -> ConekitStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let f0 = initial(&m.inner, f0, len, cells)?;
        let grid = TimeGrid::new(horizon, steps)?;
        let inner = conekit::solve(&m.inner, &f0, grid, &solver_config(cfg))?;
        write_out(out, ConekitResult { inner })
    })
}

/// Like [`conekit_solve`] with periodic advection at `speed` cells per unit
/// time. The result holds the lab-frame trajectory.
///
/// # Safety
/// As for [`conekit_solve`].
#[no_mangle]
pub unsafe extern "C" fn conekit_solve_transport(
    model: *const ConekitModel,
    f0: *const f64,
    len: usize,
    cells: usize,
    speed: f64,
    horizon: f64,
    steps: usize,
    cfg: *const ConekitSolverConfig,
    out: *mut *mut ConekitResult,
) -> ConekitStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let f0 = initial(&m.inner, f0, len, cells)?;
        let grid = TimeGrid::new(horizon, steps)?;
        let transport = TransportSpec::new(cells, speed)?;
        let mild = solve_mild(&m.inner, &transport, &f0, grid, &solver_config(cfg))?;
        write_out(out, ConekitResult { inner: mild.result })
    })
}

/// Number of time nodes (`steps + 1`), or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conekit_result_nodes(result: *const ConekitResult) -> usize {
    result
        .as_ref()
        .map_or(0, |r| r.inner.trajectory.grid().nodes())
}

/// Values per node (`sizes * cells`), or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conekit_result_state_len(result: *const ConekitResult) -> usize {
    result
        .as_ref()
        .map_or(0, |r| r.inner.trajectory.state(0).as_slice().len())
}

/// Picard sweeps used, or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conekit_result_iterations(result: *const ConekitResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.iterations_used)
}

/// Copies the state at `node` into `buf`, which holds `len` doubles.
///
/// # Safety
/// `result` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn conekit_result_state(
    result: *const ConekitResult,
    node: usize,
    buf: *mut f64,
    len: usize,
) -> ConekitStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let traj = &r.inner.trajectory;
        if node >= traj.grid().nodes() {
            return Err(Failure(
                ConekitStatus::DomainError,
                format!("node {node} out of range (0..{})", traj.grid().nodes()),
            ));
        }
        let s = traj.state(node).as_slice();
        if len != s.len() {
            return Err(Failure(
                ConekitStatus::ShapeMismatch,
                format!("buffer holds {len} values, state has {}", s.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(s);
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conekit_result_free(result: *mut ConekitResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
