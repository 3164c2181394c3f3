//! C interface to `localtime-lab`.
//!
//! Every function returns a [`LabStatus`]; results go through out-pointers.
//! After a failure [`lab_last_error`] describes it on the calling thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use localtime_lab::closedform::{self, LimitParams};
use localtime_lab::montecarlo::{estimate_survival, SimConfig};
use localtime_lab::picard::{self, EigenPair};
use localtime_lab::resolvent::resolvent_limit;
use localtime_lab::{Grid, GridFunction, KernelSpec, KillingKernel, LabError, ScaledKernel};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Grid step too coarse for the kernel.
    Resolution = 3,
    NoConvergence = 4,
    InconsistentEigenpair = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabKernelKind {
    Box = 0,
    Triangle = 1,
    Gaussian = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabClosedForm {
    K = 0,
    L = 1,
    KStar = 2,
    LStar = 3,
    Survival = 4,
    /// `E_x L₀(τ)`; ignores γ and λ.
    MeanLocalTime = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LabEstimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: f64,
}

/// Killing profile `c`.
pub struct LabKernel(Arc<KillingKernel>);

/// Eigenfunctions `k`, `ℓ` of `A_ε` on a grid.
pub struct LabEigenPair {
    nodes: Vec<f64>,
    pair: EigenPair,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &LabError) -> LabStatus {
    match err {
        LabError::Resolution { .. } => LabStatus::Resolution,
        LabError::Contraction { .. } | LabError::Quadrature { .. } => LabStatus::NoConvergence,
        LabError::InconsistentEigenpair { .. } => LabStatus::InconsistentEigenpair,
        LabError::SingularSystem { .. } | LabError::FitRejected(_) | LabError::Degenerate(_) => LabStatus::Numerical,
        _ => LabStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and panics for [`lab_last_error`].
fn guard(f: impl FnOnce() -> Result<(), (LabStatus, String)>) -> LabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LabStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LabStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (LabStatus, String)>;
}

impl<T> IntoFfi<T> for localtime_lab::Result<T> {
    fn ffi(self) -> Result<T, (LabStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), (LabStatus, String)> {
    if p.is_null() {
        Err((LabStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn lab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Unit profile of the given kind rescaled to mass `gamma`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lab_kernel_new(kind: LabKernelKind, gamma: f64, out: *mut *mut LabKernel) -> LabStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = match kind {
            LabKernelKind::Box => KernelSpec::unit_box(),
            LabKernelKind::Triangle => KernelSpec::unit_triangle(),
            LabKernelKind::Gaussian => KernelSpec::unit_gaussian(),
        };
        let k = KillingKernel::new(spec.with_mass(gamma).ffi()?).ffi()?;
        *out = Box::into_raw(Box::new(LabKernel(Arc::new(k))));
        Ok(())
    })
}

/// # Safety
/// `kernel` must come from [`lab_kernel_new`] and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lab_kernel_gamma(kernel: *const LabKernel, out: *mut f64) -> LabStatus {
    guard(|| {
        non_null(kernel, "kernel")?;
        non_null(out, "out")?;
        *out = (*kernel).0.gamma();
        Ok(())
    })
}

/// # Safety
/// `kernel` must come from [`lab_kernel_new`] or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn lab_kernel_free(kernel: *mut LabKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of nodes of the grid on `[a, b]` with step `h`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lab_grid_len(a: f64, b: f64, h: f64, out: *mut usize) -> LabStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = Grid::new(a, b, h).ffi()?.len();
        Ok(())
    })
}

/// One closed-form value of the limit problem at `x`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lab_closed_form(
    what: LabClosedForm,
    x: f64,
    a: f64,
    b: f64,
    gamma: f64,
    lambda: f64,
    out: *mut f64,
) -> LabStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = LimitParams::new(a, b, gamma).ffi()?;
        *out = match what {
            LabClosedForm::K => closedform::k_limit(x, &p.with_lambda(lambda).ffi()?),
            LabClosedForm::L => closedform::l_limit(x, &p.with_lambda(lambda).ffi()?),
            LabClosedForm::KStar => closedform::k_star(x, &p),
            LabClosedForm::LStar => closedform::l_star(x, &p),
            LabClosedForm::Survival => closedform::survival_expectation(x, &p),
            LabClosedForm::MeanLocalTime => closedform::mean_local_time(x, a, b),
        };
        Ok(())
    })
}

/// Picard solve of `k`, `ℓ` for `c_ε` on `[a, b]` with step `h`.
///
/// # Safety
/// `kernel` must come from [`lab_kernel_new`] and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lab_eigenpair_solve(
    kernel: *const LabKernel,
    eps: f64,
    a: f64,
    b: f64,
    h: f64,
    lambda: f64,
    out: *mut *mut LabEigenPair,
) -> LabStatus {
    guard(|| {
        non_null(kernel, "kernel")?;
        non_null(out, "out")?;
        let grid = Grid::new(a, b, h).ffi()?;
        let scaled = ScaledKernel::new((*kernel).0.clone(), eps).ffi()?;
        let pair = picard::solve_pair(&grid, &scaled, lambda, picard::DEFAULT_TOL).ffi()?;
        *out = Box::into_raw(Box::new(LabEigenPair {
            nodes: grid.nodes().collect(),
            pair,
        }));
        Ok(())
    })
}

/// # Safety
/// `pair` must come from [`lab_eigenpair_solve`] and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lab_eigenpair_len(pair: *const LabEigenPair, out: *mut usize) -> LabStatus {
    guard(|| {
        non_null(pair, "pair")?;
        non_null(out, "out")?;
        *out = (*pair).nodes.len();
        Ok(())
    })
}

/// The Wronskian `W = k'ℓ - kℓ'`.
///
/// # Safety
/// `pair` must come from [`lab_eigenpair_solve`] and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lab_eigenpair_wronskian(pair: *const LabEigenPair, out: *mut f64) -> LabStatus {
    guard(|| {
        non_null(pair, "pair")?;
        non_null(out, "out")?;
        *out = (*pair).pair.wronskian;
        Ok(())
    })
}

/// Copies nodes, `k` and `ℓ` into buffers of length `len`; any buffer may be NULL.
///
/// # Safety
/// `pair` must come from [`lab_eigenpair_solve`]; non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lab_eigenpair_copy(
    pair: *const LabEigenPair,
    x: *mut f64,
    k: *mut f64,
    l: *mut f64,
    len: usize,
) -> LabStatus {
    guard(|| {
        non_null(pair, "pair")?;
        let p = &*pair;
        let n = p.nodes.len();
        if len < n {
            return Err((LabStatus::BufferTooSmall, format!("need {n} entries, got {len}")));
        }
        for (dst, src) in [(x, p.nodes.as_slice()), (k, p.pair.k.values()), (l, p.pair.l.values())] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, n);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `pair` must come from [`lab_eigenpair_solve`] or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn lab_eigenpair_free(pair: *mut LabEigenPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// `R(λ, A) g` for the limit generator; `g` and `out` hold one value per grid node.
///
/// # Safety
/// `g` must hold `len` readable doubles and `out` `len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn lab_resolvent_limit(
    a: f64,
    b: f64,
    gamma: f64,
    lambda: f64,
    h: f64,
    g: *const f64,
    out: *mut f64,
    len: usize,
) -> LabStatus {
    guard(|| {
        non_null(g, "g")?;
        non_null(out, "out")?;
        let grid = Grid::new(a, b, h).ffi()?;
        if len != grid.len() {
            return Err((
                LabStatus::BufferTooSmall,
                format!("grid has {} nodes, buffers have {len}", grid.len()),
            ));
        }
        let p = LimitParams::new(a, b, gamma).ffi()?.with_lambda(lambda).ffi()?;
        let data = GridFunction::new(grid, std::slice::from_raw_parts(g, len).to_vec()).ffi()?;
        let r = resolvent_limit(&data, &p).ffi()?;
        ptr::copy_nonoverlapping(r.f.values().as_ptr(), out, len);
        Ok(())
    })
}

/// Monte Carlo estimate of `E_x exp(-γ L₀(τ))`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lab_mc_survival(
    x: f64,
    a: f64,
    b: f64,
    gamma: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    out: *mut LabEstimate,
) -> LabStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = LimitParams::new(a, b, gamma).ffi()?;
        let cfg = SimConfig::new(x, a, b, dt, gamma, n_paths, seed);
        let e = estimate_survival(x, &p, &cfg).ffi()?;
        *out = LabEstimate {
            value: e.weighted.value,
            std_error: e.weighted.std_error,
            exact: e.exact,
        };
        Ok(())
    })
}
