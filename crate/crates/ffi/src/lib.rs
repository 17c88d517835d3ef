//! C ABI over `subdiff`.
//!
//! Every fallible call returns an [`SdStatus`]; on failure the message is
//! kept per thread and read back with [`sd_last_error_message`]. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use subdiff::experiments::{exact_msd, exact_sq_increment};
use subdiff::hierarchy::fixed_point_iterate;
use subdiff::model::{self, regime_classify, Boundary, ModelSpec, Path, RegimeLabel};
use subdiff::sampler::{estimates, run_chain, ChainRun, EstimateWithError, McmcConfig};
use subdiff::{Error, ErrorClass};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdBoundary {
    Pinned = 0,
    Periodic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdRegime {
    VarianceCollapse = 0,
    BoundedVariance = 1,
    LogOrSubdiffusive = 2,
    Subdiffusive = 3,
    Diffusive = 4,
}

/// Model parameters. `gamma = 2` selects the quadratic potential.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SdModelParams {
    pub t: u32,
    pub n_per_unit: usize,
    pub dim: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub xi: f64,
    pub zeta: f64,
    pub boundary: SdBoundary,
}

/// Sampler settings; zero `shift_stride` means one unit of time.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SdMcmcParams {
    pub sweeps: usize,
    pub burn_in: usize,
    pub proposal_scale: f64,
    pub shift_stride: usize,
    pub chains: usize,
    pub batches: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: f64,
    pub iat: f64,
}

/// Opaque model handle.
pub struct SdModel {
    spec: ModelSpec,
    kernel: model::KernelTable,
}

/// Opaque handle to a finished MCMC run.
pub struct SdRun {
    run: ChainRun,
    estimates: Vec<EstimateWithError>,
    labels: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SdStatus {
    match e.class() {
        ErrorClass::Config => SdStatus::InvalidArgument,
        ErrorClass::Numeric => SdStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SdStatus, String)>) -> SdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SdStatus::Panic
        }
    }
}

fn lift<T>(r: subdiff::Result<T>) -> Result<T, (SdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (SdStatus, String) {
    (SdStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (SdStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Copies the last error of this thread into `buf` (NUL-terminated, truncated
/// to `len`). Returns the full message length without the NUL, or 0 if none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `params` must be valid; `out` must be writable. Free with [`sd_model_free`].
#[no_mangle]
pub unsafe extern "C" fn sd_model_new(params: *const SdModelParams, out: *mut *mut SdModel) -> SdStatus {
    guard(|| {
        let p = deref(params, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = lift(
            ModelSpec::builder()
                .t(p.t)
                .n_per_unit(p.n_per_unit)
                .dim(p.dim)
                .alpha(p.alpha)
                .gamma(p.gamma)
                .xi(p.xi)
                .zeta(p.zeta)
                .boundary(match p.boundary {
                    SdBoundary::Pinned => Boundary::Pinned,
                    SdBoundary::Periodic => Boundary::Periodic,
                })
                .build(),
        )?;
        let kernel = model::build_kernel(&spec);
        *out = Box::into_raw(Box::new(SdModel { spec, kernel }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`sd_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sd_model_free(model: *mut SdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of grid points `N + 1`; a path has this many points.
///
/// # Safety
/// `model` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sd_model_point_count(model: *const SdModel) -> usize {
    model.as_ref().map(|m| m.spec.grid_len() + 1).unwrap_or(0)
}

/// Energy of a path given as `point_count * dim` coordinates, point-major.
///
/// # Safety
/// `coords` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_model_energy(
    model: *const SdModel,
    coords: *const f64,
    len: usize,
    out: *mut f64,
) -> SdStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if coords.is_null() {
            return Err(null("coords"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let v = std::slice::from_raw_parts(coords, len).to_vec();
        let path = lift(Path::from_coords(&m.spec, v))?;
        *out = lift(model::energy(&path, &m.spec, &m.kernel))?;
        Ok(())
    })
}

/// Exact `E|x_n − x_m|²` (quadratic potential only).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_exact_sq_increment(
    model: *const SdModel,
    m: usize,
    n: usize,
    out: *mut f64,
) -> SdStatus {
    guard(|| {
        let md = deref(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(exact_sq_increment(&md.spec, m, n))?;
        Ok(())
    })
}

/// Exact mean squared displacement over the horizon.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_exact_msd(model: *const SdModel, out: *mut f64) -> SdStatus {
    guard(|| {
        let md = deref(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(exact_msd(&md.spec))?;
        Ok(())
    })
}

/// Runs the sampler with the default observables. Free with [`sd_run_free`].
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_sample(
    model: *const SdModel,
    params: *const SdMcmcParams,
    out: *mut *mut SdRun,
) -> SdStatus {
    guard(|| {
        let md = deref(model, "model")?;
        let p = deref(params, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = McmcConfig {
            sweeps: p.sweeps,
            burn_in: p.burn_in,
            proposal_scale: p.proposal_scale,
            shift_stride: p.shift_stride,
            chains: p.chains,
            batches: p.batches,
            seed: p.seed,
            ..McmcConfig::default()
        };
        let run = lift(run_chain(&md.spec, &config))?;
        let estimates = lift(estimates(&run, config.batches))?;
        let labels = run
            .observables
            .iter()
            .map(|o| CString::new(o.label()).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(SdRun { run, estimates, labels }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`sd_sample`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sd_run_free(run: *mut SdRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sd_run_observable_count(run: *const SdRun) -> usize {
    run.as_ref().map(|r| r.run.observables.len()).unwrap_or(0)
}

/// Label of observable `index`, owned by the run handle.
///
/// # Safety
/// `run` must be a live handle. Returns null when out of range.
#[no_mangle]
pub unsafe extern "C" fn sd_run_label(run: *const SdRun, index: usize) -> *const c_char {
    run.as_ref()
        .and_then(|r| r.labels.get(index))
        .map(|s| s.as_ptr())
        .unwrap_or(ptr::null())
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_run_estimate(run: *const SdRun, index: usize, out: *mut SdEstimate) -> SdStatus {
    guard(|| {
        let r = deref(run, "run")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = r.estimates.get(index).ok_or_else(|| {
            (
                SdStatus::InvalidArgument,
                format!("observable index {index} out of range (have {})", r.estimates.len()),
            )
        })?;
        *out = SdEstimate { mean: e.mean, std_error: e.std_error, n_effective: e.n_effective, iat: e.iat };
        Ok(())
    })
}

/// Regime of `(gamma, xi)`, with `gamma` in (0, 2).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_regime(gamma: f64, xi: f64, out: *mut SdRegime) -> SdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = match lift(regime_classify(gamma, xi))? {
            RegimeLabel::VarianceCollapse => SdRegime::VarianceCollapse,
            RegimeLabel::BoundedVariance => SdRegime::BoundedVariance,
            RegimeLabel::LogOrSubdiffusive => SdRegime::LogOrSubdiffusive,
            RegimeLabel::Subdiffusive => SdRegime::Subdiffusive,
            RegimeLabel::Diffusive => SdRegime::Diffusive,
        };
        Ok(())
    })
}

/// `n`-th iterate of `x ↦ c + d x` from 1, with its distance to the fixed point.
///
/// # Safety
/// `value` and `error` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_fixed_point_iterate(
    c: f64,
    d: f64,
    n: u32,
    value: *mut f64,
    error: *mut f64,
) -> SdStatus {
    guard(|| {
        if value.is_null() || error.is_null() {
            return Err(null("value/error"));
        }
        let r = lift(fixed_point_iterate(c, d, n))?;
        *value = r.value;
        *error = r.error;
        Ok(())
    })
}
