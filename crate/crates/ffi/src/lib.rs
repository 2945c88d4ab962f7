//! C ABI over the dampwave lab. Objects cross the boundary as opaque
//! handles created by `dw_*_new` style functions and released with the
//! matching `*_free`; every fallible call returns a [`DwStatus`] and leaves
//! a message for [`dw_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dampwave::certificates::{f_eval, quasimode_grid, quasimode_ratio};
use dampwave::cli::{run, ExperimentConfig};
use dampwave::damping::{DampingProfile, StripBands};
use dampwave::geometry::{gcc_certify, GccOptions, GccVerdict};
use dampwave::linalg::SigmaMinOptions;
use dampwave::operators::OperatorSpec;
use dampwave::resolvent::sigma_min;
use dampwave::spectral::{make_grid, AxisKind, Grid};
use dampwave::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Unresolved = 4,
    NonConvergence = 5,
    Numerical = 6,
    Io = 7,
    /// The run finished but one of its checks failed.
    CheckFailed = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwFamily {
    Stationary = 0,
    Reduced = 1,
    Model = 2,
    Rescaled = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwAxisKind {
    Periodic = 0,
    TruncatedBox = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwOperatorParams {
    pub family: DwFamily,
    pub lambda: f64,
    pub omega: f64,
    pub mu: f64,
    /// Relative accuracy of the singular value; 0 picks the default.
    pub tolerance: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwGccResult {
    pub satisfied: bool,
    /// Largest hit time when satisfied, otherwise 0.
    pub max_hit_time: f64,
    /// Sampled rays that never met the damped region.
    pub witnesses: usize,
}

/// Damping coefficient handle.
pub struct DwDamping {
    profile: DampingProfile,
}

/// Spectral grid handle.
pub struct DwGrid {
    grid: Grid,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(error: &Error) -> DwStatus {
    match error {
        Error::Config(_) => DwStatus::Config,
        Error::Unresolved(_) => DwStatus::Unresolved,
        Error::NonConvergence { .. } => DwStatus::NonConvergence,
        Error::Singular(_) | Error::EnergyIncrease { .. } => DwStatus::Numerical,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => DwStatus::Io,
        _ => DwStatus::InvalidArgument,
    }
}

/// Runs `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), (DwStatus, String)>) -> DwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DwStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DwStatus::Panic
        }
    }
}

fn lib<T>(r: dampwave::Result<T>) -> Result<T, (DwStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (DwStatus, String) {
    (DwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], (DwStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (DwStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn new_damping(out: *mut *mut DwDamping, make: impl FnOnce() -> dampwave::Result<DampingProfile>) -> DwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let profile = lib(make())?;
        out.write(Box::into_raw(Box::new(DwDamping { profile })));
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `(sum_i (2 sin((x_i - c_i)/2))^2)^gamma` around `center[0..dims]`.
///
/// # Safety
/// `center` must hold `dims` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dw_damping_periodic_power(
    gamma: f64,
    center: *const f64,
    dims: usize,
    out: *mut *mut DwDamping,
) -> DwStatus {
    let center = match slice(center, dims, "center") {
        Ok(c) => c.to_vec(),
        Err(e) => return guard(|| Err(e)),
    };
    new_damping(out, || DampingProfile::periodic_power(gamma, center))
}

/// `|x - c|^{2 gamma}` around `center[0..dims]`.
///
/// # Safety
/// As [`dw_damping_periodic_power`].
#[no_mangle]
pub unsafe extern "C" fn dw_damping_radial_power(
    gamma: f64,
    center: *const f64,
    dims: usize,
    out: *mut *mut DwDamping,
) -> DwStatus {
    let center = match slice(center, dims, "center") {
        Ok(c) => c.to_vec(),
        Err(e) => return guard(|| Err(e)),
    };
    new_damping(out, || DampingProfile::radial_power(gamma, center))
}

/// `level` where `|x_a - band_center| < half_width` for a listed axis,
/// plus `floor` everywhere.
///
/// # Safety
/// `axes` must hold `axis_count` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dw_damping_strip(
    axes: *const usize,
    axis_count: usize,
    band_center: f64,
    half_width: f64,
    level: f64,
    floor: f64,
    out: *mut *mut DwDamping,
) -> DwStatus {
    let axes = match slice(axes, axis_count, "axes") {
        Ok(a) => a.to_vec(),
        Err(e) => return guard(|| Err(e)),
    };
    let bands = StripBands { axes, center: band_center, half_width, level };
    new_damping(out, || DampingProfile::strip(bands, floor))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dw_damping_constant(value: f64, out: *mut *mut DwDamping) -> DwStatus {
    new_damping(out, || DampingProfile::constant(value))
}

/// # Safety
/// `damping` must come from a `dw_damping_*` constructor and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dw_damping_free(damping: *mut DwDamping) {
    if !damping.is_null() {
        drop(Box::from_raw(damping));
    }
}

/// `b(x)` at `x[0..dims]`.
///
/// # Safety
/// `damping` must be live, `x` must hold `dims` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dw_damping_eval(
    damping: *const DwDamping,
    x: *const f64,
    dims: usize,
    out: *mut f64,
) -> DwStatus {
    guard(|| {
        let d = damping.as_ref().ok_or_else(|| null("damping"))?;
        let x = slice(x, dims, "x")?;
        if x.len() < d.profile.center.len() {
            return Err((DwStatus::InvalidArgument, format!("need {} coordinates, got {}", d.profile.center.len(), x.len())));
        }
        write(out, d.profile.eval(x), "out")
    })
}

/// Grid with `interior_dims` interior axes followed by `torus_dims` torus
/// axes; `modes`, `lengths`, `kinds` hold one entry per axis.
///
/// # Safety
/// The arrays must hold `interior_dims + torus_dims` entries; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn dw_grid_new(
    interior_dims: usize,
    torus_dims: usize,
    modes: *const usize,
    lengths: *const f64,
    kinds: *const DwAxisKind,
    out: *mut *mut DwGrid,
) -> DwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = interior_dims + torus_dims;
        let modes = slice(modes, n, "modes")?;
        let lengths = slice(lengths, n, "lengths")?;
        let kinds: Vec<AxisKind> = slice(kinds, n, "kinds")?
            .iter()
            .map(|k| match k {
                DwAxisKind::Periodic => AxisKind::Periodic,
                DwAxisKind::TruncatedBox => AxisKind::TruncatedBox,
            })
            .collect();
        let grid = lib(make_grid((interior_dims, torus_dims), modes, lengths, &kinds))?;
        out.write(Box::into_raw(Box::new(DwGrid { grid })));
        Ok(())
    })
}

/// # Safety
/// `grid` must come from [`dw_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dw_grid_free(grid: *mut DwGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points, 0 for null.
///
/// # Safety
/// `grid` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn dw_grid_len(grid: *const DwGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.len())
}

/// Smallest singular value of the operator described by `params` on `grid`.
///
/// # Safety
/// Handles must be live; `params` and `sigma` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dw_sigma_min(
    damping: *const DwDamping,
    grid: *const DwGrid,
    params: *const DwOperatorParams,
    sigma: *mut f64,
) -> DwStatus {
    guard(|| {
        let d = damping.as_ref().ok_or_else(|| null("damping"))?;
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let b = d.profile.clone();
        let spec = match p.family {
            DwFamily::Stationary => OperatorSpec::stationary(b, p.lambda),
            DwFamily::Reduced => OperatorSpec::reduced(b, p.lambda, p.omega),
            DwFamily::Model => OperatorSpec::model(b, p.mu),
            DwFamily::Rescaled => OperatorSpec::rescaled(b, p.lambda, p.omega),
        };
        let mut options = SigmaMinOptions { seed: p.seed, ..Default::default() };
        if p.tolerance != 0.0 {
            options.tolerance = p.tolerance;
        }
        let s = lib(sigma_min(&spec, &g.grid, &options))?;
        write(sigma, s.sigma, "sigma")
    })
}

/// `f(lambda, omega)` for constants `c0`, `gamma`; NaN for invalid input.
#[no_mangle]
pub extern "C" fn dw_f_eval(lambda: f64, omega: f64, c0: f64, gamma: f64) -> f64 {
    if !(lambda > 0.0 && omega >= 0.0 && c0 > 0.0 && gamma > 0.0) {
        return f64::NAN;
    }
    f_eval(lambda, omega, c0, gamma)
}

/// `||P_k u_k|| / k^{1/(gamma+1)}` for the quasimode around the damping
/// centre, on its default grid with `torus_dims` torus axes.
///
/// # Safety
/// `damping` must be live; `ratio` writable.
#[no_mangle]
pub unsafe extern "C" fn dw_quasimode_ratio(
    damping: *const DwDamping,
    k: u32,
    torus_dims: usize,
    ratio: *mut f64,
) -> DwStatus {
    guard(|| {
        let d = damping.as_ref().ok_or_else(|| null("damping"))?;
        let gamma = d.profile.gamma;
        let grid = lib(quasimode_grid(k, gamma, d.profile.center.len(), torus_dims))?;
        let r = lib(quasimode_ratio(k, gamma, &d.profile, &grid))?;
        write(ratio, r, "ratio")
    })
}

/// Ray-scan certificate of geometric control on the flat torus of
/// dimension `dims`; counts below 64 are rejected.
///
/// # Safety
/// `damping` must be live; `result` writable.
#[no_mangle]
pub unsafe extern "C" fn dw_gcc_certify(
    damping: *const DwDamping,
    dims: usize,
    direction_count: usize,
    base_count: usize,
    result: *mut DwGccResult,
) -> DwStatus {
    guard(|| {
        let d = damping.as_ref().ok_or_else(|| null("damping"))?;
        let options = GccOptions { direction_count, base_count, ..GccOptions::new(dims) };
        let verdict = lib(gcc_certify(&d.profile, &options))?;
        let r = match verdict {
            GccVerdict::Satisfied { max_hit_time } => DwGccResult { satisfied: true, max_hit_time, witnesses: 0 },
            GccVerdict::Violated { witnesses } => {
                DwGccResult { satisfied: false, max_hit_time: 0.0, witnesses: witnesses.len() }
            }
        };
        write(result, r, "result")
    })
}

/// Runs the experiment config at `path` (UTF-8), writing artifacts to its
/// output directory or to `output` when non-null. Returns
/// `DW_STATUS_CHECK_FAILED` when a gating check fails.
///
/// # Safety
/// `path` must be a nul-terminated string; `output` null or one.
#[no_mangle]
pub unsafe extern "C" fn dw_run_config(path: *const c_char, output: *const c_char) -> DwStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let text = |p: *const c_char| {
            CStr::from_ptr(p).to_str().map_err(|_| (DwStatus::InvalidArgument, "path is not UTF-8".to_string()))
        };
        let (_, mut plan) = lib(ExperimentConfig::load(Path::new(text(path)?)))?;
        if !output.is_null() {
            plan.output = text(output)?.into();
        }
        let summary = lib(run(&plan))?;
        if summary.passed {
            Ok(())
        } else {
            Err((DwStatus::CheckFailed, format!("checks failed for {}", plan.output.display())))
        }
    })
}
