//! C interface to `fcopula`.
//!
//! Parameters and simulations live behind opaque handles that the caller
//! frees with the matching `*_free` function. Every fallible call returns an
//! [`FcStatus`]; on failure the message is kept per thread and can be read
//! with [`fc_last_error`]. Sites are passed as two parallel coordinate arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fcopula::copula::{self, CopulaParams};
use fcopula::correlation::{build_corr_matrix, CorrelationModel, StationaryCorr};
use fcopula::gaussian::QmcConfig;
use fcopula::geometry::Coord;
use fcopula::risk::{self, ReturnPeriodOptions};
use fcopula::simulate::{self, Simulation};
use fcopula::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Numerical = 3,
    Factorization = 4,
    Data = 5,
    Fit = 6,
    Config = 7,
    Io = 8,
    Parse = 9,
    Panic = 10,
}

/// Factor rate and stationary correlation of the latent Gaussian field.
pub struct FcParams(CopulaParams);

/// Simulated replicates, stored row-major as `n_reps` rows of `n_sites`.
pub struct FcSimulation(Simulation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FcStatus {
    match e {
        Error::Factorization(_) => FcStatus::Factorization,
        Error::Domain(_) => FcStatus::Domain,
        Error::Numerical(_) => FcStatus::Numerical,
        Error::Parse { .. } => FcStatus::Parse,
        Error::Data(_) => FcStatus::Data,
        Error::Fit(_) => FcStatus::Fit,
        Error::Config(_) => FcStatus::Config,
        Error::Io { .. } | Error::Csv(_) => FcStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FcStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FcStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn sites(xs: *const f64, ys: *const f64, n: usize) -> Result<Vec<Coord>, Fail> {
    let xs = slice(xs, n, "xs")?;
    let ys = slice(ys, n, "ys")?;
    Ok(xs.iter().zip(ys).map(|(&x, &y)| Coord::new(x, y)).collect())
}

fn make_params(rate: f64, corr: fcopula::Result<StationaryCorr>, dst: &mut *mut FcParams) -> Result<(), Fail> {
    let p = CopulaParams::new(rate, corr?)?;
    *dst = Box::into_raw(Box::new(FcParams(p)));
    Ok(())
}

/// Parameters with exponential correlation exp(-h/range).
///
/// # Safety
/// `out_params` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn fc_params_new_exponential(rate: f64, range: f64, out_params: *mut *mut FcParams) -> FcStatus {
    guard(|| make_params(rate, StationaryCorr::exponential(range), out(out_params, "out_params")?))
}

/// Parameters with Matérn correlation of smoothness `nu`.
///
/// # Safety
/// `out_params` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn fc_params_new_matern(
    rate: f64,
    range: f64,
    nu: f64,
    out_params: *mut *mut FcParams,
) -> FcStatus {
    guard(|| make_params(rate, StationaryCorr::matern(range, nu), out(out_params, "out_params")?))
}

/// Releases a handle from `fc_params_new_*`. Null is ignored.
///
/// # Safety
/// `params` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fc_params_free(params: *mut FcParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `params` must be a live handle or null (null yields NaN).
#[no_mangle]
pub unsafe extern "C" fn fc_params_rate(params: *const FcParams) -> f64 {
    params.as_ref().map_or(f64::NAN, |p| p.0.rate())
}

/// # Safety
/// `params` must be a live handle or null (null yields NaN).
#[no_mangle]
pub unsafe extern "C" fn fc_params_range(params: *const FcParams) -> f64 {
    params.as_ref().map_or(f64::NAN, |p| p.0.range())
}

/// Limiting tail dependence coefficient at distance `h`.
///
/// # Safety
/// `params` must be a live handle and `out_chi` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fc_chi_limit(params: *const FcParams, h: f64, out_chi: *mut f64) -> FcStatus {
    guard(|| {
        let p = deref(params, "params")?;
        *out(out_chi, "out_chi")? = copula::chi_limit(&p.0, h)?;
        Ok(())
    })
}

/// Tail dependence coefficient at level `u` and distance `h`.
///
/// # Safety
/// `params` must be a live handle and `out_chi` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fc_chi_u(params: *const FcParams, h: f64, u: f64, out_chi: *mut f64) -> FcStatus {
    guard(|| {
        let p = deref(params, "params")?;
        *out(out_chi, "out_chi")? = copula::chi_u(&p.0, h, u, &QmcConfig::default())?.value;
        Ok(())
    })
}

/// Joint distribution function of the latent W at `w`, for `n` sites.
/// Lattice integration uses `qmc_points` points and `qmc_shifts` random
/// shifts drawn from `seed`; `out_error` (nullable) receives its error estimate.
///
/// # Safety
/// `xs`, `ys` and `w` must hold `n` values; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fc_joint_cdf(
    params: *const FcParams,
    xs: *const f64,
    ys: *const f64,
    w: *const f64,
    n: usize,
    qmc_points: usize,
    qmc_shifts: usize,
    seed: u64,
    out_value: *mut f64,
    out_error: *mut f64,
) -> FcStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let s = sites(xs, ys, n)?;
        let w = slice(w, n, "w")?;
        let sigma = build_corr_matrix(&CorrelationModel::Stationary(*p.0.corr()), &s)?;
        let est = copula::joint_cdf(w, p.0.rate(), &sigma, &QmcConfig::new(qmc_points, qmc_shifts, seed))?;
        *out(out_value, "out_value")? = est.value;
        if let Some(e) = out_error.as_mut() {
            *e = est.error;
        }
        Ok(())
    })
}

/// Log joint density of the latent W at `w`, for `n` sites.
///
/// # Safety
/// `xs`, `ys` and `w` must hold `n` values; `out_value` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fc_joint_log_density(
    params: *const FcParams,
    xs: *const f64,
    ys: *const f64,
    w: *const f64,
    n: usize,
    out_value: *mut f64,
) -> FcStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let s = sites(xs, ys, n)?;
        let w = slice(w, n, "w")?;
        let sigma = build_corr_matrix(&CorrelationModel::Stationary(*p.0.corr()), &s)?;
        *out(out_value, "out_value")? = copula::joint_log_density(w, p.0.rate(), &sigma)?;
        Ok(())
    })
}

/// Simulates `n_reps` replicates of W at `n` sites.
///
/// # Safety
/// `xs` and `ys` must hold `n` values; `out_sim` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn fc_simulate(
    params: *const FcParams,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    n_reps: usize,
    seed: u64,
    out_sim: *mut *mut FcSimulation,
) -> FcStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let s = sites(xs, ys, n)?;
        let dst = out(out_sim, "out_sim")?;
        let sim = simulate::simulate_stationary(&p.0, &s, n_reps, seed)?;
        *dst = Box::into_raw(Box::new(FcSimulation(sim)));
        Ok(())
    })
}

/// Borrowed view of the simulated values (`n_reps * n_sites`, row-major).
/// Valid until the handle is freed. Null handles yield null and length 0.
///
/// # Safety
/// `sim` must be a live handle or null; `out_len` valid for a write or null.
#[no_mangle]
pub unsafe extern "C" fn fc_simulation_values(sim: *const FcSimulation, out_len: *mut usize) -> *const f64 {
    let (p, n) = match sim.as_ref() {
        Some(s) => (s.0.values.as_ptr(), s.0.values.len()),
        None => (ptr::null(), 0),
    };
    if let Some(l) = out_len.as_mut() {
        *l = n;
    }
    p
}

/// Releases a handle from `fc_simulate`. Null is ignored.
///
/// # Safety
/// `sim` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fc_simulation_free(sim: *mut FcSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Joint return period, in years, of every site exceeding level `u`.
/// `out_years` is +inf when no simulated replicate exceeded; `out_p_hat`
/// (nullable) receives the exceedance probability per replicate.
///
/// # Safety
/// `xs` and `ys` must hold `n` values; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fc_return_period(
    params: *const FcParams,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    u: f64,
    n_sims: usize,
    replicates_per_year: f64,
    seed: u64,
    out_years: *mut f64,
    out_p_hat: *mut f64,
) -> FcStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let s = sites(xs, ys, n)?;
        let opts = ReturnPeriodOptions {
            n_sims,
            replicates_per_year,
            seed,
            ..Default::default()
        };
        let rp = risk::return_period(&p.0, &s, u, &opts, None)?;
        *out(out_years, "out_years")? = rp.years;
        if let Some(ph) = out_p_hat.as_mut() {
            *ph = rp.p_hat;
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null after a
/// success. Owned by the library; valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn fc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
