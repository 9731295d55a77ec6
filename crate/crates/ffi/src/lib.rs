//! C ABI over `boostvi`.
//!
//! Every fallible function returns a [`BvStatus`]; on failure the message is
//! kept per thread and read back with [`bv_last_error`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free` function. Panics are caught at the boundary and reported as
//! [`BvStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use boostvi::cli::{load_config, Experiment, Overrides};
use boostvi::density::{AtomFamilyConfig, MixtureDensity, SupportBox, TruncatedGaussianAtom};
use boostvi::lmo::GridSpec;
use boostvi::objective::ObjectiveConstants;
use boostvi::solvers::{run, Algorithm, LmoChoice, RunOutput, SolverConfig};
use boostvi::targets::{GaussComponent, GaussMixTarget};
use boostvi::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numeric = 4,
    Solver = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Step rule of a boosting run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BvAlgorithm {
    FwFixed = 0,
    FwLinesearch = 1,
    NormCorrective = 2,
    FullyCorrective = 3,
}

impl From<BvAlgorithm> for Algorithm {
    fn from(a: BvAlgorithm) -> Self {
        match a {
            BvAlgorithm::FwFixed => Algorithm::FwFixed,
            BvAlgorithm::FwLinesearch => Algorithm::FwLinesearch,
            BvAlgorithm::NormCorrective => Algorithm::NormCorrective,
            BvAlgorithm::FullyCorrective => Algorithm::FullyCorrective,
        }
    }
}

/// Atom family: support box, σ range and mean quantization.
pub struct BvFamily(AtomFamilyConfig);

/// Mixture of truncated Gaussian atoms.
pub struct BvMixture(MixtureDensity);

/// Trace and final mixture of a boosting run.
pub struct BvRunResult(RunOutput);

struct Failure {
    status: BvStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::OutsideSupport => {
                BvStatus::InvalidArgument
            }
            Error::Config { .. } | Error::Dataset { .. } => BvStatus::Config,
            Error::Io(_) => BvStatus::Io,
            Error::OracleFailure(_) => BvStatus::Solver,
            _ => BvStatus::Numeric,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn failure(status: BvStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f` behind the boundary: clears the last error, maps failures and
/// contains panics.
fn guard<F>(f: F) -> BvStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BvStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            BvStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(failure(BvStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null-checked and point to `n` readable values.
unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, n))
}

fn emit<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers null-check `out` before computing `value`
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn bv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an atom family on the box [lower, upper] of dimension `dim`.
///
/// # Safety
/// `lower` and `upper` must point to `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bv_family_new(
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    sigma_min: f64,
    sigma_max: f64,
    mean_stride: f64,
    out: *mut *mut BvFamily,
) -> BvStatus {
    guard(|| {
        non_null(out, "out")?;
        let lo = slice(lower, dim, "lower")?.to_vec();
        let hi = slice(upper, dim, "upper")?.to_vec();
        let support = SupportBox::new(lo, hi)?;
        emit(out, BvFamily(AtomFamilyConfig::new(support, sigma_min, sigma_max, mean_stride)?));
        Ok(())
    })
}

/// # Safety
/// `family` must come from [`bv_family_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bv_family_free(family: *mut BvFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Smoothness constant L = 1/ε and curvature bound of the family.
///
/// # Safety
/// `family` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bv_family_constants(
    family: *const BvFamily,
    l_smooth: *mut f64,
    curvature_bound: *mut f64,
) -> BvStatus {
    guard(|| {
        non_null(family, "family")?;
        non_null(l_smooth, "l_smooth")?;
        non_null(curvature_bound, "curvature_bound")?;
        let c = ObjectiveConstants::for_family(&(*family).0);
        *l_smooth = c.l_smooth;
        *curvature_bound = c.curvature_bound;
        Ok(())
    })
}

/// Creates a mixture of `n` atoms of `family`. `means` is row-major n × dim;
/// means and σ are projected into the family.
///
/// # Safety
/// `means` must hold n·dim values, `sigmas` and `weights` n values each.
#[no_mangle]
pub unsafe extern "C" fn bv_mixture_new(
    family: *const BvFamily,
    n: usize,
    means: *const f64,
    sigmas: *const f64,
    weights: *const f64,
    out: *mut *mut BvMixture,
) -> BvStatus {
    guard(|| {
        non_null(family, "family")?;
        non_null(out, "out")?;
        let fam = &(*family).0;
        let d = fam.dim();
        let means = slice(means, n * d, "means")?;
        let sigmas = slice(sigmas, n, "sigmas")?;
        let weights = slice(weights, n, "weights")?;
        let atoms = (0..n)
            .map(|i| fam.atom(&means[i * d..(i + 1) * d], sigmas[i]))
            .collect::<boostvi::Result<Vec<TruncatedGaussianAtom>>>()?;
        emit(out, BvMixture(MixtureDensity::new(atoms, weights.to_vec())?));
        Ok(())
    })
}

/// # Safety
/// `mixture` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bv_mixture_free(mixture: *mut BvMixture) {
    if !mixture.is_null() {
        drop(Box::from_raw(mixture));
    }
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `mixture` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bv_mixture_len(mixture: *const BvMixture) -> usize {
    if mixture.is_null() {
        0
    } else {
        (*mixture).0.len()
    }
}

/// Copies the mixture weights into `weights`, which has room for `capacity` values.
///
/// # Safety
/// `mixture` must be a live handle and `weights` writable for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn bv_mixture_weights(mixture: *const BvMixture, weights: *mut f64, capacity: usize) -> BvStatus {
    guard(|| {
        non_null(mixture, "mixture")?;
        non_null(weights, "weights")?;
        let w = (*mixture).0.weights();
        if capacity < w.len() {
            return Err(failure(BvStatus::OutOfRange, format!("need room for {} weights", w.len())));
        }
        ptr::copy_nonoverlapping(w.as_ptr(), weights, w.len());
        Ok(())
    })
}

/// log q(z) for a point of the mixture's dimension.
///
/// # Safety
/// `z` must hold `dim` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bv_mixture_log_pdf(mixture: *const BvMixture, z: *const f64, dim: usize, out: *mut f64) -> BvStatus {
    guard(|| {
        non_null(mixture, "mixture")?;
        non_null(out, "out")?;
        *out = (*mixture).0.log_pdf(slice(z, dim, "z")?)?;
        Ok(())
    })
}

/// Draws `n` samples into `out` (row-major n × dim) from a seeded stream.
///
/// # Safety
/// `out` must be writable for n·dim values.
#[no_mangle]
pub unsafe extern "C" fn bv_mixture_sample(mixture: *const BvMixture, n: usize, seed: u64, out: *mut f64) -> BvStatus {
    guard(|| {
        non_null(mixture, "mixture")?;
        non_null(out, "out")?;
        let q = &(*mixture).0;
        let d = q.dim();
        for (i, z) in q.sample(n, seed).iter().enumerate() {
            ptr::copy_nonoverlapping(z.as_ptr(), out.add(i * d), d);
        }
        Ok(())
    })
}

/// Boosts a mixture towards a Gaussian-mixture target truncated to the
/// family's box, using the exhaustive grid oracle (d ≤ 2). `means` is
/// row-major n_components × dim. `curvature` ≤ 0 selects the family bound.
///
/// # Safety
/// The component arrays must hold the stated number of values and `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn bv_run_gauss_mix(
    family: *const BvFamily,
    n_components: usize,
    weights: *const f64,
    means: *const f64,
    sigmas: *const f64,
    algorithm: BvAlgorithm,
    iterations: usize,
    grid_means: usize,
    grid_sigmas: usize,
    curvature: f64,
    out: *mut *mut BvRunResult,
) -> BvStatus {
    guard(|| {
        non_null(family, "family")?;
        non_null(out, "out")?;
        let fam = &(*family).0;
        let d = fam.dim();
        let w = slice(weights, n_components, "weights")?;
        let m = slice(means, n_components * d, "means")?;
        let s = slice(sigmas, n_components, "sigmas")?;
        let comps = (0..n_components)
            .map(|i| GaussComponent {
                weight: w[i],
                mean: m[i * d..(i + 1) * d].to_vec(),
                sigma: s[i],
            })
            .collect();
        let target = GaussMixTarget::new(comps, fam.support.clone())?.into_target();
        let grid = GridSpec {
            means_per_dim: grid_means,
            sigmas: grid_sigmas,
        };
        let mut cfg = SolverConfig::new(algorithm.into(), iterations, LmoChoice::Grid(grid));
        if curvature > 0.0 {
            cfg.curvature = Some(curvature);
        }
        let output = run(&cfg, fam, &target).map_err(|f| {
            let mut fail = Failure::from(f.error);
            fail.status = BvStatus::Solver;
            fail
        })?;
        emit(out, BvRunResult(output));
        Ok(())
    })
}

/// Runs an experiment config file as the `boostvi run` command would, without
/// writing artifacts.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bv_run_config_file(path: *const c_char, out: *mut *mut BvRunResult) -> BvStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| failure(BvStatus::InvalidArgument, "path is not UTF-8"))?;
        let cfg = load_config(&PathBuf::from(path), &Overrides::default())?;
        let exp = Experiment::build(&cfg)?;
        let output = run(&exp.solver, &exp.family, &exp.target).map_err(|f| {
            let mut fail = Failure::from(f.error);
            fail.status = BvStatus::Solver;
            fail
        })?;
        emit(out, BvRunResult(output));
        Ok(())
    })
}

/// # Safety
/// `result` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bv_result_free(result: *mut BvRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of trace rows (the initial row plus one per completed iteration), or 0 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bv_result_len(result: *const BvRunResult) -> usize {
    if result.is_null() {
        0
    } else {
        (*result).0.trace.records.len()
    }
}

/// Objective value and its standard error at trace row `row`.
///
/// # Safety
/// `result` must be a live handle and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn bv_result_objective(
    result: *const BvRunResult,
    row: usize,
    value: *mut f64,
    stderr: *mut f64,
) -> BvStatus {
    guard(|| {
        non_null(result, "result")?;
        non_null(value, "value")?;
        non_null(stderr, "stderr")?;
        let records = &(*result).0.trace.records;
        let r = records
            .get(row)
            .ok_or_else(|| failure(BvStatus::OutOfRange, format!("row {row} of {}", records.len())))?;
        *value = r.objective.value;
        *stderr = r.objective.stderr;
        Ok(())
    })
}

/// A copy of the final mixture, released with [`bv_mixture_free`].
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bv_result_mixture(result: *const BvRunResult, out: *mut *mut BvMixture) -> BvStatus {
    guard(|| {
        non_null(result, "result")?;
        non_null(out, "out")?;
        emit(out, BvMixture((*result).0.mixture.clone()));
        Ok(())
    })
}

/// The trace as CSV, released with [`bv_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bv_result_trace_csv(result: *const BvRunResult, out: *mut *mut c_char) -> BvStatus {
    guard(|| {
        non_null(result, "result")?;
        non_null(out, "out")?;
        let csv = CString::new((*result).0.trace.to_csv(false)).map_err(|e| failure(BvStatus::Numeric, e.to_string()))?;
        *out = csv.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
