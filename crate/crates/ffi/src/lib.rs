//! C interface to `robust_gan`.
//!
//! Objects cross the boundary as opaque handles created by `rg_*_new` (or
//! an estimation call) and released by the matching `rg_*_free`. Every
//! fallible function returns an [`RgStatus`]; on failure the message is
//! available from [`rg_last_error_message`] on the same thread. Panics are
//! caught at the boundary and reported as [`RgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use robust_gan::contamination::{corrupt, sample_clean, AttackKind, AttackSpec, CleanFamily};
use robust_gan::dataset::DatasetMeta;
use robust_gan::discriminator::FeatureFamily;
use robust_gan::distance::{estimate_distance, AscentConfig, DistanceKind};
use robust_gan::estimator::{minimax, EstimationResult, MinimaxConfig};
use robust_gan::generator::Task;
use robust_gan::{Dataset, Error, Points};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad value or shape.
    InvalidArgument = 2,
    Config = 3,
    /// Every restart diverged.
    Numerical = 4,
    Unsupported = 5,
    Io = 6,
    Panic = 7,
}

/// Distance used by the estimators.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgDistance {
    A1 = 1,
    A2 = 2,
    A3 = 3,
}

impl From<RgDistance> for DistanceKind {
    fn from(d: RgDistance) -> Self {
        match d {
            RgDistance::A1 => DistanceKind::A1,
            RgDistance::A2 => DistanceKind::A2,
            RgDistance::A3 => DistanceKind::A3,
        }
    }
}

/// Samples, optionally with regression responses.
pub struct RgDataset(Dataset);

/// Estimator settings.
pub struct RgConfig(MinimaxConfig);

/// Output of a robust estimation.
pub struct RgEstimate(EstimationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RgStatus {
    match e {
        Error::Domain(_) | Error::Shape(_) => RgStatus::InvalidArgument,
        Error::Config(_) => RgStatus::Config,
        Error::Numerical(_) => RgStatus::Numerical,
        Error::Unsupported(_) => RgStatus::Unsupported,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => RgStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (RgStatus, String)>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgStatus::Ok,
        Ok(Err((status, msg))) => {
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
            RgStatus::Panic
        }
    }
}

fn lib(e: Error) -> (RgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RgStatus, String) {
    (RgStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: &str) -> (RgStatus, String) {
    (RgStatus::InvalidArgument, msg.to_string())
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n * d` row-major points (and `n` responses when `responses` is
/// not null) into a new dataset.
///
/// # Safety
/// `points` must be readable for `n * d` values, `responses` (if not null)
/// for `n` values, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_new(points: *const f64, n: usize, d: usize, responses: *const f64, out: *mut *mut RgDataset) -> RgStatus {
    guard(|| {
        if points.is_null() {
            return Err(null("points"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(d).ok_or_else(|| invalid("n * d overflows"))?;
        let flat = slice::from_raw_parts(points, len).to_vec();
        let ys = (!responses.is_null()).then(|| slice::from_raw_parts(responses, n).to_vec());
        let ds = Dataset {
            points: Points::from_flat(n, d, flat).map_err(lib)?,
            responses: ys,
            corrupted_mask: None,
            meta: DatasetMeta::default(),
        };
        ds.validate().map_err(lib)?;
        if !ds.is_finite() {
            return Err(invalid("points and responses must be finite"));
        }
        put(out, RgDataset(ds));
        Ok(())
    })
}

/// `n` draws from `N(0, sigma^2 I_d)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_sample_gaussian(n: usize, d: usize, sigma: f64, seed: u64, out: *mut *mut RgDataset) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = sample_clean(&CleanFamily::gaussian(d, sigma), n, d, seed).map_err(lib)?;
        put(out, RgDataset(ds));
        Ok(())
    })
}

/// Replaces a fraction `eps` of the rows with a point mass at distance
/// `magnitude` along the first axis.
///
/// # Safety
/// `data` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_corrupt_point_mass(data: *const RgDataset, eps: f64, magnitude: f64, seed: u64, out: *mut *mut RgDataset) -> RgStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = AttackSpec {
            kind: AttackKind::PointMass { direction: None, magnitude },
            eps,
        };
        put(out, RgDataset(corrupt(&data.0, &spec, seed).map_err(lib)?));
        Ok(())
    })
}

/// # Safety
/// `data` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_rows(data: *const RgDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n())
}

/// # Safety
/// `data` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_dim(data: *const RgDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.d())
}

/// # Safety
/// `data` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_free(data: *mut RgDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Default estimator settings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_config_new(out: *mut *mut RgConfig) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, RgConfig(MinimaxConfig::default()));
        Ok(())
    })
}

/// Settings from a TOML table with the fields of the `[minimax]` section of
/// a sweep config. Unknown keys are errors.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_config_from_toml(toml_text: *const c_char, out: *mut *mut RgConfig) -> RgStatus {
    guard(|| {
        if toml_text.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml_text).to_str().map_err(|e| (RgStatus::Config, e.to_string()))?;
        let cfg: MinimaxConfig = toml::from_str(text).map_err(|e| (RgStatus::Config, e.to_string()))?;
        cfg.validate().map_err(|e| (RgStatus::Config, e.to_string()))?;
        put(out, RgConfig(cfg));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rg_config_set_distance(cfg: *mut RgConfig, distance: RgDistance) -> RgStatus {
    guard(|| {
        cfg.as_mut().ok_or_else(|| null("cfg"))?.0.distance = distance.into();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rg_config_set_outer_steps(cfg: *mut RgConfig, steps: usize) -> RgStatus {
    guard(|| {
        if steps == 0 {
            return Err(invalid("outer steps must be positive"));
        }
        cfg.as_mut().ok_or_else(|| null("cfg"))?.0.outer_steps = steps;
        Ok(())
    })
}

/// Contamination level assumed by the robust initializers.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rg_config_set_eps(cfg: *mut RgConfig, eps: f64) -> RgStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let mut next = c.0.clone();
        next.eps = eps;
        next.validate().map_err(lib)?;
        c.0 = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rg_config_set_seed(cfg: *mut RgConfig, seed: u64) -> RgStatus {
    guard(|| {
        cfg.as_mut().ok_or_else(|| null("cfg"))?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_config_free(cfg: *mut RgConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn estimate(task: Task, data: *const RgDataset, cfg: *const RgConfig, out: *mut *mut RgEstimate) -> RgStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, RgEstimate(minimax(task, &data.0, &cfg.0, None).map_err(lib)?));
        Ok(())
    })
}

/// Robust mean; the estimate has `d` entries.
///
/// # Safety
/// `data` and `cfg` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_robust_mean(data: *const RgDataset, cfg: *const RgConfig, out: *mut *mut RgEstimate) -> RgStatus {
    estimate(Task::Mean, data, cfg, out)
}

/// Robust second moment; the estimate has `d * d` entries, row-major.
///
/// # Safety
/// `data` and `cfg` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_robust_second_moment(data: *const RgDataset, cfg: *const RgConfig, out: *mut *mut RgEstimate) -> RgStatus {
    estimate(Task::SecondMoment, data, cfg, out)
}

/// Robust regression coefficients; the dataset needs responses.
///
/// # Safety
/// `data` and `cfg` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_robust_regression(data: *const RgDataset, cfg: *const RgConfig, out: *mut *mut RgEstimate) -> RgStatus {
    estimate(Task::Regression, data, cfg, out)
}

/// Number of entries in the estimate.
///
/// # Safety
/// `est` must be a live estimate handle.
#[no_mangle]
pub unsafe extern "C" fn rg_estimate_len(est: *const RgEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.0.estimate.to_flat().len())
}

/// Copies the estimate into `buf`, which must hold `rg_estimate_len`
/// values (`len` is checked).
///
/// # Safety
/// `est` must be a live estimate handle and `buf` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn rg_estimate_copy(est: *const RgEstimate, buf: *mut f64, len: usize) -> RgStatus {
    guard(|| {
        let est = est.as_ref().ok_or_else(|| null("est"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let flat = est.0.estimate.to_flat();
        if len != flat.len() {
            return Err(invalid(&format!("buffer holds {len} values, estimate has {}", flat.len())));
        }
        slice::from_raw_parts_mut(buf, len).copy_from_slice(&flat);
        Ok(())
    })
}

/// Final adversarial distance between the data and the fitted generator.
///
/// # Safety
/// `est` must be a live estimate handle.
#[no_mangle]
pub unsafe extern "C" fn rg_estimate_distance_value(est: *const RgEstimate) -> f64 {
    est.as_ref().map_or(f64::NAN, |e| e.0.final_distance_value)
}

/// # Safety
/// `est` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_estimate_free(est: *mut RgEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Adversarial distance between two point sets (mean features), with the
/// default ascent settings.
///
/// # Safety
/// `p` and `q` must be live dataset handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_distance(distance: RgDistance, p: *const RgDataset, q: *const RgDataset, seed: u64, out: *mut f64) -> RgStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let q = q.as_ref().ok_or_else(|| null("q"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (v, _) = estimate_distance(distance.into(), FeatureFamily::Mean, &p.0, &q.0, &AscentConfig::default(), seed).map_err(lib)?;
        *out = v;
        Ok(())
    })
}
