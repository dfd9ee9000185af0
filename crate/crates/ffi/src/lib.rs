//! C ABI for `mimo-ee`.
//!
//! Every fallible function returns a [`MeeStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be read with [`mee_last_error_message`]. Handles are opaque and must be
//! released with their `_free` function; strings returned by the library are
//! released with [`mee_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mimo_ee::capacity::sum_capacity_dpc;
use mimo_ee::ee::{ee_closed_form, ee_dpc, ee_lower, ee_siso, ee_upper, EePoint};
use mimo_ee::harness::{Overrides, RunConfig};
use mimo_ee::matrix_kernel::{ComplexMatrix, C64};
use mimo_ee::scaling::{run_scaling_experiment, ScalingResult};
use mimo_ee::special_math::lambert_w0;
use mimo_ee::system_model::{denormalize_ee, draw_channels, ChannelSet};
use mimo_ee::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeeStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8, or an index was out of range.
    InvalidArgument = 2,
    /// The configuration document was rejected.
    Config = 3,
    /// A numeric argument was outside the admissible domain.
    Domain = 4,
    /// Matrix or channel dimensions do not agree.
    Shape = 5,
    /// A solver or bracket search did not converge.
    NotConverged = 6,
    /// The channel draw has too few independent rows for the lower bound.
    RankDeficient = 7,
    /// The library panicked; this is a bug.
    Panic = 99,
}

/// Which efficiency to evaluate in [`mee_ee_point`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeeMethod {
    /// Exact sum-capacity efficiency.
    Dpc = 0,
    /// Upper bound from the strongest eigenmode.
    Upper = 1,
    /// Lower bound from zero-forcing dirty paper coding.
    Lower = 2,
    /// Closed form for single-antenna links.
    Siso = 3,
}

/// Result of [`mee_ee_point`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeeEePoint {
    /// Optimal normalized transmit power.
    pub q_star: f64,
    /// Rate at `q_star`, in bits per channel use.
    pub rate: f64,
    /// Normalized efficiency.
    pub xi: f64,
}

/// Result of [`mee_closed_form`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeeClosedForm {
    pub y_star: f64,
    pub x_star: f64,
    pub xi: f64,
    pub stationarity_residual: f64,
}

/// One grid point of a scaling run. Bound columns are NaN when the mode
/// does not produce them.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeeScalingRow {
    pub k: u64,
    pub mean_xi: f64,
    pub ci_halfwidth: f64,
    pub predictor_asymptotic: f64,
    pub predictor_finite_k: f64,
    pub ratio_asymptotic: f64,
    pub ratio_finite_k: f64,
    pub mean_xi_upper: f64,
    pub mean_xi_lower: f64,
}

/// A parsed configuration document.
pub struct MeeConfig {
    inner: RunConfig,
}

/// One realization of all user channels.
pub struct MeeChannels {
    inner: ChannelSet,
}

/// Output of a scaling run.
pub struct MeeScaling {
    inner: ScalingResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MeeStatus {
    match e {
        Error::Domain { .. } | Error::InvalidBracket { .. } => MeeStatus::Domain,
        Error::BracketCap { .. } | Error::NotConverged { .. } => MeeStatus::NotConverged,
        Error::DimensionMismatch { .. } | Error::NotHermitian { .. } | Error::Indefinite | Error::Shape(_) => {
            MeeStatus::Shape
        }
        Error::RankDeficient { .. } => MeeStatus::RankDeficient,
        Error::Config(_) => MeeStatus::Config,
        Error::Trial { source, .. } => status_of(source),
    }
}

struct Failure(MeeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MeeStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, records any error or panic, and converts to a status code.
fn guard<F>(f: F) -> MeeStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MeeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            MeeStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(value);
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn into_handle<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mee_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library name and version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mee_version() -> *const c_char {
    concat!("mimo-ee ", env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mee_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Principal branch of the Lambert W function.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_lambert_w0(x: f64, out: *mut f64) -> MeeStatus {
    guard(|| write_out(out, lambert_w0(x)?))
}

/// Optimum of the scalar efficiency problem `y / (x + alpha)` with
/// `y = m log2(1 + gamma x / m)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_closed_form(alpha: f64, gamma: f64, m: usize, out: *mut MeeClosedForm) -> MeeStatus {
    guard(|| {
        let s = ee_closed_form(alpha, gamma, m)?;
        write_out(
            out,
            MeeClosedForm {
                y_star: s.y_star,
                x_star: s.x_star,
                xi: s.xi,
                stationarity_residual: s.stationarity_residual,
            },
        )
    })
}

/// Parses a JSON configuration document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_config_from_json(json: *const c_char, out: *mut *mut MeeConfig) -> MeeStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(MeeStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let cfg = RunConfig::parse(text)?;
        write_out(out, into_handle(MeeConfig { inner: cfg }))
    })
}

/// # Safety
/// `cfg` must be null or a handle from [`mee_config_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mee_config_free(cfg: *mut MeeConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Normalized overhead derived from the configuration.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_config_alpha(cfg: *const MeeConfig, out: *mut f64) -> MeeStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        write_out(out, cfg.inner.resolved_alpha(&Overrides::default())?)
    })
}

/// Converts a normalized efficiency to bits per Joule for this configuration.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_config_denormalize(cfg: *const MeeConfig, xi: f64, out: *mut f64) -> MeeStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        write_out(out, denormalize_ee(&cfg.inner.system, xi))
    })
}

/// Draws Rayleigh-fading channels for every user of `cfg` from `seed`.
/// The same seed gives the same channels as `mimo-ee ee-point --seed`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_channels_draw(cfg: *const MeeConfig, seed: u64, out: *mut *mut MeeChannels) -> MeeStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        let ch = draw_channels(&cfg.inner.system, &mut ChaCha8Rng::seed_from_u64(seed));
        write_out(out, into_handle(MeeChannels { inner: ch }))
    })
}

/// Builds channels from caller data: `users` matrices of `rx x tx` complex
/// entries, row-major, each entry stored as (re, im). `len` is the number of
/// doubles and must equal `2 * users * rx * tx`.
///
/// # Safety
/// `data` must point to `len` readable doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_channels_from_interleaved(
    tx: usize,
    rx: usize,
    users: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut MeeChannels,
) -> MeeStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let per_user = rx
            .checked_mul(tx)
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure(MeeStatus::Shape, "antenna counts must be at least 1".into()))?;
        let expected = per_user.checked_mul(users).and_then(|n| n.checked_mul(2));
        if expected != Some(len) {
            return Err(Failure(
                MeeStatus::Shape,
                format!("expected 2 * {users} * {rx} * {tx} doubles, got {len}"),
            ));
        }
        let values = std::slice::from_raw_parts(data, len);
        let matrices = values
            .chunks_exact(2 * per_user)
            .map(|chunk| {
                let entries = chunk.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
                ComplexMatrix::from_row_major(rx, tx, entries)
            })
            .collect::<mimo_ee::Result<Vec<_>>>()?;
        let ch = ChannelSet::new(tx, rx, matrices)?;
        write_out(out, into_handle(MeeChannels { inner: ch }))
    })
}

/// # Safety
/// `ch` must be null or a live channel handle.
#[no_mangle]
pub unsafe extern "C" fn mee_channels_free(ch: *mut MeeChannels) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Number of users in `ch`, or 0 if `ch` is null.
///
/// # Safety
/// `ch` must be null or a live channel handle.
#[no_mangle]
pub unsafe extern "C" fn mee_channels_users(ch: *const MeeChannels) -> usize {
    ch.as_ref().map_or(0, |c| c.inner.users())
}

/// Maximizes the chosen efficiency over total transmit power. `tol` is
/// used by [`MeeMethod::Dpc`] only.
///
/// # Safety
/// `ch` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_ee_point(
    ch: *const MeeChannels,
    method: MeeMethod,
    alpha: f64,
    tol: f64,
    out: *mut MeeEePoint,
) -> MeeStatus {
    guard(|| {
        let ch = &borrow(ch, "ch")?.inner;
        let p: EePoint = match method {
            MeeMethod::Dpc => ee_dpc(ch, alpha, tol)?,
            MeeMethod::Upper => ee_upper(ch, alpha)?,
            MeeMethod::Lower => ee_lower(ch, alpha)?,
            MeeMethod::Siso => ee_siso(ch, alpha)?,
        };
        write_out(
            out,
            MeeEePoint {
                q_star: p.q_star,
                rate: p.rate,
                xi: p.xi,
            },
        )
    })
}

/// Sum capacity in bits under total normalized power `q_total`.
///
/// # Safety
/// `ch` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_sum_capacity(
    ch: *const MeeChannels,
    q_total: f64,
    tol: f64,
    max_iter: usize,
    out: *mut f64,
) -> MeeStatus {
    guard(|| {
        let ch = &borrow(ch, "ch")?.inner;
        write_out(out, sum_capacity_dpc(ch, q_total, tol, max_iter)?.rate_bits)
    })
}

/// Runs the `experiment` section of `cfg`. `seed` replaces the configured
/// master seed when `override_seed` is true.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_scaling_run(
    cfg: *const MeeConfig,
    override_seed: bool,
    seed: u64,
    out: *mut *mut MeeScaling,
) -> MeeStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let overrides = Overrides {
            seed: override_seed.then_some(seed),
            ..Overrides::default()
        };
        let spec = cfg.inner.experiment_spec(&overrides)?;
        let result = run_scaling_experiment(&spec)?;
        write_out(out, into_handle(MeeScaling { inner: result }))
    })
}

/// # Safety
/// `s` must be null or a live scaling handle.
#[no_mangle]
pub unsafe extern "C" fn mee_scaling_free(s: *mut MeeScaling) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of grid points, or 0 if `s` is null.
///
/// # Safety
/// `s` must be null or a live scaling handle.
#[no_mangle]
pub unsafe extern "C" fn mee_scaling_len(s: *const MeeScaling) -> usize {
    s.as_ref().map_or(0, |s| s.inner.rows.len())
}

/// Copies grid point `index` into `out`.
///
/// # Safety
/// `s` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_scaling_row(s: *const MeeScaling, index: usize, out: *mut MeeScalingRow) -> MeeStatus {
    guard(|| {
        let rows = &borrow(s, "s")?.inner.rows;
        let r = rows.get(index).ok_or_else(|| {
            Failure(
                MeeStatus::InvalidArgument,
                format!("row {index} out of range for {} rows", rows.len()),
            )
        })?;
        write_out(
            out,
            MeeScalingRow {
                k: r.k,
                mean_xi: r.mean_xi,
                ci_halfwidth: r.ci_halfwidth,
                predictor_asymptotic: r.predictor_asymptotic,
                predictor_finite_k: r.predictor_finite_k,
                ratio_asymptotic: r.ratio_asymptotic,
                ratio_finite_k: r.ratio_finite_k,
                mean_xi_upper: r.mean_xi_upper.unwrap_or(f64::NAN),
                mean_xi_lower: r.mean_xi_lower.unwrap_or(f64::NAN),
            },
        )
    })
}

/// The run as CSV text, identical to the CLI output. Free with
/// [`mee_string_free`].
///
/// # Safety
/// `s` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mee_scaling_csv(s: *const MeeScaling, out: *mut *mut c_char) -> MeeStatus {
    guard(|| {
        let csv = borrow(s, "s")?.inner.to_csv();
        let c = CString::new(csv).map_err(|e| Failure(MeeStatus::InvalidArgument, e.to_string()))?;
        write_out(out, c.into_raw())
    })
}
