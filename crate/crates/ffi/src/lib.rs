//! C ABI for the boxdyn engines.
//!
//! Every function returns a [`BoxdynStatus`]; results come back through out
//! pointers. On failure the message of the most recent error on the calling
//! thread is available from [`boxdyn_last_error_message`]. Objects are opaque
//! handles created by `boxdyn_*_new`/constructor functions and released with
//! the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use boxdyn::analytic::{basis_physical, gaussian_closed_form, GaussianParams};
use boxdyn::model::{BasisIndex, Grid, PhysicalParams, WallTrajectory, WaveField};
use boxdyn::observables::{current_basis_closed, weak_momentum};
use boxdyn::scenario::{run_scenario, ScenarioConfig, ScenarioKind};
use boxdyn::theta::{self, ThetaArgument};
use boxdyn::Error;
use num_complex::Complex64;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxdynStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    InvalidArgument = 1,
    /// Configuration or parameter error.
    Config = 2,
    /// Engine failure: convergence, tolerance, node, domain.
    Engine = 3,
    Io = 4,
    /// Internal panic; the handle arguments should be considered unusable.
    Panic = 5,
}

/// Mass, ħ and the speed of light. A null pointer means atomic units.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BoxdynParams {
    pub mass: f64,
    pub hbar: f64,
    pub c: f64,
}

/// Opaque wall law.
pub struct BoxdynTrajectory(WallTrajectory);

/// Opaque sampled wavefunction on a physical grid.
pub struct BoxdynField(WaveField);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BoxdynStatus {
    match e.exit_code() {
        2 => BoxdynStatus::Config,
        4 => BoxdynStatus::Io,
        _ => match e {
            Error::InvalidParameter(_) | Error::UnsupportedTrajectory { .. } | Error::OddParity(_) => {
                BoxdynStatus::Config
            }
            _ => BoxdynStatus::Engine,
        },
    }
}

struct NullPointer(&'static str);

enum Failure {
    Null(&'static str),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<NullPointer> for Failure {
    fn from(n: NullPointer) -> Self {
        Failure::Null(n.0)
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> BoxdynStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BoxdynStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("invalid argument: {what}"));
            BoxdynStatus::InvalidArgument
        }
        Ok(Err(Failure::Engine(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            BoxdynStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, NullPointer> {
    p.as_mut().ok_or(NullPointer(name))
}

unsafe fn input<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, NullPointer> {
    p.as_ref().ok_or(NullPointer(name))
}

unsafe fn string<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, NullPointer> {
    if p.is_null() {
        return Err(NullPointer(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| NullPointer(name))
}

unsafe fn params(p: *const BoxdynParams) -> Result<PhysicalParams, Error> {
    match p.as_ref() {
        None => Ok(PhysicalParams::default()),
        Some(p) => PhysicalParams::new(p.mass, p.hbar, p.c),
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn boxdyn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn boxdyn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

type ThetaFn = fn(ThetaArgument) -> boxdyn::Result<Complex64>;

unsafe fn theta_call(f: ThetaFn, z_re: f64, z_im: f64, k_re: f64, k_im: f64, re: *mut f64, im: *mut f64) -> BoxdynStatus {
    guard(|| {
        let (re, im) = (out(re, "out_re")?, out(im, "out_im")?);
        let v = f(ThetaArgument::new(Complex64::new(z_re, z_im), Complex64::new(k_re, k_im))?)?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// θ₂(z, κ), choosing the faster series.
///
/// # Safety
/// `out_re` and `out_im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_theta2(
    z_re: f64,
    z_im: f64,
    kappa_re: f64,
    kappa_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> BoxdynStatus {
    theta_call(theta::theta2, z_re, z_im, kappa_re, kappa_im, out_re, out_im)
}

/// θ₂(z, κ) through the Jacobi transformation.
///
/// # Safety
/// `out_re` and `out_im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_jacobi_transform_theta2(
    z_re: f64,
    z_im: f64,
    kappa_re: f64,
    kappa_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> BoxdynStatus {
    theta_call(theta::jacobi_transform_theta2, z_re, z_im, kappa_re, kappa_im, out_re, out_im)
}

/// θ₄(z, κ).
///
/// # Safety
/// `out_re` and `out_im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_theta4(
    z_re: f64,
    z_im: f64,
    kappa_re: f64,
    kappa_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> BoxdynStatus {
    theta_call(theta::theta4, z_re, z_im, kappa_re, kappa_im, out_re, out_im)
}

unsafe fn new_trajectory(t: WallTrajectory, out_ptr: *mut *mut BoxdynTrajectory) -> BoxdynStatus {
    guard(|| {
        let slot = out(out_ptr, "out")?;
        t.validate()?;
        *slot = Box::into_raw(Box::new(BoxdynTrajectory(t)));
        Ok(())
    })
}

/// Walls fixed at width `l0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_trajectory_static(l0: f64, out: *mut *mut BoxdynTrajectory) -> BoxdynStatus {
    new_trajectory(WallTrajectory::Static { l0 }, out)
}

/// `L(t) = l0 + q t`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_trajectory_linear(l0: f64, q: f64, out: *mut *mut BoxdynTrajectory) -> BoxdynStatus {
    new_trajectory(WallTrajectory::Linear { l0, q }, out)
}

/// `L(t) = l0 + q t (1 − e^{−βt})`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_trajectory_smooth_turn_on(
    l0: f64,
    q: f64,
    beta: f64,
    out: *mut *mut BoxdynTrajectory,
) -> BoxdynStatus {
    new_trajectory(WallTrajectory::SmoothTurnOn { l0, q, beta }, out)
}

/// Expands at speed `q` until `period / 2`, then contracts.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_trajectory_piecewise_reversal(
    l0: f64,
    q: f64,
    period: f64,
    out: *mut *mut BoxdynTrajectory,
) -> BoxdynStatus {
    new_trajectory(WallTrajectory::PiecewiseReversal { l0, q, period }, out)
}

/// Box width at time `t`.
///
/// # Safety
/// `traj` must come from a trajectory constructor; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_trajectory_length(
    traj: *const BoxdynTrajectory,
    t: f64,
    out: *mut f64,
) -> BoxdynStatus {
    guard(|| {
        let traj = input(traj, "traj")?;
        *self::out(out, "out")? = traj.0.length(t)?;
        Ok(())
    })
}

/// Releases a trajectory; null is ignored.
///
/// # Safety
/// `traj` must be null or come from a trajectory constructor, and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_trajectory_free(traj: *mut BoxdynTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Closed-form current of even moving-wall basis state `n` at `(x, t)`.
///
/// # Safety
/// `traj` must come from a trajectory constructor; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_current_basis_closed(
    traj: *const BoxdynTrajectory,
    n: usize,
    x: f64,
    t: f64,
    out: *mut f64,
) -> BoxdynStatus {
    guard(|| {
        let traj = input(traj, "traj")?;
        *self::out(out, "out")? = current_basis_closed(BasisIndex::even(n), &traj.0, x, t)?;
        Ok(())
    })
}

unsafe fn new_field<F>(traj: *const BoxdynTrajectory, t: f64, n_points: usize, out_ptr: *mut *mut BoxdynField, make: F) -> BoxdynStatus
where
    F: FnOnce(&WallTrajectory, &Grid) -> boxdyn::Result<WaveField>,
{
    guard(|| {
        let traj = input(traj, "traj")?;
        let slot = out(out_ptr, "out")?;
        let grid = Grid::physical(n_points, &traj.0, t)?;
        *slot = Box::into_raw(Box::new(BoxdynField(make(&traj.0, &grid)?)));
        Ok(())
    })
}

/// Even moving-wall basis state `n` at time `t` on `n_points` samples
/// spanning the box.
///
/// # Safety
/// `traj` must come from a trajectory constructor; `params` may be null;
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_field_basis_physical(
    traj: *const BoxdynTrajectory,
    params: *const BoxdynParams,
    n: usize,
    t: f64,
    n_points: usize,
    out: *mut *mut BoxdynField,
) -> BoxdynStatus {
    let p = match self::params(params) {
        Ok(p) => p,
        Err(e) => return guard(|| Err(e.into())),
    };
    new_field(traj, t, n_points, out, |traj, g| basis_physical(BasisIndex::even(n), traj, t, g, &p))
}

/// Closed-form evolution of the centred Gaussian of width `d`.
///
/// # Safety
/// As [`boxdyn_field_basis_physical`].
#[no_mangle]
pub unsafe extern "C" fn boxdyn_field_gaussian(
    traj: *const BoxdynTrajectory,
    params: *const BoxdynParams,
    d: f64,
    t: f64,
    n_points: usize,
    out: *mut *mut BoxdynField,
) -> BoxdynStatus {
    let p = match self::params(params) {
        Ok(p) => p,
        Err(e) => return guard(|| Err(e.into())),
    };
    new_field(traj, t, n_points, out, |traj, g| gaussian_closed_form(GaussianParams::new(d)?, traj, t, g, &p))
}

/// Number of samples in `field`.
///
/// # Safety
/// `field` must come from a field constructor; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_field_len(field: *const BoxdynField, out: *mut usize) -> BoxdynStatus {
    guard(|| {
        *self::out(out, "out")? = input(field, "field")?.0.samples.len();
        Ok(())
    })
}

/// Copies positions and samples into caller buffers of length `len`, which
/// must equal the field length. Any of the three buffers may be null.
///
/// # Safety
/// Non-null buffers must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_field_copy(
    field: *const BoxdynField,
    x: *mut f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> BoxdynStatus {
    guard(|| {
        let f = &input(field, "field")?.0;
        if len != f.samples.len() {
            return Err(Error::InvalidParameter(format!("buffer length {len} != field length {}", f.samples.len())).into());
        }
        for (i, (&xi, s)) in f.grid.x().iter().zip(&f.samples).enumerate() {
            if !x.is_null() {
                *x.add(i) = xi;
            }
            if !re.is_null() {
                *re.add(i) = s.re;
            }
            if !im.is_null() {
                *im.add(i) = s.im;
            }
        }
        Ok(())
    })
}

/// Weak momentum value `Re P_w` of `field` at `x`.
///
/// # Safety
/// `field` must come from a field constructor; `params` may be null; `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_field_weak_momentum(
    field: *const BoxdynField,
    params: *const BoxdynParams,
    x: f64,
    out: *mut f64,
) -> BoxdynStatus {
    guard(|| {
        let p = self::params(params)?;
        let f = &input(field, "field")?.0;
        *self::out(out, "out")? = weak_momentum(f, x, &p)?;
        Ok(())
    })
}

/// Releases a field; null is ignored.
///
/// # Safety
/// `field` must be null or come from a field constructor, and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_field_free(field: *mut BoxdynField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Runs a scenario from TOML text, writing outputs to `out_dir`.
/// `passed` receives 1 when every check passed and 0 otherwise.
///
/// # Safety
/// The strings must be NUL-terminated; `passed` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn boxdyn_run_scenario(
    scenario: *const c_char,
    config_toml: *const c_char,
    out_dir: *const c_char,
    passed: *mut c_int,
) -> BoxdynStatus {
    guard(|| {
        let kind: ScenarioKind = string(scenario, "scenario")?.parse()?;
        let cfg = ScenarioConfig::from_toml_str(string(config_toml, "config_toml")?, &[])?;
        let dir = string(out_dir, "out_dir")?;
        let passed = out(passed, "passed")?;
        let outcome = run_scenario(kind, &cfg, Path::new(dir))?;
        *passed = c_int::from(outcome.passed());
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn statuses_follow_exit_codes() {
        assert_eq!(status_of(&Error::Config("x".into())), BoxdynStatus::Config);
        assert_eq!(status_of(&Error::Tolerance("x".into())), BoxdynStatus::Engine);
        assert_eq!(status_of(&Error::InvalidParameter("x".into())), BoxdynStatus::Config);
        let io = Error::Io(std::io::Error::other("x"));
        assert_eq!(status_of(&io), BoxdynStatus::Io);
    }

    #[test]
    fn panics_become_status_codes() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, BoxdynStatus::Panic);
        let msg = unsafe { CStr::from_ptr(boxdyn_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
    }

    #[test]
    fn null_out_pointer_is_rejected() {
        let s = unsafe { boxdyn_trajectory_linear(100.0, 1e-4, ptr::null_mut()) };
        assert_eq!(s, BoxdynStatus::InvalidArgument);
    }
}
