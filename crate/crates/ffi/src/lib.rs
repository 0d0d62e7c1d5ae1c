//! C ABI over the `geoflow` library.
//!
//! Objects cross the boundary as opaque handles created by `gf_*_new`-style
//! constructors and released with the matching `gf_*_free`. Every fallible
//! call returns a [`GfStatus`]; on failure the message is kept per thread
//! and can be fetched with [`gf_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use geoflow::cascade::{run_cascade, CascadeOptions, CascadeReport, Verdict};
use geoflow::flow::{integrate, Controls, PhaseState, SystemSpec, Trajectory};
use geoflow::{Error, FourierField, TorusLattice};
use num_complex::Complex64;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Obstruction = 3,
    Reality = 4,
    Integration = 5,
    Metric = 6,
    Panic = 7,
}

/// Cascade outcome as seen from C.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfVerdict {
    IntegralFound = 0,
    ObstructionHit = 1,
    RealityFailed = 2,
}

/// A truncated Fourier series on a torus.
pub struct GfField(FourierField);

/// Result of a cascade run.
pub struct GfCascadeReport(CascadeReport);

/// A uniformly sampled trajectory.
pub struct GfTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GfStatus {
    match e {
        Error::Obstruction { .. } | Error::Unsolvable { .. } => GfStatus::Obstruction,
        Error::Reality { .. } | Error::Inconsistent(_) => GfStatus::Reality,
        Error::Integration { .. } => GfStatus::Integration,
        Error::Metric { .. } => GfStatus::Metric,
        _ => GfStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), GfStatus>) -> GfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            GfStatus::Panic
        }
    }
}

fn check<T>(r: geoflow::Result<T>) -> Result<T, GfStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn non_null<'a, T>(p: *const T) -> Result<&'a T, GfStatus> {
    if p.is_null() {
        set_error("null pointer argument".into());
        return Err(GfStatus::NullPointer);
    }
    // SAFETY: the caller promises `p` came from this library and is still live.
    Ok(unsafe { &*p })
}

fn out_ptr<T>(out: *mut *mut T, value: T) -> Result<(), GfStatus> {
    if out.is_null() {
        set_error("null output pointer".into());
        return Err(GfStatus::NullPointer);
    }
    // SAFETY: `out` is non-null and points to writable storage per the contract.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn out_string(out: *mut *mut c_char, s: String) -> Result<(), GfStatus> {
    if out.is_null() {
        set_error("null output pointer".into());
        return Err(GfStatus::NullPointer);
    }
    let c = CString::new(s).map_err(|_| {
        set_error("string contains an interior NUL".into());
        GfStatus::InvalidInput
    })?;
    // SAFETY: as in `out_ptr`.
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn in_str<'a>(s: *const c_char) -> Result<&'a str, GfStatus> {
    if s.is_null() {
        set_error("null string argument".into());
        return Err(GfStatus::NullPointer);
    }
    // SAFETY: the caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(s) }.to_str().map_err(|_| {
        set_error("string is not valid UTF-8".into());
        GfStatus::InvalidInput
    })
}

unsafe fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Free with [`gf_string_free`].
#[no_mangle]
pub extern "C" fn gf_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn gf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a field from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_field_from_json(json: *const c_char, out: *mut *mut GfField) -> GfStatus {
    guard(|| {
        let text = in_str(json)?;
        let parsed = serde_json::from_str(text).map_err(|e| {
            set_error(e.to_string());
            GfStatus::InvalidInput
        })?;
        let field = check(FourierField::from_json(&parsed))?;
        out_ptr(out, GfField(field))
    })
}

/// `mean + amp · cos(2πk x/Lx + 2πl y/Ly)` on a lattice with the given band limit.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gf_field_cosine(
    lx: f64,
    ly: f64,
    band: u32,
    k: i32,
    l: i32,
    amp: f64,
    mean: f64,
    out: *mut *mut GfField,
) -> GfStatus {
    guard(|| {
        let lattice = check(TorusLattice::new(lx, ly, band))?;
        let field = check(FourierField::cosine(lattice, k, l, amp))?.add_constant(mean);
        out_ptr(out, GfField(field))
    })
}

/// Sum of two fields on the same torus.
///
/// # Safety
/// `a`, `b` must be live field handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_field_add(a: *const GfField, b: *const GfField, out: *mut *mut GfField) -> GfStatus {
    guard(|| {
        let (a, b) = (non_null(a)?, non_null(b)?);
        if !a.0.lattice().same_torus(b.0.lattice()) {
            set_error(Error::LatticeMismatch.to_string());
            return Err(GfStatus::InvalidInput);
        }
        out_ptr(out, GfField(&a.0 + &b.0))
    })
}

/// Value at `(x, y)`.
///
/// # Safety
/// `field` must be live; `re`, `im` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_field_evaluate(
    field: *const GfField,
    x: f64,
    y: f64,
    re: *mut f64,
    im: *mut f64,
) -> GfStatus {
    guard(|| {
        let f = non_null(field)?;
        if re.is_null() || im.is_null() {
            set_error("null output pointer".into());
            return Err(GfStatus::NullPointer);
        }
        let v = f.0.evaluate(x, y);
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// JSON form of a field. Free with [`gf_string_free`].
///
/// # Safety
/// `field` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_field_to_json(field: *const GfField, out: *mut *mut c_char) -> GfStatus {
    guard(|| {
        let f = non_null(field)?;
        let s = check(serde_json::to_string(&f.0.to_json()).map_err(Error::from))?;
        out_string(out, s)
    })
}

/// # Safety
/// `field` must be NULL or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn gf_field_free(field: *mut GfField) {
    free_box(field);
}

/// Run the cascade of degree `k` at energy `energy` with leading coefficient
/// `a_re + i a_im` and default options.
///
/// # Safety
/// `metric` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_cascade_run(
    metric: *const GfField,
    k: usize,
    energy: f64,
    a_re: f64,
    a_im: f64,
    out: *mut *mut GfCascadeReport,
) -> GfStatus {
    guard(|| {
        let g = non_null(metric)?;
        let r = check(run_cascade(&g.0, k, energy, Complex64::new(a_re, a_im), &CascadeOptions::default()))?;
        out_ptr(out, GfCascadeReport(r))
    })
}

/// Verdict of a cascade; `step` receives the obstructed index when relevant.
///
/// # Safety
/// `report` must be live; `verdict`, `step` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_cascade_verdict(
    report: *const GfCascadeReport,
    verdict: *mut GfVerdict,
    step: *mut usize,
) -> GfStatus {
    guard(|| {
        let r = non_null(report)?;
        if verdict.is_null() || step.is_null() {
            set_error("null output pointer".into());
            return Err(GfStatus::NullPointer);
        }
        let (v, n) = match r.0.verdict {
            Verdict::IntegralFound => (GfVerdict::IntegralFound, 0),
            Verdict::ObstructionHit { n } => (GfVerdict::ObstructionHit, n),
            Verdict::RealityFailed => (GfVerdict::RealityFailed, 0),
        };
        *verdict = v;
        *step = n;
        Ok(())
    })
}

/// Grid sup-norm of the closing residual, or a negative value when the
/// cascade stopped early.
///
/// # Safety
/// `report` must be live.
#[no_mangle]
pub unsafe extern "C" fn gf_cascade_closing_norm(report: *const GfCascadeReport) -> f64 {
    if report.is_null() {
        return -1.0;
    }
    (*report).0.closing_norms.map_or(-1.0, |n| n.grid_sup)
}

/// Coefficient `a_n` of the cascade as a new field handle.
///
/// # Safety
/// `report` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_cascade_coefficient(
    report: *const GfCascadeReport,
    n: usize,
    out: *mut *mut GfField,
) -> GfStatus {
    guard(|| {
        let r = non_null(report)?;
        let a = r.0.coefficients.get(&n).ok_or_else(|| {
            set_error(format!("coefficient a_{n} was not computed"));
            GfStatus::InvalidInput
        })?;
        out_ptr(out, GfField(a.clone()))
    })
}

/// JSON report. Free with [`gf_string_free`].
///
/// # Safety
/// `report` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_cascade_report_json(report: *const GfCascadeReport, out: *mut *mut c_char) -> GfStatus {
    guard(|| {
        let r = non_null(report)?;
        out_string(out, r.0.to_json().to_string())
    })
}

/// # Safety
/// `report` must be NULL or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn gf_cascade_report_free(report: *mut GfCascadeReport) {
    free_box(report);
}

/// Integrate the geodesic flow of `metric` (magnetic when `field` is not NULL)
/// from `state = [x, y, px, py]` over `[0, duration]`.
///
/// # Safety
/// `metric` must be live, `field` NULL or live, `state` four readable doubles,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_simulate(
    metric: *const GfField,
    field: *const GfField,
    state: *const f64,
    duration: f64,
    rtol: f64,
    atol: f64,
    samples: usize,
    out: *mut *mut GfTrajectory,
) -> GfStatus {
    guard(|| {
        let g = non_null(metric)?;
        let b = if field.is_null() { None } else { Some((*field).0.clone()) };
        let s = std::slice::from_raw_parts(non_null(state)?, 4);
        let spec = check(SystemSpec::new(g.0.clone(), b))?;
        let controls = Controls { rtol, atol, samples, ..Controls::default() };
        let traj = check(integrate(&spec, PhaseState::new(s[0], s[1], s[2], s[3]), duration, &controls, &[]))?;
        out_ptr(out, GfTrajectory(traj))
    })
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gf_trajectory_len(traj: *const GfTrajectory) -> usize {
    if traj.is_null() {
        0
    } else {
        (*traj).0.len()
    }
}

/// Sample `i` as `[t, x, y, px, py, H]`.
///
/// # Safety
/// `traj` must be live and `row` six writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gf_trajectory_sample(traj: *const GfTrajectory, i: usize, row: *mut f64) -> GfStatus {
    guard(|| {
        let t = &non_null(traj)?.0;
        if row.is_null() {
            set_error("null output pointer".into());
            return Err(GfStatus::NullPointer);
        }
        if i >= t.len() {
            set_error(format!("sample {i} out of range 0..{}", t.len()));
            return Err(GfStatus::InvalidInput);
        }
        let s = t.states[i];
        let h = t.observable("H").map_or(f64::NAN, |v| v[i]);
        let out = std::slice::from_raw_parts_mut(row, 6);
        out.copy_from_slice(&[t.times[i], s.x, s.y, s.px, s.py, h]);
        Ok(())
    })
}

/// `max |H(t) − H(0)|` over the samples, or NaN for NULL.
///
/// # Safety
/// `traj` must be NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gf_trajectory_energy_drift(traj: *const GfTrajectory) -> f64 {
    if traj.is_null() {
        return f64::NAN;
    }
    (*traj).0.drift("H").unwrap_or(f64::NAN)
}

/// CSV text of the trajectory. Free with [`gf_string_free`].
///
/// # Safety
/// `traj` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_trajectory_csv(traj: *const GfTrajectory, out: *mut *mut c_char) -> GfStatus {
    guard(|| {
        let t = non_null(traj)?;
        out_string(out, t.0.to_csv())
    })
}

/// # Safety
/// `traj` must be NULL or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn gf_trajectory_free(traj: *mut GfTrajectory) {
    free_box(traj);
}
