//! C interface to `equivar`.
//!
//! Actions are opaque handles created by [`eqv_action_load`] and released by
//! [`eqv_action_free`]. Every function returns an [`EqvStatus`]; the message
//! of the last failure on the calling thread is available through
//! [`eqv_last_error`].

use equivar::amplitude::amplitude;
use equivar::asymptotics::{brute_force_i, leading_coefficient_l0, QuadratureConfig};
use equivar::{load_action, Error, GroupActionSpec};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    UnknownAction = 3,
    UnregisteredAmplitude = 4,
    Domain = 5,
    NotCritical = 6,
    Degenerate = 7,
    ResolutionInsufficient = 8,
    NonConvergence = 9,
    Invalid = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Opaque action handle.
pub struct EqvAction {
    spec: GroupActionSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> EqvStatus {
    match e {
        Error::UnknownAction(_) => EqvStatus::UnknownAction,
        Error::UnregisteredAmplitude(..) => EqvStatus::UnregisteredAmplitude,
        Error::UnknownChart(_) | Error::OutsideDomain(_) | Error::Domain(_) => EqvStatus::Domain,
        Error::NotCritical(_) => EqvStatus::NotCritical,
        Error::DegenerateTransversal { .. } | Error::RankDeficient { .. } | Error::DegenerateFit(_) => EqvStatus::Degenerate,
        Error::ResolutionInsufficient { .. } => EqvStatus::ResolutionInsufficient,
        Error::NonConvergence(_) => EqvStatus::NonConvergence,
        Error::Unsupported(_) | Error::Invalid(_) => EqvStatus::Invalid,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EqvStatus, String)>) -> EqvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EqvStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic in equivar".into());
            EqvStatus::Panic
        }
    }
}

fn lib(e: Error) -> (EqvStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (EqvStatus, String)> {
    if p.is_null() {
        return Err((EqvStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (EqvStatus::InvalidString, "string is not UTF-8".into()))
}

unsafe fn handle<'a>(a: *const EqvAction) -> Result<&'a EqvAction, (EqvStatus, String)> {
    a.as_ref().ok_or((EqvStatus::NullPointer, "null action handle".into()))
}

fn out_ptr<T>(p: *mut T) -> Result<(), (EqvStatus, String)> {
    if p.is_null() {
        Err((EqvStatus::NullPointer, "null output pointer".into()))
    } else {
        Ok(())
    }
}

/// Loads a catalogue action by name into `*out`.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqv_action_load(name: *const c_char, out: *mut *mut EqvAction) -> EqvStatus {
    guard(|| {
        out_ptr(out)?;
        let name = read_str(name)?;
        let spec = load_action(name).map_err(lib)?;
        *out = Box::into_raw(Box::new(EqvAction { spec }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `a` must come from [`eqv_action_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eqv_action_free(a: *mut EqvAction) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Writes `n`, `d` and `kappa` of the action.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eqv_action_dims(a: *const EqvAction, n: *mut u32, d: *mut u32, kappa: *mut u32) -> EqvStatus {
    guard(|| {
        let a = handle(a)?;
        out_ptr(n)?;
        out_ptr(d)?;
        out_ptr(kappa)?;
        *n = a.spec.manifold_dim as u32;
        *d = a.spec.group_dim as u32;
        *kappa = a.spec.kappa as u32;
        Ok(())
    })
}

/// Leading coefficient `L0` for a registered amplitude.
///
/// # Safety
/// All pointers must be valid; `amp` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn eqv_leading_coefficient(a: *const EqvAction, amp: *const c_char, re: *mut f64, im: *mut f64) -> EqvStatus {
    guard(|| {
        let a = handle(a)?;
        out_ptr(re)?;
        out_ptr(im)?;
        let amp = amplitude(a.spec.name, read_str(amp)?).map_err(lib)?;
        let cfg = QuadratureConfig::for_action(&a.spec);
        let v = leading_coefficient_l0(&a.spec, &amp, &cfg).map_err(lib)?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// Brute-force `I(mu)` for a registered amplitude.
///
/// # Safety
/// All pointers must be valid; `amp` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn eqv_integral(a: *const EqvAction, amp: *const c_char, mu: f64, re: *mut f64, im: *mut f64) -> EqvStatus {
    guard(|| {
        let a = handle(a)?;
        out_ptr(re)?;
        out_ptr(im)?;
        let amp = amplitude(a.spec.name, read_str(amp)?).map_err(lib)?;
        let cfg = QuadratureConfig::for_action(&a.spec);
        let v = brute_force_i(&a.spec, &amp, mu, &cfg).map_err(lib)?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// Phase `psi = eta(X~)` at a point of chart `chart`.
///
/// # Safety
/// `q` and `p` must hold `n` values, `s` `d` values; `chart` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn eqv_phase(
    a: *const EqvAction,
    chart: *const c_char,
    q: *const f64,
    p: *const f64,
    s: *const f64,
    out: *mut f64,
) -> EqvStatus {
    guard(|| {
        let a = handle(a)?;
        out_ptr(out)?;
        if q.is_null() || p.is_null() || s.is_null() {
            return Err((EqvStatus::NullPointer, "null coordinate array".into()));
        }
        let (n, d) = (a.spec.manifold_dim, a.spec.group_dim);
        let pt = equivar::PhasePoint::new(
            read_str(chart)?,
            std::slice::from_raw_parts(q, n).to_vec(),
            std::slice::from_raw_parts(p, n).to_vec(),
            std::slice::from_raw_parts(s, d).to_vec(),
        );
        *out = equivar::geometry::phase(&a.spec, &pt).map_err(lib)?;
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated).
///
/// # Safety
/// `buf` must have room for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn eqv_last_error(buf: *mut c_char, len: usize) -> EqvStatus {
    if buf.is_null() {
        return EqvStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if bytes.len() + 1 > len {
            return EqvStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
        *buf.add(bytes.len()) = 0;
        EqvStatus::Ok
    })
}
