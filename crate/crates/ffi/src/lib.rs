//! C interface.
//!
//! Objects are opaque handles returned through out-pointers and released
//! with the matching `pw_*_free`. Every fallible call
//! returns a [`PwStatus`]; on failure a description is available from
//! [`pw_last_error`] on the same thread. Grids are the default fine grid
//! (128 x 128) unless stated otherwise, stored with x varying fastest.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pwave::grid::{ScalarField, WaveField};
use pwave::jnet::{self, JNet};
use pwave::media::{self, PulseSpec};
use pwave::parareal::{parareal, PararealConfig, Variant};
use pwave::solver::{Discretization, Medium};
use pwave::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Stability = 4,
    Numeric = 5,
    Format = 6,
    Config = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwPararealVariant {
    Plain = 0,
    Enhanced = 1,
    Procrustes = 2,
}

/// Wave-speed model on the fine grid, with its coarse restriction.
pub struct PwMedium(Medium);

/// Displacement and velocity on the fine grid.
pub struct PwWaveField(WaveField);

/// Trained correction network.
pub struct PwNet(JNet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PwStatus {
    match e {
        Error::InvalidGrid(_) | Error::Shape(_) => PwStatus::Shape,
        Error::Stability(_) => PwStatus::Stability,
        Error::Parameter(_) | Error::Domain(_) | Error::Region(_) => PwStatus::InvalidArgument,
        Error::Numeric(_) | Error::BlowUp(_) | Error::Diverged { .. } => PwStatus::Numeric,
        Error::Format(_) => PwStatus::Format,
        Error::Config(_) => PwStatus::Config,
        Error::Io(_) => PwStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PwStatus, String)>) -> PwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PwStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (PwStatus, String)>;
}

impl<T> IntoFfi<T> for pwave::Result<T> {
    fn ffi(self) -> Result<T, (PwStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PwStatus, String)> {
    p.as_ref().ok_or_else(|| (PwStatus::NullPointer, format!("{what} is null")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), (PwStatus, String)> {
    if out.is_null() {
        return Err((PwStatus::NullPointer, "output handle pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (PwStatus, String)> {
    if p.is_null() {
        return Err((PwStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn disc() -> Discretization {
    Discretization::default()
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn pw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Number of points per side of the fine grid.
#[no_mangle]
pub extern "C" fn pw_fine_size() -> usize {
    disc().fine_n
}

/// Waveguide model: 0.7 - 0.3 cos(pi x).
///
/// # Safety
///
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_medium_waveguide(out: *mut *mut PwMedium) -> PwStatus {
    guard(|| store(out, PwMedium(media::synth_waveguide_on(disc().fine_grid()).ffi()?)))
}

/// Inclusion model: 0.7 + 0.05 y, plus 0.1 inside 0.2 < x < 0.6, 0.4 < y < 0.6.
///
/// # Safety
///
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_medium_inclusion(out: *mut *mut PwMedium) -> PwStatus {
    guard(|| store(out, PwMedium(media::synth_inclusion_on(disc().fine_grid()).ffi()?)))
}

/// Medium from `len` fine-grid speeds, which must be positive.
///
/// # Safety
///
/// `values` must be null or point to `len` readable doubles; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_medium_from_values(values: *const f64, len: usize, out: *mut *mut PwMedium) -> PwStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        let c = ScalarField::from_vec(disc().fine_grid(), v.to_vec()).ffi()?;
        store(out, PwMedium(Medium::new(c).ffi()?))
    })
}

/// Releases a medium handle.
/// # Safety
///
/// `m` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pw_medium_free(m: *mut PwMedium) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Gaussian pulse `exp(-inv_sigma_sq |x - center|^2)` at rest.
///
/// # Safety
///
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_field_pulse(x: f64, y: f64, inv_sigma_sq: f64, out: *mut *mut PwWaveField) -> PwStatus {
    guard(|| {
        let p = PulseSpec::new((x, y), inv_sigma_sq).ffi()?;
        store(out, PwWaveField(p.field(disc().fine_grid())))
    })
}

/// Field from `len` displacement and `len` velocity values.
///
/// # Safety
///
/// `u` and `v` must each be null or point to `len` readable doubles; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_field_from_values(
    u: *const f64,
    v: *const f64,
    len: usize,
    out: *mut *mut PwWaveField,
) -> PwStatus {
    guard(|| {
        let g = disc().fine_grid();
        let u = ScalarField::from_vec(g, slice(u, len, "u")?.to_vec()).ffi()?;
        let v = ScalarField::from_vec(g, slice(v, len, "v")?.to_vec()).ffi()?;
        store(out, PwWaveField(WaveField::new(u, v).ffi()?))
    })
}

/// Copies the field into two caller buffers of `len` values each.
///
/// # Safety
///
/// `w` must be null or a live handle; `u` and `v` must each be null or point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pw_field_values(w: *const PwWaveField, u: *mut f64, v: *mut f64, len: usize) -> PwStatus {
    guard(|| {
        let w = &deref(w, "field")?.0;
        let n = w.grid().len();
        if len < n {
            return Err((PwStatus::BufferTooSmall, format!("buffers hold {len} values, field has {n}")));
        }
        if u.is_null() || v.is_null() {
            return Err((PwStatus::NullPointer, "output buffer is null".into()));
        }
        ptr::copy_nonoverlapping(w.u.values().as_ptr(), u, n);
        ptr::copy_nonoverlapping(w.v.values().as_ptr(), v, n);
        Ok(())
    })
}

/// Releases a field handle.
/// # Safety
///
/// `w` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pw_field_free(w: *mut PwWaveField) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Fine propagation over `dt_star`.
///
/// # Safety
///
/// Handles must be null or live handles from this library; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_fine_propagate(
    w: *const PwWaveField,
    m: *const PwMedium,
    dt_star: f64,
    out: *mut *mut PwWaveField,
) -> PwStatus {
    guard(|| {
        let r = disc().fine_propagate(&deref(w, "field")?.0, &deref(m, "medium")?.0, dt_star).ffi()?;
        store(out, PwWaveField(r))
    })
}

/// Restriction, coarse propagation over `dt_star` and interpolation back.
///
/// # Safety
///
/// Handles must be null or live handles from this library; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_coarse_propagate(
    w: *const PwWaveField,
    m: *const PwMedium,
    dt_star: f64,
    out: *mut *mut PwWaveField,
) -> PwStatus {
    guard(|| {
        let d = disc();
        let g = d.coarse_propagate(&deref(w, "field")?.0.restricted().ffi()?, &deref(m, "medium")?.0, dt_star).ffi()?;
        store(out, PwWaveField(g.prolonged().ffi()?))
    })
}

/// Coarse step corrected by the network.
///
/// # Safety
///
/// Handles must be null or live handles from this library; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_enhanced_step(
    w: *const PwWaveField,
    m: *const PwMedium,
    net: *const PwNet,
    dt_star: f64,
    out: *mut *mut PwWaveField,
) -> PwStatus {
    guard(|| {
        let r = jnet::enhanced_step_with(
            &disc(),
            &deref(w, "field")?.0,
            &deref(m, "medium")?.0,
            &deref(net, "network")?.0,
            dt_star,
        )
        .ffi()?;
        store(out, PwWaveField(r))
    })
}

/// Wave energy of a field in a medium.
///
/// # Safety
///
/// Handles must be null or live handles from this library; `energy` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_wave_energy(w: *const PwWaveField, m: *const PwMedium, energy: *mut f64) -> PwStatus {
    guard(|| {
        let e = pwave::energy::wave_energy(&deref(w, "field")?.0, deref(m, "medium")?.0.fine()).ffi()?;
        if energy.is_null() {
            return Err((PwStatus::NullPointer, "energy output is null".into()));
        }
        *energy = e;
        Ok(())
    })
}

/// Energy of `u - reference` relative to the energy of `reference`.
///
/// # Safety
///
/// Handles must be null or live handles from this library; `error` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_rel_energy_error(
    u: *const PwWaveField,
    reference: *const PwWaveField,
    m: *const PwMedium,
    error: *mut f64,
) -> PwStatus {
    guard(|| {
        let e = pwave::energy::rel_energy_error(
            &deref(u, "field")?.0,
            &deref(reference, "reference")?.0,
            deref(m, "medium")?.0.fine(),
        )
        .ffi()?;
        if error.is_null() {
            return Err((PwStatus::NullPointer, "error output is null".into()));
        }
        *error = e;
        Ok(())
    })
}

/// Loads a network checkpoint from a NUL-terminated path.
///
/// # Safety
///
/// `path` must be null or a NUL-terminated string; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_net_load(path: *const c_char, out: *mut *mut PwNet) -> PwStatus {
    guard(|| {
        if path.is_null() {
            return Err((PwStatus::NullPointer, "path is null".into()));
        }
        let p = CStr::from_ptr(path).to_str().map_err(|_| (PwStatus::InvalidArgument, "path is not UTF-8".into()))?;
        store(out, PwNet(jnet::read_checkpoint(p).ffi()?))
    })
}

/// Time step the network was trained for, or NaN for a null handle.
///
/// # Safety
///
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pw_net_dt_star(net: *const PwNet) -> f64 {
    net.as_ref().map_or(f64::NAN, |n| n.0.dt_star())
}

/// Releases a network handle.
/// # Safety
///
/// `net` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pw_net_free(net: *mut PwNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Runs parareal for `windows` windows of `dt_star` and `iterations`
/// iterations. Writes the relative energy error of iterate `k` at window
/// `n` to `errors[k * (windows + 1) + n]`; rows after a blow-up are NaN.
/// `errors_len` must be at least `(iterations + 1) * (windows + 1)`. `net`
/// is required for the enhanced variant and ignored otherwise. `blowup`, if
/// not null, receives the first diverging iteration or -1.
///
/// # Safety
///
/// Handles must be null or live handles from this library; `errors` must be null or point to `errors_len` writable doubles; `blowup` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_parareal(
    w0: *const PwWaveField,
    m: *const PwMedium,
    variant: PwPararealVariant,
    net: *const PwNet,
    dt_star: f64,
    windows: usize,
    iterations: usize,
    errors: *mut f64,
    errors_len: usize,
    blowup: *mut i64,
) -> PwStatus {
    guard(|| {
        let w0 = &deref(w0, "field")?.0;
        let m = &deref(m, "medium")?.0;
        let need = (iterations + 1).saturating_mul(windows + 1);
        if errors.is_null() {
            return Err((PwStatus::NullPointer, "error buffer is null".into()));
        }
        if errors_len < need {
            return Err((PwStatus::BufferTooSmall, format!("error buffer holds {errors_len} values, need {need}")));
        }
        let v = match variant {
            PwPararealVariant::Plain => Variant::Plain,
            PwPararealVariant::Procrustes => Variant::Procrustes,
            PwPararealVariant::Enhanced => Variant::Enhanced(&deref(net, "network")?.0),
        };
        let cfg = PararealConfig::new(dt_star, windows, iterations);
        let run = parareal(w0, m, v, &cfg).ffi()?;
        let out = std::slice::from_raw_parts_mut(errors, need);
        out.fill(f64::NAN);
        for (k, row) in run.errors.iter().enumerate() {
            out[k * (windows + 1)..k * (windows + 1) + row.len()].copy_from_slice(row);
        }
        if !blowup.is_null() {
            *blowup = run.blowup.map_or(-1, |k| k as i64);
        }
        Ok(())
    })
}
