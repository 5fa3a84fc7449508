//! C ABI for the gradiometer toolkit: opaque handles, status codes and flat
//! result structs, suitable for binding from other languages. The header is
//! generated into `include/gradiometer.h` at build time.
//!
//! Conventions: functions return [`GradiometerStatus`]; outputs go through
//! pointers; `gradiometer_last_error_message` describes the most recent
//! failure on the calling thread. Handles are created and released by the
//! paired `_new`/`_free` functions and must not be shared across threads
//! while being mutated.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::path::Path;

use gradiometer::config::{Manifest, RunConfig};
use gradiometer::ellipse::{fit_ellipse_with, FitOptions};
use gradiometer::error::Error;
use gradiometer::ledger::SensitivityLedger;
use gradiometer::pipeline::{allan_deviation, AllanMode};
use gradiometer::sim::simulate_run;
use gradiometer::PhysicsConfig;

/// Status of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradiometerStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidArgument = -2,
    ConfigError = -3,
    IoError = -4,
    FitFailed = -5,
    InsufficientData = -6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error").expect("static"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
}

fn status_of(error: &Error) -> GradiometerStatus {
    match error {
        Error::Config(_) | Error::Domain(_) | Error::UnknownParameter(_) => {
            GradiometerStatus::ConfigError
        }
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => GradiometerStatus::IoError,
        Error::NoConvergence(_)
        | Error::DegenerateWindow { .. }
        | Error::DegenerateConic
        | Error::NotConverged(_)
        | Error::IllConditioned(_)
        | Error::NoMinimumInInterval(_, _)
        | Error::MisalignedTraces(_)
        | Error::TiltOutOfRange(_) => GradiometerStatus::FitFailed,
        Error::TooFewPoints { .. }
        | Error::SeriesTooShort { .. }
        | Error::NoPairs
        | Error::GroupTooSmall { .. }
        | Error::ZeroSignal(_)
        | Error::ConstantSeries(_) => GradiometerStatus::InsufficientData,
    }
}

fn fail(error: &Error) -> GradiometerStatus {
    set_error(&error.to_string());
    status_of(error)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gradiometer_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent error on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gradiometer_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opaque physics configuration handle.
pub struct GradiometerPhysics(PhysicsConfig);

/// New handle with the default instrument parameters.
#[no_mangle]
pub extern "C" fn gradiometer_physics_new() -> *mut GradiometerPhysics {
    Box::into_raw(Box::new(GradiometerPhysics(PhysicsConfig::default())))
}

/// Releases a physics handle. NULL is a no-op.
///
/// # Safety
/// `handle` must come from `gradiometer_physics_new` and must not be used
/// after this call.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_physics_free(handle: *mut GradiometerPhysics) {
    if !handle.is_null() {
        // Safety: the handle came from gradiometer_physics_new and is
        // released exactly once by contract.
        drop(unsafe { Box::from_raw(handle) });
    }
}

unsafe fn physics_ref<'a>(handle: *const GradiometerPhysics) -> Option<&'a PhysicsConfig> {
    handle.as_ref().map(|h| &h.0)
}

fn field_mut<'a>(config: &'a mut PhysicsConfig, key: &str) -> Option<&'a mut f64> {
    Some(match key {
        "k_e" => &mut config.k_e,
        "t_sep" => &mut config.t_sep,
        "t_a" => &mut config.t_a,
        "v_u" => &mut config.v_u,
        "v_l" => &mut config.v_l,
        "dz" => &mut config.dz,
        "latitude" => &mut config.latitude,
        "omega_earth" => &mut config.omega_earth,
        "alpha_zeeman" => &mut config.alpha_zeeman,
        "v_r" => &mut config.v_r,
        "g" => &mut config.g,
        "b0_per_amp" => &mut config.b0_per_amp,
        "pulse_tau" => &mut config.pulse_tau,
        "delta_b" => &mut config.delta_b,
        _ => return None,
    })
}

/// Sets one named physics field (keys match the config-file keys).
///
/// # Safety
/// `handle` must come from `gradiometer_physics_new`; `key` must be a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_physics_set(
    handle: *mut GradiometerPhysics,
    key: *const c_char,
    value: f64,
) -> GradiometerStatus {
    let (Some(handle), false) = (handle.as_mut(), key.is_null()) else {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    };
    let Ok(key) = CStr::from_ptr(key).to_str() else {
        set_error("key is not UTF-8");
        return GradiometerStatus::InvalidArgument;
    };
    match field_mut(&mut handle.0, key) {
        Some(slot) => {
            *slot = value;
            GradiometerStatus::Ok
        }
        None => {
            set_error(&format!("unknown physics field {key:?}"));
            GradiometerStatus::InvalidArgument
        }
    }
}

/// Reads one named physics field.
///
/// # Safety
/// Pointer contracts as for `gradiometer_physics_set`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_physics_get(
    handle: *mut GradiometerPhysics,
    key: *const c_char,
    out: *mut f64,
) -> GradiometerStatus {
    let (Some(handle), false, false) = (handle.as_mut(), key.is_null(), out.is_null()) else {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    };
    let Ok(key) = CStr::from_ptr(key).to_str() else {
        set_error("key is not UTF-8");
        return GradiometerStatus::InvalidArgument;
    };
    match field_mut(&mut handle.0, key) {
        Some(slot) => {
            *out = *slot;
            GradiometerStatus::Ok
        }
        None => {
            set_error(&format!("unknown physics field {key:?}"));
            GradiometerStatus::InvalidArgument
        }
    }
}

/// Checks the structural invariants of the configuration.
///
/// # Safety
/// `handle` must come from `gradiometer_physics_new`.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_physics_validate(
    handle: *const GradiometerPhysics,
) -> GradiometerStatus {
    let Some(config) = physics_ref(handle) else {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    };
    match config.validate() {
        Ok(()) => GradiometerStatus::Ok,
        Err(e) => fail(&e),
    }
}

macro_rules! physics_out_fn {
    ($(#[$doc:meta])* $name:ident, |$config:ident, $arg:ident: f64| $body:expr) => {
        $(#[$doc])*
        ///
        /// # Safety
        /// `handle` must come from `gradiometer_physics_new`; `out` must be a
        /// valid pointer.
        #[no_mangle]
        pub unsafe extern "C" fn $name(
            handle: *const GradiometerPhysics,
            $arg: f64,
            out: *mut f64,
        ) -> GradiometerStatus {
            let (Some($config), false) = (physics_ref(handle), out.is_null()) else {
                set_error("null pointer");
                return GradiometerStatus::NullPointer;
            };
            match $body {
                Ok(value) => {
                    *out = value;
                    GradiometerStatus::Ok
                }
                Err(e) => fail(&e),
            }
        }
    };
}

physics_out_fn!(
    /// Gravimeter phase `k_e g T^2`, rad.
    gradiometer_physics_gravimeter_phase,
    |config, g: f64| Ok::<f64, Error>(config.gravimeter_phase(g))
);

physics_out_fn!(
    /// Coriolis phase shift for an East-West beam tilt, rad.
    gradiometer_physics_coriolis_shift,
    |config, theta_ew: f64| config.coriolis_shift(theta_ew)
);

physics_out_fn!(
    /// Differential quadratic-Zeeman phase for a linear field gradient, rad.
    gradiometer_physics_zeeman_gradient_phase,
    |config, gamma: f64| Ok::<f64, Error>(config.zeeman_gradient_phase(gamma))
);

physics_out_fn!(
    /// Differential phase of the short-coil field pulse, rad.
    gradiometer_physics_pulsed_field_phase,
    |config, b0: f64| Ok::<f64, Error>(config.pulsed_field_phase(b0))
);

/// Gravity gradient from a differential phase, s^-2, with a caller-supplied
/// source-mass correction.
///
/// # Safety
/// `handle` must come from `gradiometer_physics_new`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_physics_gradient_from_phase(
    handle: *const GradiometerPhysics,
    phi: f64,
    mass_correction: f64,
    out: *mut f64,
) -> GradiometerStatus {
    let (Some(config), false) = (physics_ref(handle), out.is_null()) else {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    };
    *out = config.gradient_from_phase(phi, mass_correction);
    GradiometerStatus::Ok
}

/// First-order light-shifted Raman resonance `f0 + C_M I_M + C_S I_S`, Hz.
#[no_mangle]
pub extern "C" fn gradiometer_raman_resonance(
    f0: f64,
    c_m: f64,
    c_s: f64,
    i_m: f64,
    i_s: f64,
) -> f64 {
    gradiometer::physics::raman_resonance(f0, c_m, c_s, i_m, i_s)
}

/// Fringe-averaged quantum projection noise.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_qpn_rms(
    amplitude: f64,
    center: f64,
    atoms: u64,
    out: *mut f64,
) -> GradiometerStatus {
    if out.is_null() {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    }
    match gradiometer::noise::qpn_rms(amplitude, center, atoms) {
        Ok(value) => {
            *out = value;
            GradiometerStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Detection-noise variance at one normalized population.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_detection_noise_at(
    x: f64,
    atoms: u64,
    dn1_sq: f64,
    dn2_sq: f64,
    out: *mut f64,
) -> GradiometerStatus {
    if out.is_null() {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    }
    match gradiometer::noise::detection_noise_at(x, atoms, dn1_sq, dn2_sq) {
        Ok(value) => {
            *out = value;
            GradiometerStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Analytic area of a Gaussian-times-quartic detection peak; `a2` and `a4`
/// are the even polynomial coefficients.
#[no_mangle]
pub extern "C" fn gradiometer_peak_area(height: f64, sigma: f64, a2: f64, a4: f64) -> f64 {
    gradiometer::peaks::PeakModel {
        height,
        center: 0.0,
        sigma,
        poly: [0.0, a2, 0.0, a4],
        baseline: 0.0,
    }
    .area()
}

/// Flat ellipse-fit result.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GradiometerEllipseFit {
    pub x_amplitude: f64,
    pub x_center: f64,
    pub y_amplitude: f64,
    pub y_center: f64,
    /// Differential phase, rad, in (0, pi).
    pub phi: f64,
    /// 1-sigma phase uncertainty, rad.
    pub dphi: f64,
    /// Per-coordinate residual RMS.
    pub rms: f64,
    pub n_points: u64,
    /// 1 when the geometric refinement converged.
    pub converged: c_int,
}

/// Fits the fringe ellipse to `len` (x, y) pairs.
///
/// `bootstrap_resamples = 0` selects the linearized phase uncertainty.
///
/// # Safety
/// `xs` and `ys` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_fit_ellipse(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    refine: c_int,
    bootstrap_resamples: u32,
    seed: u64,
    out: *mut GradiometerEllipseFit,
) -> GradiometerStatus {
    if xs.is_null() || ys.is_null() || out.is_null() {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    }
    let xs = std::slice::from_raw_parts(xs, len);
    let ys = std::slice::from_raw_parts(ys, len);
    let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    let opts = FitOptions {
        refine: refine != 0,
        bootstrap_resamples: bootstrap_resamples as usize,
        seed,
    };
    match fit_ellipse_with(&points, &opts) {
        Ok(report) => {
            *out = GradiometerEllipseFit {
                x_amplitude: report.params.x_amplitude,
                x_center: report.params.x_center,
                y_amplitude: report.params.y_amplitude,
                y_center: report.params.y_center,
                phi: report.params.phi,
                dphi: report.dphi,
                rms: report.rms,
                n_points: report.n_points as u64,
                converged: c_int::from(report.converged),
            };
            GradiometerStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Allan deviation of a uniformly spaced series over the octave tau grid.
///
/// Fills up to `capacity` bins and stores the bin count in `written`; the
/// full grid has floor(log2(len/2)) + 1 bins.
///
/// # Safety
/// `values` must point to `len` readable doubles; `taus`, `sigmas`, `counts`
/// must each hold `capacity` writable elements; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_allan_deviation(
    values: *const f64,
    len: usize,
    dt: f64,
    overlapping: c_int,
    taus: *mut f64,
    sigmas: *mut f64,
    counts: *mut u64,
    capacity: usize,
    written: *mut usize,
) -> GradiometerStatus {
    if values.is_null()
        || taus.is_null()
        || sigmas.is_null()
        || counts.is_null()
        || written.is_null()
    {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    }
    let series = std::slice::from_raw_parts(values, len);
    let mode = if overlapping != 0 {
        AllanMode::Overlapping
    } else {
        AllanMode::NonOverlapping
    };
    match allan_deviation(series, dt, mode) {
        Ok(result) => {
            let n = result.taus.len().min(capacity);
            for i in 0..n {
                *taus.add(i) = result.taus[i];
                *sigmas.add(i) = result.sigmas[i];
                *counts.add(i) = result.counts[i] as u64;
            }
            *written = n;
            GradiometerStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Runs a full simulation from a TOML configuration string and writes the
/// shot records as CSV (with a manifest JSON next to it).
///
/// # Safety
/// Both arguments must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn gradiometer_simulate_to_csv(
    config_toml: *const c_char,
    out_csv_path: *const c_char,
) -> GradiometerStatus {
    if config_toml.is_null() || out_csv_path.is_null() {
        set_error("null pointer");
        return GradiometerStatus::NullPointer;
    }
    let (Ok(config_text), Ok(path)) = (
        CStr::from_ptr(config_toml).to_str(),
        CStr::from_ptr(out_csv_path).to_str(),
    ) else {
        set_error("arguments are not UTF-8");
        return GradiometerStatus::InvalidArgument;
    };
    match simulate_to_csv(config_text, Path::new(path)) {
        Ok(()) => GradiometerStatus::Ok,
        Err(e) => fail(&e),
    }
}

fn simulate_to_csv(config_text: &str, path: &Path) -> Result<(), Error> {
    let config = RunConfig::from_toml_str(config_text)?;
    let ledger = SensitivityLedger::bundled();
    config.validate(&ledger)?;
    let shots = simulate_run(
        &config.physics,
        &config.noise,
        &config.drift,
        &ledger,
        config.servo.as_ref(),
        &config.schedule,
        &config.injected,
    )?;
    let manifest = Manifest::new(&config);
    let file = std::fs::File::create(path)?;
    gradiometer::io::write_shots_csv(file, &shots, &manifest.config_hash)?;
    let manifest_path = path.with_extension("manifest.json");
    gradiometer::io::write_json(std::fs::File::create(manifest_path)?, &manifest)?;
    Ok(())
}
