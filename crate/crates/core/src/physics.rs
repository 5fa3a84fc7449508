//! Physical constants, geometry and closed-form phase formulas of the
//! dual-cloud gradiometer.
//!
//! All quantities are SI (T for magnetic field, rad for phase, s for time);
//! config loaders convert from mixed lab units (uT, mrad, mA) at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tilt magnitude beyond which the small-angle Coriolis formula is rejected.
pub const MAX_CORIOLIS_TILT: f64 = 0.1;

/// Instrument geometry and physical constants.
///
/// Defaults describe a rubidium fountain gradiometer with clouds launched at
/// 4.3 and 3.5 m/s, a pulse separation of 160 ms and a 29 uT bias solenoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Effective two-photon wavenumber, rad/m.
    pub k_e: f64,
    /// Interferometer pulse separation, s.
    pub t_sep: f64,
    /// Apogee-to-pi-pulse time mismatch, s.
    pub t_a: f64,
    /// Launch velocity of the upper cloud, m/s.
    pub v_u: f64,
    /// Launch velocity of the lower cloud, m/s.
    pub v_l: f64,
    /// Vertical cloud separation during interferometry, m.
    pub dz: f64,
    /// Laboratory latitude, rad.
    pub latitude: f64,
    /// Earth rotation rate, rad/s.
    pub omega_earth: f64,
    /// Differential quadratic Zeeman coefficient, Hz/T^2.
    pub alpha_zeeman: f64,
    /// Two-photon recoil velocity, m/s.
    pub v_r: f64,
    /// Local gravity, m/s^2.
    pub g: f64,
    /// Bias solenoid field coefficient, T/A.
    pub b0_per_amp: f64,
    /// Short-coil pulse length, s.
    pub pulse_tau: f64,
    /// Pulsed field difference between the clouds, T.
    pub delta_b: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            k_e: 1.61e7,
            t_sep: 0.160,
            t_a: 0.005,
            v_u: 4.3,
            v_l: 3.5,
            dz: 0.3,
            latitude: 43.0_f64.to_radians(),
            omega_earth: 7.292e-5,
            alpha_zeeman: 57.5e9,
            v_r: 0.0117,
            g: 9.806,
            b0_per_amp: 1.445e-3,
            pulse_tau: 0.010,
            delta_b: 1.0e-5,
        }
    }
}

impl PhysicsConfig {
    /// Checks the structural invariants of the configuration.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_e", self.k_e),
            ("t_sep", self.t_sep),
            ("v_u", self.v_u),
            ("v_l", self.v_l),
            ("dz", self.dz),
            ("omega_earth", self.omega_earth),
            ("alpha_zeeman", self.alpha_zeeman),
            ("v_r", self.v_r),
            ("g", self.g),
            ("b0_per_amp", self.b0_per_amp),
            ("pulse_tau", self.pulse_tau),
            ("delta_b", self.delta_b),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Config(format!(
                    "physics.{name} must be strictly positive, got {value}"
                )));
            }
        }
        if !(self.latitude.abs() <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "physics.latitude must satisfy |lat| <= pi/2, got {}",
                self.latitude
            )));
        }
        if self.v_u <= self.v_l {
            return Err(Error::Config(format!(
                "physics.v_u must exceed v_l, got v_u = {}, v_l = {}",
                self.v_u, self.v_l
            )));
        }
        if self.t_a < 0.0 || self.t_a >= self.t_sep {
            return Err(Error::Config(format!(
                "physics requires t_sep > t_a >= 0, got t_sep = {}, t_a = {}",
                self.t_sep, self.t_a
            )));
        }
        Ok(())
    }

    /// Single-interferometer gravimeter phase `k_e * g * T^2`, rad.
    pub fn gravimeter_phase(&self, g: f64) -> f64 {
        self.k_e * g * self.t_sep * self.t_sep
    }

    /// Differential phase shift from a beam tilt `theta_ew` (rad, East-West)
    /// through the first-order Coriolis force:
    /// `-2 Omega_E k_e T^2 (v_u - v_l) cos(lat) sin(theta)`.
    ///
    /// The formula is a small-tilt expansion; tilts beyond
    /// [`MAX_CORIOLIS_TILT`] are rejected rather than extrapolated.
    pub fn coriolis_shift(&self, theta_ew: f64) -> Result<f64> {
        if !(theta_ew.abs() <= MAX_CORIOLIS_TILT) {
            return Err(Error::TiltOutOfRange(theta_ew));
        }
        Ok(-2.0
            * self.omega_earth
            * self.k_e
            * self.t_sep
            * self.t_sep
            * (self.v_u - self.v_l)
            * self.latitude.cos()
            * theta_ew.sin())
    }

    /// Slope of the Coriolis shift at zero tilt, rad per rad of tilt.
    pub fn coriolis_slope(&self) -> f64 {
        -2.0 * self.omega_earth
            * self.k_e
            * self.t_sep
            * self.t_sep
            * (self.v_u - self.v_l)
            * self.latitude.cos()
    }

    /// Differential phase from a linear magnetic gradient `gamma` (T/m)
    /// through the quadratic Zeeman shift:
    /// `pi alpha gamma^2 (v_r + 2 g t_a) T^2 dz`.
    pub fn zeeman_gradient_phase(&self, gamma: f64) -> f64 {
        std::f64::consts::PI
            * self.alpha_zeeman
            * gamma
            * gamma
            * (self.v_r + 2.0 * self.g * self.t_a)
            * self.t_sep
            * self.t_sep
            * self.dz
    }

    /// Differential phase from the short-coil field pulse of length `pulse_tau`
    /// raising the field at one cloud from `b0` to `b0 + delta_b`:
    /// `2 pi alpha tau [(B0 + dB)^2 - B0^2]`.
    pub fn pulsed_field_phase(&self, b0: f64) -> f64 {
        debug_assert!(b0 >= 0.0);
        let shifted = b0 + self.delta_b;
        2.0 * std::f64::consts::PI
            * self.alpha_zeeman
            * self.pulse_tau
            * (shifted * shifted - b0 * b0)
    }

    /// Slope of the pulsed-field phase with respect to solenoid current,
    /// rad/A: `4 pi alpha tau dB (dB0/di_s)`.
    pub fn pulsed_field_slope_per_amp(&self) -> f64 {
        4.0 * std::f64::consts::PI
            * self.alpha_zeeman
            * self.pulse_tau
            * self.delta_b
            * self.b0_per_amp
    }

    /// Converts a measured differential phase (rad) to a gravity gradient
    /// (s^-2): `phi / (k_e T^2 dz) + mass_correction`.
    ///
    /// `mass_correction` is a caller-supplied offset accounting for nearby
    /// source masses; it is never defaulted.
    pub fn gradient_from_phase(&self, phi: f64, mass_correction: f64) -> f64 {
        phi / (self.k_e * self.t_sep * self.t_sep * self.dz) + mass_correction
    }
}

/// First-order light-shifted Raman resonance `f0 + C_M I_M + C_S I_S`, Hz.
///
/// At the intensity ratio `I_M / I_S = -C_S / C_M` the shift cancels
/// independently of total power.
pub fn raman_resonance(f0: f64, c_m: f64, c_s: f64, i_m: f64, i_s: f64) -> f64 {
    debug_assert!(i_m >= 0.0 && i_s >= 0.0);
    f0 + c_m * i_m + c_s * i_s
}
