//! Detection-noise decomposition: quantum projection noise, technical
//! detection noise and per-shot contrast/bias/differential-phase jitter.
//!
//! The per-shot fluctuations of the normalized populations (x, y) split into
//! contrast terms (dA, dC), bias terms (dB, dD), a differential-phase term
//! (dPhi) and additive detection noise (dx_d, dy_d). Detection noise is
//! position dependent along the ellipse; its fundamental floor is the quantum
//! projection noise of the finite atom number.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the additive detection noise on (x, y) is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionMode {
    /// Gaussian draw with the quantum-projection variance at the current point.
    Qpn,
    /// Gaussian draw with the configured technical RMS.
    Technical,
    /// Gaussian draw with QPN and technical variances summed in quadrature.
    #[default]
    Combined,
    /// Exact binomial projection of the atom number; for small-n validation.
    ExactBinomial,
}

/// Atom numbers and per-shot noise magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Detected atoms per shot in the upper cloud.
    pub n_upper: u64,
    /// Detected atoms per shot in the lower cloud.
    pub n_lower: u64,
    /// Additive technical noise on each normalized population, per channel.
    pub tech_detection_rms: f64,
    /// RMS of the per-shot fringe-amplitude fluctuations dA, dC.
    pub contrast_jitter: f64,
    /// RMS of the per-shot fringe-center fluctuations dB, dD.
    pub bias_jitter: f64,
    /// RMS of the per-shot differential-phase fluctuation dPhi, rad.
    pub dphi_jitter: f64,
    /// Detection-noise generation mode.
    pub detection_mode: DetectionMode,
    /// RNG seed; identical seed and draw sequence reproduce identical streams.
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            n_upper: 200_000,
            n_lower: 200_000,
            tech_detection_rms: 0.00055,
            contrast_jitter: 0.0,
            bias_jitter: 0.0,
            dphi_jitter: 0.0,
            detection_mode: DetectionMode::Combined,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_upper < 1 || self.n_lower < 1 {
            return Err(Error::Config(format!(
                "noise counts must be >= 1, got n_upper = {}, n_lower = {}",
                self.n_upper, self.n_lower
            )));
        }
        for (name, value) in [
            ("tech_detection_rms", self.tech_detection_rms),
            ("contrast_jitter", self.contrast_jitter),
            ("bias_jitter", self.bias_jitter),
            ("dphi_jitter", self.dphi_jitter),
        ] {
            if value < 0.0 || !value.is_finite() {
                return Err(Error::Config(format!(
                    "noise.{name} must be a finite RMS >= 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Deterministic stream for a simulation worker. Worker 0 is the main
    /// stream; parallel runs must use distinct worker indices.
    pub fn rng_for_worker(&self, worker: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.seed.wrapping_add(worker))
    }
}

/// Additive detection-noise variance at normalized population `x`, for a
/// cloud of `n_total` detected atoms with per-state detection variances
/// `dn1_sq` (F = 1) and `dn2_sq` (F = 2):
///
/// `[x^2 dn2_sq + (1 - x)^2 dn1_sq] / n_total^2`
///
/// Substituting the projection-noise variances `dn_i^2 = n_i` with
/// `n_1 = x n`, `n_2 = (1 - x) n` reduces this to `x (1 - x) / n` exactly.
pub fn detection_noise_at(x: f64, n_total: u64, dn1_sq: f64, dn2_sq: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "normalized population {x} outside [0, 1]"
        )));
    }
    if n_total < 1 {
        return Err(Error::Domain(format!("atom count {n_total} below 1")));
    }
    let n = n_total as f64;
    Ok((x * x * dn2_sq + (1.0 - x) * (1.0 - x) * dn1_sq) / (n * n))
}

/// Quantum-projection variance `x (1 - x) / n` at a single ellipse point.
pub fn qpn_variance_at(x: f64, n_total: u64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * (1.0 - x) / n_total as f64
}

/// Fringe-averaged quantum projection noise of a channel with amplitude `a`,
/// center `b` and `n` detected atoms:
///
/// `sqrt( (2 b (1 - b) - a^2) / (2 n) )`
pub fn qpn_rms(a: f64, b: f64, n: u64) -> Result<f64> {
    if !(0.0 < b && b < 1.0) {
        return Err(Error::Domain(format!("fringe center {b} outside (0, 1)")));
    }
    if a < 0.0 {
        return Err(Error::Domain(format!("fringe amplitude {a} negative")));
    }
    if n < 1 {
        return Err(Error::Domain(format!("atom count {n} below 1")));
    }
    let numerator = 2.0 * b * (1.0 - b) - a * a;
    if numerator <= 0.0 {
        return Err(Error::Domain(format!(
            "2 b (1 - b) = {} does not exceed a^2 = {}",
            2.0 * b * (1.0 - b),
            a * a
        )));
    }
    Ok((numerator / (2.0 * n as f64)).sqrt())
}

/// One shot's worth of noise draws, all zero mean.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShotNoise {
    /// Fluctuation of the x fringe amplitude.
    pub d_a: f64,
    /// Fluctuation of the x fringe center.
    pub d_b: f64,
    /// Fluctuation of the y fringe amplitude.
    pub d_c: f64,
    /// Fluctuation of the y fringe center.
    pub d_d: f64,
    /// Fluctuation of the differential phase, rad.
    pub d_phi: f64,
    /// Additive detection noise on x.
    pub d_x: f64,
    /// Additive detection noise on y.
    pub d_y: f64,
}

/// Draws one shot of noise. `x_ideal` and `y_ideal` locate the shot on the
/// ellipse so that position-dependent detection noise can be evaluated there;
/// they are clamped into [0, 1] for the variance evaluation.
///
/// The draw order (dA, dB, dC, dD, dPhi, dx, dy) is fixed, so a given seed
/// reproduces the identical stream shot for shot.
pub fn sample_shot_noise(
    cfg: &NoiseConfig,
    x_ideal: f64,
    y_ideal: f64,
    rng: &mut impl Rng,
) -> ShotNoise {
    let gauss = |rng: &mut dyn rand::RngCore, rms: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        z * rms
    };
    let d_a = gauss(rng, cfg.contrast_jitter);
    let d_b = gauss(rng, cfg.bias_jitter);
    let d_c = gauss(rng, cfg.contrast_jitter);
    let d_d = gauss(rng, cfg.bias_jitter);
    let d_phi = gauss(rng, cfg.dphi_jitter);

    let (d_x, d_y) = match cfg.detection_mode {
        DetectionMode::ExactBinomial => (
            binomial_detection(x_ideal, cfg.n_lower, rng),
            binomial_detection(y_ideal, cfg.n_upper, rng),
        ),
        mode => {
            let tech_var = cfg.tech_detection_rms * cfg.tech_detection_rms;
            let var = |x: f64, n: u64| match mode {
                DetectionMode::Qpn => qpn_variance_at(x, n),
                DetectionMode::Technical => tech_var,
                _ => qpn_variance_at(x, n) + tech_var,
            };
            (
                gauss(rng, var(x_ideal, cfg.n_lower).sqrt()),
                gauss(rng, var(y_ideal, cfg.n_upper).sqrt()),
            )
        }
    };

    ShotNoise {
        d_a,
        d_b,
        d_c,
        d_d,
        d_phi,
        d_x,
        d_y,
    }
}

fn binomial_detection(x: f64, n: u64, rng: &mut impl Rng) -> f64 {
    let p = x.clamp(0.0, 1.0);
    let draw = Binomial::new(n, p)
        .expect("clamped probability")
        .sample(rng);
    draw as f64 / n as f64 - p
}
