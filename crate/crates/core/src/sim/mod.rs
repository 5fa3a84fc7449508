//! Per-shot simulation of the gradiometer: fringe-ellipse point pairs with the
//! full noise decomposition, detection-efficiency distortion, parameter drifts
//! with optional servo stabilization, k-reversal, source-mass modulation and
//! synthetic fluorescence traces.

mod trace;

pub use trace::{shot_traces, simulate_trace, Pedestal, TracePair, TraceTemplate};

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ellipse::{fit_ellipse_with, FitOptions};
use crate::error::{Error, Result};
use crate::ledger::{Kind, SensitivityLedger, Target};
use crate::noise::{sample_shot_noise, NoiseConfig};
use crate::physics::PhysicsConfig;

/// Source-mass configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassConfig {
    C1,
    C2,
}

impl std::fmt::Display for MassConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MassConfig::C1 => write!(f, "C1"),
            MassConfig::C2 => write!(f, "C2"),
        }
    }
}

impl std::str::FromStr for MassConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C1" => Ok(MassConfig::C1),
            "C2" => Ok(MassConfig::C2),
            other => Err(Error::Config(format!("unknown mass config {other:?}"))),
        }
    }
}

/// One experimental cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    /// Cycle number, gapless even across dead time.
    pub index: u64,
    /// Wall-clock time since run start, s; dead-time gaps show up here.
    pub time: f64,
    /// Raman wavevector direction, +1 or -1.
    pub k_sign: i8,
    pub mass_config: MassConfig,
    /// Peak areas [A11, A21, A12, A22]: state index first (F = 1, 2),
    /// cloud index second (1 = lower, 2 = upper), arbitrary fluorescence units.
    pub areas: [f64; 4],
    /// Housekeeping channels, as deviations from nominal in ledger units.
    pub monitors: BTreeMap<String, f64>,
}

/// Whether a drift channel's phase couplings flip sign under k-reversal.
///
/// Coriolis-type couplings (mirror tilt) ride on the wavevector and are odd;
/// level-shift couplings (Zeeman, light shift) are even and cancel in the
/// k-reversal difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KParity {
    #[default]
    Even,
    Odd,
}

/// One drifting housekeeping parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftChannel {
    /// Ledger parameter name, or any name when `inert`.
    pub name: String,
    /// White noise RMS per shot, ledger units.
    pub white_rms: f64,
    /// Random-walk step RMS per shot, ledger units.
    pub random_walk_step: f64,
    /// Sinusoidal (thermal-cycling) amplitude, ledger units.
    pub sine_amplitude: f64,
    /// Sinusoid period, s.
    pub sine_period: f64,
    /// Sinusoid phase at t = 0, rad.
    pub sine_phase: f64,
    pub k_parity: KParity,
    /// Monitor-only channel with no ledger coupling.
    pub inert: bool,
}

impl Default for DriftChannel {
    fn default() -> Self {
        Self {
            name: String::new(),
            white_rms: 0.0,
            random_walk_step: 0.0,
            sine_amplitude: 0.0,
            sine_period: 3600.0,
            sine_phase: 0.0,
            k_parity: KParity::Even,
            inert: false,
        }
    }
}

/// The set of drifting channels for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DriftModel {
    pub channels: Vec<DriftChannel>,
}

impl DriftModel {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Every non-inert channel must name a ledger parameter.
    pub fn validate(&self, ledger: &SensitivityLedger) -> Result<()> {
        for channel in &self.channels {
            if channel.name.is_empty() {
                return Err(Error::Config("drift channel with empty name".into()));
            }
            if !channel.inert && !ledger.contains(&channel.name) {
                return Err(Error::Config(format!(
                    "drift channel {:?} not in ledger and not declared inert",
                    channel.name
                )));
            }
            if channel.sine_amplitude != 0.0 && !(channel.sine_period > 0.0) {
                return Err(Error::Config(format!(
                    "drift channel {:?} has sinusoid with period {}",
                    channel.name, channel.sine_period
                )));
            }
        }
        Ok(())
    }
}

/// Sampled digital integrator loop stabilizing selected channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoConfig {
    /// Cycles between servo updates.
    pub sample_every: u64,
    /// Integrator gain; stable for 0 < gain < 2.
    pub gain: f64,
    /// Channel names under active stabilization.
    pub channels: Vec<String>,
    /// Residual fluctuation target, ledger units (reporting aid).
    pub residual_target: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            sample_every: 72,
            gain: 0.8,
            channels: Vec::new(),
            residual_target: 0.003,
        }
    }
}

impl ServoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_every < 1 {
            return Err(Error::Config("servo.sample_every must be >= 1".into()));
        }
        if !(self.gain > 0.0 && self.gain < 2.0) {
            return Err(Error::Config(format!(
                "servo.gain {} outside the stable range (0, 2)",
                self.gain
            )));
        }
        Ok(())
    }
}

/// Run timing and protocol switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub n_shots: u64,
    /// Shots per fitted ellipse (per k direction).
    pub group_size: u64,
    /// Cycles spent in each mass configuration; 0 disables modulation.
    pub mass_modulation_period: u64,
    /// Wall-clock pause at each mass move, s.
    pub dead_time: f64,
    pub k_reversal: bool,
    /// Cycle period, s.
    pub cycle_period: f64,
    /// Fringe phase t is drawn uniformly from [0, fringe_t_max);
    /// 2 pi by default, pi to mirror the projection-noise Monte Carlo.
    pub fringe_t_max: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            n_shots: 720,
            group_size: 72,
            mass_modulation_period: 720,
            dead_time: 300.0,
            k_reversal: false,
            cycle_period: 1.9,
            fringe_t_max: std::f64::consts::TAU,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.n_shots == 0 {
            return Err(Error::Config("schedule.n_shots must be > 0".into()));
        }
        if self.group_size == 0 {
            return Err(Error::Config("schedule.group_size must be > 0".into()));
        }
        if !(self.cycle_period > 0.0) || self.dead_time < 0.0 {
            return Err(Error::Config(
                "schedule requires cycle_period > 0 and dead_time >= 0".into(),
            ));
        }
        if !(self.fringe_t_max > 0.0 && self.fringe_t_max <= std::f64::consts::TAU) {
            return Err(Error::Config(format!(
                "schedule.fringe_t_max {} outside (0, 2 pi]",
                self.fringe_t_max
            )));
        }
        if self.mass_modulation_period > 0 {
            let per_stream = if self.k_reversal {
                if self.mass_modulation_period % 2 != 0 {
                    return Err(Error::Config(
                        "mass_modulation_period must be even with k-reversal on".into(),
                    ));
                }
                self.mass_modulation_period / 2
            } else {
                self.mass_modulation_period
            };
            if per_stream % self.group_size != 0 {
                return Err(Error::Config(format!(
                    "group_size {} does not divide the {} shots per k direction per mass period",
                    self.group_size, per_stream
                )));
            }
        }
        Ok(())
    }

    /// Fitted ellipses per mass configuration per modulation period.
    pub fn ellipses_per_config_period(&self) -> u64 {
        if self.mass_modulation_period == 0 {
            return 0;
        }
        let per_stream = if self.k_reversal {
            self.mass_modulation_period / 2
        } else {
            self.mass_modulation_period
        };
        let streams = if self.k_reversal { 2 } else { 1 };
        (per_stream / self.group_size) * streams
    }
}

/// Signal and instrument state injected into a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Injected {
    /// Differential phase in mass configuration C1, rad (flips with k).
    pub phi_c1: f64,
    /// Differential phase in mass configuration C2, rad (flips with k).
    pub phi_c2: f64,
    /// k-independent operating-point phase offset, rad. Chosen so that the
    /// total phase stays inside (0, pi) for both k directions, as the
    /// pulsed-field offset does in the instrument.
    pub common_offset: f64,
    /// Extra k-independent bias, rad; cancellation-test knob.
    pub k_even_bias: f64,
    /// Detection-efficiency ratio of the lower-cloud channels.
    pub xi_lower: f64,
    /// Detection-efficiency ratio of the upper-cloud channels.
    pub xi_upper: f64,
    /// Thermal-pedestal area fraction recorded for trace synthesis.
    pub pedestal_fraction: f64,
    /// Fringe amplitude A = C.
    pub contrast: f64,
    /// Fringe centers B, D.
    pub bias_x: f64,
    pub bias_y: f64,
    /// Raman-mirror tilt change between mass configurations, rad; couples
    /// into the C2 signal through the Coriolis shift when nonzero.
    pub mass_move_tilt: f64,
}

impl Default for Injected {
    fn default() -> Self {
        Self {
            phi_c1: 0.3,
            phi_c2: 0.3,
            common_offset: std::f64::consts::FRAC_PI_2,
            k_even_bias: 0.0,
            xi_lower: 1.0,
            xi_upper: 1.0,
            pedestal_fraction: 0.0,
            contrast: 0.225,
            bias_x: 0.5,
            bias_y: 0.5,
            mass_move_tilt: 0.0,
        }
    }
}

impl Injected {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi_lower > 0.0 && self.xi_upper > 0.0) {
            return Err(Error::Config("xi ratios must be positive".into()));
        }
        if !(self.contrast > 0.0) {
            return Err(Error::Config("contrast must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pedestal_fraction) {
            return Err(Error::Config(format!(
                "pedestal_fraction {} outside [0, 1]",
                self.pedestal_fraction
            )));
        }
        Ok(())
    }
}

struct ChannelState {
    random_walk: f64,
    servo_correction: f64,
    servoed: bool,
}

/// Generates a full synthetic run.
///
/// Per shot: the schedule fixes mass configuration and k direction; drift
/// channels advance (random walk + sinusoid + white noise, minus any servo
/// correction) and couple into the phases, contrast and bias through their
/// ledger rows; a fringe phase t is drawn uniformly; the noisy (x, y) pair is
/// converted to four peak areas through the per-cloud efficiency ratios.
/// Everything is driven by one seeded stream with a fixed draw order, so a
/// given configuration reproduces byte-identical records.
pub fn simulate_run(
    physics: &PhysicsConfig,
    noise: &NoiseConfig,
    drift: &DriftModel,
    ledger: &SensitivityLedger,
    servo: Option<&ServoConfig>,
    schedule: &Schedule,
    injected: &Injected,
) -> Result<Vec<ShotRecord>> {
    physics.validate()?;
    noise.validate()?;
    drift.validate(ledger)?;
    schedule.validate()?;
    injected.validate()?;
    if let Some(s) = servo {
        s.validate()?;
        for name in &s.channels {
            if !drift.channels.iter().any(|c| &c.name == name) {
                return Err(Error::Config(format!(
                    "servo channel {name:?} is not a drift channel"
                )));
            }
        }
    }

    let mut rng = noise.rng_for_worker(0);
    let mut states: Vec<ChannelState> = drift
        .channels
        .iter()
        .map(|c| ChannelState {
            random_walk: 0.0,
            servo_correction: 0.0,
            servoed: servo.is_some_and(|s| s.channels.contains(&c.name)),
        })
        .collect();

    let mass_move_shift = if injected.mass_move_tilt != 0.0 {
        physics.coriolis_shift(injected.mass_move_tilt)?
    } else {
        0.0
    };

    let mut records = Vec::with_capacity(schedule.n_shots as usize);
    let mut wall_time = 0.0;

    for index in 0..schedule.n_shots {
        let mass_config = if schedule.mass_modulation_period == 0
            || (index / schedule.mass_modulation_period) % 2 == 0
        {
            MassConfig::C1
        } else {
            MassConfig::C2
        };
        if schedule.mass_modulation_period > 0
            && index > 0
            && index % schedule.mass_modulation_period == 0
        {
            wall_time += schedule.dead_time;
        }
        let time = wall_time;
        wall_time += schedule.cycle_period;

        let k_sign: i8 = if schedule.k_reversal && index % 2 == 1 {
            -1
        } else {
            1
        };

        // Advance drift channels; fixed draw order (walk, white) per channel.
        let mut monitors = BTreeMap::new();
        let mut even_phase_shift = 0.0;
        let mut odd_phase_shift = 0.0;
        let mut contrast_shift = 0.0;
        let mut bias_shift = 0.0;
        for (channel, state) in drift.channels.iter().zip(states.iter_mut()) {
            let walk_draw: f64 = StandardNormal.sample(&mut rng);
            let white_draw: f64 = StandardNormal.sample(&mut rng);
            state.random_walk += walk_draw * channel.random_walk_step;
            let sine = if channel.sine_amplitude != 0.0 {
                channel.sine_amplitude
                    * (std::f64::consts::TAU * time / channel.sine_period + channel.sine_phase)
                        .sin()
            } else {
                0.0
            };
            let value =
                state.random_walk + sine + white_draw * channel.white_rms + state.servo_correction;
            monitors.insert(channel.name.clone(), value);

            if state.servoed && index % servo.expect("servoed implies servo").sample_every == 0 {
                state.servo_correction -= servo.unwrap().gain * value;
            }

            if channel.inert {
                continue;
            }
            let config_sign = match mass_config {
                MassConfig::C1 => 0.5,
                MassConfig::C2 => -0.5,
            };
            let mut phase = 0.0;
            if let Some(row) = ledger.find(&channel.name, Target::MeanPhase) {
                if !row.bound {
                    phase += eval_coupling(row.kind, row.value, value);
                }
            }
            if let Some(row) = ledger.find(&channel.name, Target::DiffPhase) {
                if !row.bound {
                    phase += config_sign * eval_coupling(row.kind, row.value, value);
                }
            }
            match channel.k_parity {
                KParity::Even => even_phase_shift += phase,
                KParity::Odd => odd_phase_shift += phase,
            }
            if let Some(row) = ledger.find(&channel.name, Target::Contrast) {
                if !row.bound {
                    contrast_shift += eval_coupling(row.kind, row.value, value);
                }
            }
            if let Some(row) = ledger.find(&channel.name, Target::Bias) {
                if !row.bound {
                    bias_shift += eval_coupling(row.kind, row.value, value);
                }
            }
        }

        let signal = match mass_config {
            MassConfig::C1 => injected.phi_c1,
            MassConfig::C2 => injected.phi_c2 + mass_move_shift,
        };

        let t: f64 = rng.random::<f64>() * schedule.fringe_t_max;

        // Fringe parameters and noise for this shot.
        let ideal_phase = f64::from(k_sign) * (signal + odd_phase_shift)
            + injected.common_offset
            + injected.k_even_bias
            + even_phase_shift;
        let amp_x = injected.contrast + contrast_shift;
        let amp_y = injected.contrast + contrast_shift;
        let center_x = injected.bias_x + bias_shift;
        let center_y = injected.bias_y + bias_shift;

        let x_ideal = amp_x * t.sin() + center_x;
        let y_ideal = amp_y * (t + ideal_phase).sin() + center_y;
        let draw = sample_shot_noise(noise, x_ideal, y_ideal, &mut rng);

        let x = ((amp_x + draw.d_a) * t.sin() + center_x + draw.d_b + draw.d_x).clamp(0.0, 1.0);
        let y = ((amp_y + draw.d_c) * (t + ideal_phase + draw.d_phi).sin()
            + center_y
            + draw.d_d
            + draw.d_y)
            .clamp(0.0, 1.0);

        let n_lower = noise.n_lower as f64;
        let n_upper = noise.n_upper as f64;
        let areas = [
            x * n_lower / injected.xi_lower,
            (1.0 - x) * n_lower,
            y * n_upper / injected.xi_upper,
            (1.0 - y) * n_upper,
        ];

        records.push(ShotRecord {
            index,
            time,
            k_sign,
            mass_config,
            areas,
            monitors,
        });
    }

    Ok(records)
}

fn eval_coupling(kind: Kind, coefficient: f64, value: f64) -> f64 {
    match kind {
        Kind::Linear => coefficient * value,
        Kind::Quadratic => coefficient * value * value,
    }
}

/// One point of a Coriolis-compensation scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CompensationPoint {
    /// Mirror rotation rate, rad/s.
    pub rotation_rate: f64,
    /// Fitted fringe contrast (sum of the two amplitudes).
    pub contrast: f64,
    /// Phase-angle fit error, rad.
    pub phase_rms: f64,
}

/// Scans the Raman-mirror rotation rate against the horizontal Earth-rotation
/// projection.
///
/// Each shot picks up a Coriolis phase `2 (omega_h - rate) k_e T^2 v_t` from
/// the shot-to-shot transverse velocity draw `v_t ~ N(0, sigma_v)`, while the
/// intra-cloud velocity spread washes the fringe amplitude by
/// `exp(-(2 (omega_h - rate) k_e T^2 sigma_v)^2 / 2)`. Contrast peaks and fit
/// error dips where the mirror rotation cancels the Earth rate.
pub fn coriolis_compensation_scan(
    physics: &PhysicsConfig,
    noise: &NoiseConfig,
    sigma_v: f64,
    rotation_rates: &[f64],
    shots_per_rate: usize,
) -> Result<Vec<CompensationPoint>> {
    physics.validate()?;
    noise.validate()?;
    if !(sigma_v > 0.0) {
        return Err(Error::Config(format!(
            "sigma_v must be positive, got {sigma_v}"
        )));
    }
    let omega_horizontal = physics.omega_earth * physics.latitude.cos();
    let scale = 2.0 * physics.k_e * physics.t_sep * physics.t_sep;
    let base = Injected::default();

    rotation_rates
        .iter()
        .enumerate()
        .map(|(rate_index, &rate)| {
            let omega_eff = omega_horizontal - rate;
            let spread = scale * omega_eff * sigma_v;
            let amplitude = base.contrast * (-spread * spread / 2.0).exp();
            let mut rng = noise.rng_for_worker(1 + rate_index as u64);
            let points: Vec<(f64, f64)> = (0..shots_per_rate)
                .map(|_| {
                    let v_t: f64 = StandardNormal.sample(&mut rng);
                    let phase = std::f64::consts::FRAC_PI_2 + scale * omega_eff * sigma_v * v_t;
                    let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                    let x_ideal = amplitude * t.sin() + base.bias_x;
                    let y_ideal = amplitude * (t + phase).sin() + base.bias_y;
                    let draw = sample_shot_noise(noise, x_ideal, y_ideal, &mut rng);
                    (x_ideal + draw.d_x, y_ideal + draw.d_y)
                })
                .collect();
            let report = fit_ellipse_with(&points, &FitOptions::fast())?;
            Ok(CompensationPoint {
                rotation_rate: rate,
                contrast: report.params.x_amplitude + report.params.y_amplitude,
                phase_rms: report.dphi,
            })
        })
        .collect()
}
