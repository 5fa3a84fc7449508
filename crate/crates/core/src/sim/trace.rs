//! Synthetic two-channel fluorescence traces: four detection peaks (lower and
//! upper cloud on each hyperfine channel), an optional thermal pedestal under
//! the F = 1 peaks, and additive sample noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::peaks::{Channel, DetectionTrace, PeakModel};

/// Broad thermal background under the F = 1 peaks, from off-resonant
/// scattering during single-pulse velocity selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pedestal {
    /// Pedestal area as a fraction of the peak area.
    pub fraction: f64,
    /// Pedestal width as a multiple of the peak width.
    pub width_multiplier: f64,
}

/// The two detection channels of one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePair {
    pub f1: DetectionTrace,
    pub f2: DetectionTrace,
}

/// Synthesizes the two detection traces for one cycle.
///
/// `peaks` holds the four peak models in area order [A11, A21, A12, A22]:
/// F = 1 lower, F = 2 lower, F = 1 upper, F = 2 upper. The F = 1 channel
/// carries peaks 0 and 2, the F = 2 channel peaks 1 and 3; the lower cloud
/// arrives first on each channel. A pedestal, when configured, sits under the
/// F = 1 peaks only.
pub fn simulate_trace(
    peaks: &[PeakModel; 4],
    pedestal: Option<Pedestal>,
    sample_rate: f64,
    noise_rms: f64,
    span: (f64, f64),
    rng: &mut impl Rng,
) -> TracePair {
    debug_assert!(sample_rate > 0.0 && span.1 > span.0);
    debug_assert!(peaks.iter().all(|p| p.sigma > 0.0));
    debug_assert!(peaks[0].center < peaks[2].center && peaks[1].center < peaks[3].center);

    let dt = 1.0 / sample_rate;
    let n = ((span.1 - span.0) / dt).floor() as usize + 1;

    let pedestals: Vec<PeakModel> = match pedestal {
        Some(p) if p.fraction > 0.0 => [&peaks[0], &peaks[2]]
            .iter()
            .map(|peak| {
                let sigma = peak.sigma * p.width_multiplier;
                let area = peak.area() * p.fraction;
                PeakModel::gaussian(
                    area / (sigma * (2.0 * std::f64::consts::PI).sqrt()),
                    peak.center,
                    sigma,
                )
            })
            .collect(),
        _ => Vec::new(),
    };

    let mut synth = |members: [&PeakModel; 2], extras: &[PeakModel], channel: Channel| {
        let samples = (0..n)
            .map(|i| {
                let t = span.0 + i as f64 * dt;
                let mut v: f64 = members.iter().map(|m| m.eval(t)).sum();
                v += extras.iter().map(|m| m.eval(t)).sum::<f64>();
                if noise_rms > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    v += noise_rms * z;
                }
                v
            })
            .collect();
        DetectionTrace {
            channel,
            t0: span.0,
            dt,
            samples,
        }
    };

    let f1 = synth([&peaks[0], &peaks[2]], &pedestals, Channel::F1);
    let f2 = synth([&peaks[1], &peaks[3]], &[], Channel::F2);
    TracePair { f1, f2 }
}

/// Peak geometry used to turn shot areas into traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceTemplate {
    /// Arrival time of the lower cloud, s.
    pub t_lower: f64,
    /// Arrival time of the upper cloud, s.
    pub t_upper: f64,
    /// Peak width, s.
    pub sigma: f64,
    /// Polynomial distortion shared by all four peaks.
    pub poly: [f64; 4],
    pub sample_rate: f64,
    pub noise_rms: f64,
    pub span: (f64, f64),
    pub pedestal: Option<Pedestal>,
}

impl Default for TraceTemplate {
    fn default() -> Self {
        Self {
            t_lower: 0.012,
            t_upper: 0.042,
            sigma: 1.5e-3,
            poly: [0.0; 4],
            sample_rate: 50_000.0,
            noise_rms: 0.0,
            span: (0.0, 0.060),
            pedestal: None,
        }
    }
}

impl TraceTemplate {
    /// Fit windows for the four peaks in area order.
    pub fn windows(&self) -> [(f64, f64); 4] {
        let half = (self.t_upper - self.t_lower) / 2.0;
        let w = half.min(8.0 * self.sigma);
        [
            (self.t_lower - w, self.t_lower + w),
            (self.t_lower - w, self.t_lower + w),
            (self.t_upper - w, self.t_upper + w),
            (self.t_upper - w, self.t_upper + w),
        ]
    }

    fn peak_for(&self, area: f64, center: f64) -> PeakModel {
        let s2 = self.sigma * self.sigma;
        let shape = 1.0 + self.poly[1] * s2 + 3.0 * self.poly[3] * s2 * s2;
        PeakModel {
            height: area / (self.sigma * (2.0 * std::f64::consts::PI).sqrt() * shape),
            center,
            sigma: self.sigma,
            poly: self.poly,
            baseline: 0.0,
        }
    }
}

/// Turns one shot's four areas into the pair of detection traces.
pub fn shot_traces(areas: &[f64; 4], template: &TraceTemplate, rng: &mut impl Rng) -> TracePair {
    let peaks = [
        template.peak_for(areas[0], template.t_lower),
        template.peak_for(areas[1], template.t_lower),
        template.peak_for(areas[2], template.t_upper),
        template.peak_for(areas[3], template.t_upper),
    ];
    simulate_trace(
        &peaks,
        template.pedestal,
        template.sample_rate,
        template.noise_rms,
        template.span,
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::peaks::fit_peak;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn four_peaks() -> [PeakModel; 4] {
        [
            PeakModel::gaussian(1.0, 0.012, 1.5e-3),
            PeakModel::gaussian(0.8, 0.012, 1.5e-3),
            PeakModel::gaussian(0.9, 0.042, 1.5e-3),
            PeakModel::gaussian(0.7, 0.042, 1.5e-3),
        ]
    }

    #[test]
    fn trace_area_matches_analytic() {
        // Numerically integrated trace area equals the analytic area.
        let peaks = four_peaks();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let pair = simulate_trace(&peaks, None, 200_000.0, 0.0, (0.0, 0.060), &mut rng);
        // Lower F1 peak dominates the first half of channel F1.
        let split = ((0.027 - pair.f1.t0) / pair.f1.dt) as usize;
        let numeric: f64 = pair.f1.samples[..split].iter().sum::<f64>() * pair.f1.dt;
        assert_relative_eq!(numeric, peaks[0].area(), max_relative = 1e-6);
    }

    #[test]
    fn zero_pedestal_identical_to_pure_peaks() {
        let peaks = four_peaks();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let plain = simulate_trace(&peaks, None, 50_000.0, 0.0, (0.0, 0.060), &mut rng);
        let zero = simulate_trace(
            &peaks,
            Some(Pedestal {
                fraction: 0.0,
                width_multiplier: 5.0,
            }),
            50_000.0,
            0.0,
            (0.0, 0.060),
            &mut rng,
        );
        assert_eq!(plain.f1.samples, zero.f1.samples);
        assert_eq!(plain.f2.samples, zero.f2.samples);
    }

    #[test]
    fn pedestal_biases_area_and_reduction_restores_it() {
        // A wide pedestal at 30% area biases the fitted peak area; cutting it
        // by more than a factor 30 brings area recovery under 0.5%.
        let template = TraceTemplate::default();
        let areas = [1.0e5, 0.8e5, 0.9e5, 0.7e5];
        let fit_area_error = |fraction: f64| -> f64 {
            let mut rng = ChaCha12Rng::seed_from_u64(1);
            let t = TraceTemplate {
                pedestal: Some(Pedestal {
                    fraction,
                    width_multiplier: 5.0,
                }),
                ..template.clone()
            };
            let pair = shot_traces(&areas, &t, &mut rng);
            let report = fit_peak(&pair.f1, t.windows()[0], None).unwrap();
            (report.area() - areas[0]).abs() / areas[0]
        };
        let biased = fit_area_error(0.3);
        let reduced = fit_area_error(0.3 / 30.0);
        assert!(
            biased > reduced,
            "pedestal bias {biased} not above reduced {reduced}"
        );
        assert!(reduced < 0.005, "reduced-pedestal area error {reduced}");
    }

    #[test]
    fn shot_traces_round_trip_areas() {
        let template = TraceTemplate::default();
        let areas = [1.1e5, 0.9e5, 1.05e5, 0.95e5];
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let pair = shot_traces(&areas, &template, &mut rng);
        let windows = template.windows();
        for (i, (trace, window)) in [
            (&pair.f1, windows[0]),
            (&pair.f2, windows[1]),
            (&pair.f1, windows[2]),
            (&pair.f2, windows[3]),
        ]
        .into_iter()
        .enumerate()
        {
            let report = fit_peak(trace, window, None).unwrap();
            assert_relative_eq!(report.area(), areas[i], max_relative = 1e-6);
        }
    }
}
