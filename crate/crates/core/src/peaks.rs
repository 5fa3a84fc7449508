//! Fluorescence peak analysis: Gaussian-times-quartic peak fits, analytic
//! areas, inter-channel crosstalk removal and population normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{levenberg_fit, LeastSquaresOptions};

/// Detection channel, one fluorescence photodiode per hyperfine state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    F1,
    F2,
}

/// Uniformly sampled fluorescence trace from one detection channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTrace {
    pub channel: Channel,
    /// Time of the first sample, s.
    pub t0: f64,
    /// Sample spacing, s.
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl DetectionTrace {
    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.time(i), v))
    }

    fn window_indices(&self, window: (f64, f64)) -> (usize, usize) {
        let lo = ((window.0 - self.t0) / self.dt).ceil().max(0.0) as usize;
        let hi = (((window.1 - self.t0) / self.dt).floor() as usize).min(self.samples.len() - 1);
        (lo, hi)
    }
}

/// Peak model: a Gaussian of height `height`, center `center` and width
/// `sigma`, multiplied by a fourth-order polynomial in `(t - center)`, on a
/// constant baseline. The polynomial factor absorbs the distortion of the
/// finite detection bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakModel {
    pub height: f64,
    /// Peak center time, s.
    pub center: f64,
    /// Gaussian width, s.
    pub sigma: f64,
    /// Polynomial coefficients for (t - center)^1 .. ^4.
    pub poly: [f64; 4],
    pub baseline: f64,
}

impl PeakModel {
    /// Pure Gaussian with zero polynomial and baseline.
    pub fn gaussian(height: f64, center: f64, sigma: f64) -> Self {
        Self {
            height,
            center,
            sigma,
            poly: [0.0; 4],
            baseline: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let u = t - self.center;
        let poly = 1.0
            + self.poly[0] * u
            + self.poly[1] * u * u
            + self.poly[2] * u * u * u
            + self.poly[3] * u * u * u * u;
        self.height * poly * (-u * u / (2.0 * self.sigma * self.sigma)).exp() + self.baseline
    }

    /// Analytic baseline-subtracted area:
    /// `h sigma sqrt(2 pi) (1 + a2 sigma^2 + 3 a4 sigma^4)`.
    ///
    /// Odd polynomial terms integrate to zero against the centered Gaussian.
    pub fn area(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.height
            * self.sigma
            * (2.0 * std::f64::consts::PI).sqrt()
            * (1.0 + self.poly[1] * s2 + 3.0 * self.poly[3] * s2 * s2)
    }

    /// Structural sanity: positive height and width, polynomial factor
    /// positive over center +/- 4 sigma.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.height > 0.0) {
            return Err(Error::Domain(format!(
                "peak requires height > 0 and sigma > 0, got {} / {}",
                self.height, self.sigma
            )));
        }
        for i in -40..=40 {
            let u = i as f64 / 10.0 * self.sigma;
            let poly = 1.0
                + self.poly[0] * u
                + self.poly[1] * u * u
                + self.poly[2] * u * u * u
                + self.poly[3] * u * u * u * u;
            if poly <= 0.0 {
                return Err(Error::Domain(format!(
                    "polynomial factor non-positive at {u} s from center"
                )));
            }
        }
        Ok(())
    }
}

/// Result of a single peak fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakFitReport {
    pub model: PeakModel,
    pub residual_rms: f64,
    /// Covariance of (height, center, sigma, a1..a4, baseline), row major.
    pub covariance: Vec<Vec<f64>>,
    /// Set when the residual run structure is incompatible with white noise,
    /// e.g. after bandwidth distortion that the model cannot absorb.
    pub runs_test_flag: bool,
    /// z statistic of the runs test (negative: too few sign runs).
    pub runs_test_z: f64,
}

impl PeakFitReport {
    pub fn area(&self) -> f64 {
        self.model.area()
    }
}

const MIN_WINDOW_SAMPLES: usize = 50;
const MIN_PEAK_SNR: f64 = 3.0;
const RUNS_TEST_THRESHOLD: f64 = -3.0;

/// Fits one detection peak inside `window` to the Gaussian-times-quartic
/// model by damped least squares over all eight parameters.
///
/// Initial guesses, when not supplied, come from window moments: argmax for
/// the center, max-minus-baseline for the height, FWHM/2.355 for the width,
/// zero polynomial. Windows whose peak SNR is below 3 are rejected.
pub fn fit_peak(
    trace: &DetectionTrace,
    window: (f64, f64),
    init: Option<PeakModel>,
) -> Result<PeakFitReport> {
    if trace.samples.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: MIN_WINDOW_SAMPLES,
            got: trace.samples.len(),
        });
    }
    let (lo, hi) = trace.window_indices(window);
    if hi <= lo || hi - lo + 1 < MIN_WINDOW_SAMPLES {
        return Err(Error::TooFewPoints {
            needed: MIN_WINDOW_SAMPLES,
            got: hi.saturating_sub(lo) + 1,
        });
    }
    let times: Vec<f64> = (lo..=hi).map(|i| trace.time(i)).collect();
    let values: Vec<f64> = trace.samples[lo..=hi].to_vec();

    let guess = match init {
        Some(m) => m,
        None => moment_guess(&times, &values),
    };

    // Edge-sample scatter estimates the noise floor for the SNR gate.
    let edge = (values.len() / 10).max(3);
    let edge_samples: Vec<f64> = values[..edge]
        .iter()
        .chain(values[values.len() - edge..].iter())
        .copied()
        .collect();
    let edge_mean = mean(&edge_samples);
    let noise = (edge_samples
        .iter()
        .map(|v| (v - edge_mean).powi(2))
        .sum::<f64>()
        / edge_samples.len() as f64)
        .sqrt();
    // Short moving average before the amplitude estimate, so the maximum of
    // a pure-noise window does not masquerade as a peak.
    let smoothed = moving_average(&values, 5);
    let amplitude = smoothed.iter().cloned().fold(f64::MIN, f64::max) - edge_mean;
    if noise > 0.0 {
        let snr = amplitude / noise;
        if snr < MIN_PEAK_SNR {
            return Err(Error::DegenerateWindow {
                snr,
                min_snr: MIN_PEAK_SNR,
            });
        }
    } else if !(amplitude > 0.0) {
        return Err(Error::DegenerateWindow {
            snr: 0.0,
            min_snr: MIN_PEAK_SNR,
        });
    }

    let initial = [
        guess.height,
        guess.center,
        guess.sigma,
        guess.poly[0],
        guess.poly[1],
        guess.poly[2],
        guess.poly[3],
        guess.baseline,
    ];
    let fit = levenberg_fit(
        |p: &[f64], out: &mut [f64]| {
            let model = params_to_model(p);
            for (i, (&t, &v)) in times.iter().zip(values.iter()).enumerate() {
                out[i] = model.eval(t) - v;
            }
        },
        &initial,
        times.len(),
        &LeastSquaresOptions::default(),
    )?;

    let mut model = params_to_model(&fit.params);
    // The model is even in sigma; canonicalize the positive branch.
    model.sigma = model.sigma.abs();

    let residuals: Vec<f64> = times
        .iter()
        .zip(values.iter())
        .map(|(&t, &v)| v - model.eval(t))
        .collect();
    let z = runs_test_z(&residuals);

    let n = fit.params.len();
    let covariance = (0..n)
        .map(|i| (0..n).map(|j| fit.covariance[(i, j)]).collect())
        .collect();

    Ok(PeakFitReport {
        model,
        residual_rms: fit.residual_rms,
        covariance,
        runs_test_flag: z < RUNS_TEST_THRESHOLD,
        runs_test_z: z,
    })
}

fn params_to_model(p: &[f64]) -> PeakModel {
    PeakModel {
        height: p[0],
        center: p[1],
        sigma: p[2],
        poly: [p[3], p[4], p[5], p[6]],
        baseline: p[7],
    }
}

fn moment_guess(times: &[f64], values: &[f64]) -> PeakModel {
    let edge = (values.len() / 10).max(1);
    let baseline = values[..edge]
        .iter()
        .chain(values[values.len() - edge..].iter())
        .sum::<f64>()
        / (2 * edge) as f64;
    let (argmax, &max) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty window");
    let height = (max - baseline).max(f64::MIN_POSITIVE);
    let half = baseline + height / 2.0;
    let mut left = argmax;
    while left > 0 && values[left] > half {
        left -= 1;
    }
    let mut right = argmax;
    while right + 1 < values.len() && values[right] > half {
        right += 1;
    }
    let fwhm = (times[right] - times[left]).max(times[1] - times[0]);
    PeakModel {
        height,
        center: times[argmax],
        sigma: fwhm / 2.355,
        poly: [0.0; 4],
        baseline,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn moving_average(values: &[f64], half: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Wald-Wolfowitz runs test statistic over residual signs. Strongly negative
/// z means long same-sign runs, i.e. structured residuals.
fn runs_test_z(residuals: &[f64]) -> f64 {
    let signs: Vec<bool> = residuals
        .iter()
        .filter(|r| **r != 0.0)
        .map(|r| *r > 0.0)
        .collect();
    let n_plus = signs.iter().filter(|s| **s).count() as f64;
    let n_minus = signs.len() as f64 - n_plus;
    if n_plus < 1.0 || n_minus < 1.0 || signs.len() < 3 {
        return 0.0;
    }
    let runs = 1 + signs.windows(2).filter(|w| w[0] != w[1]).count();
    let n = signs.len() as f64;
    let mu = 1.0 + 2.0 * n_plus * n_minus / n;
    let var = (mu - 1.0) * (mu - 2.0) / (n - 1.0);
    if var <= 0.0 {
        return 0.0;
    }
    (runs as f64 - mu) / var.sqrt()
}

/// Removes linear inter-channel crosstalk of fraction `kappa`, returning
/// `((f1 - k f2) / (1 - k^2), (f2 - k f1) / (1 - k^2))`.
pub fn remove_crosstalk(
    f1: &DetectionTrace,
    f2: &DetectionTrace,
    kappa: f64,
) -> Result<(DetectionTrace, DetectionTrace)> {
    if !(0.0..0.2).contains(&kappa) {
        return Err(Error::Domain(format!(
            "crosstalk fraction {kappa} outside [0, 0.2)"
        )));
    }
    check_aligned(f1, f2)?;
    let norm = 1.0 / (1.0 - kappa * kappa);
    let mut out1 = f1.clone();
    let mut out2 = f2.clone();
    for i in 0..f1.samples.len() {
        out1.samples[i] = (f1.samples[i] - kappa * f2.samples[i]) * norm;
        out2.samples[i] = (f2.samples[i] - kappa * f1.samples[i]) * norm;
    }
    Ok((out1, out2))
}

/// Estimates the crosstalk fraction from a window where only `source` carries
/// real signal, as the least-squares slope of the contaminated channel
/// against the source after mean subtraction.
pub fn estimate_crosstalk(
    source: &DetectionTrace,
    contaminated: &DetectionTrace,
    window: (f64, f64),
) -> Result<f64> {
    check_aligned(source, contaminated)?;
    let (lo, hi) = source.window_indices(window);
    if hi <= lo + 2 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: hi.saturating_sub(lo) + 1,
        });
    }
    let s = &source.samples[lo..=hi];
    let c = &contaminated.samples[lo..=hi];
    let ms = mean(s);
    let mc = mean(c);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..s.len() {
        num += (s[i] - ms) * (c[i] - mc);
        den += (s[i] - ms) * (s[i] - ms);
    }
    if den <= 0.0 {
        return Err(Error::ZeroSignal("source window is constant".into()));
    }
    Ok(num / den)
}

fn check_aligned(a: &DetectionTrace, b: &DetectionTrace) -> Result<()> {
    let tol = a.dt * 1e-6;
    if (a.t0 - b.t0).abs() > tol || (a.dt - b.dt).abs() > tol || a.samples.len() != b.samples.len()
    {
        return Err(Error::MisalignedTraces(format!(
            "t0 {} vs {}, dt {} vs {}, len {} vs {}",
            a.t0,
            b.t0,
            a.dt,
            b.dt,
            a.samples.len(),
            b.samples.len()
        )));
    }
    Ok(())
}

/// Normalized populations (x, y) from the four peak areas
/// `[A11, A21, A12, A22]` (state index first, cloud index second; cloud 1 is
/// the lower cloud) with detection-efficiency ratio `xi`:
///
/// `x = A11 / (A11 + A21 / xi)`, `y = A12 / (A12 + A22 / xi)`.
///
/// `xi = 1` reproduces the raw (distorted) coordinates; passing the true
/// efficiency ratio undoes the distortion. The endpoints x = 0 and x = 1 are
/// fixed points for every `xi > 0`.
pub fn normalized_populations(areas: &[f64; 4], xi: f64) -> Result<(f64, f64)> {
    normalized_populations_per_cloud(areas, xi, xi)
}

/// [`normalized_populations`] with independent efficiency ratios for the
/// lower (x) and upper (y) cloud.
pub fn normalized_populations_per_cloud(
    areas: &[f64; 4],
    xi_lower: f64,
    xi_upper: f64,
) -> Result<(f64, f64)> {
    if !(xi_lower > 0.0 && xi_upper > 0.0) {
        return Err(Error::Domain(format!(
            "efficiency ratios must be > 0, got {xi_lower} / {xi_upper}"
        )));
    }
    if areas.iter().any(|a| *a < 0.0) {
        return Err(Error::Domain("negative peak area".into()));
    }
    let [a11, a21, a12, a22] = *areas;
    let lower_total = a11 + a21 / xi_lower;
    let upper_total = a12 + a22 / xi_upper;
    if lower_total <= 0.0 {
        return Err(Error::ZeroSignal("lower cloud has zero total area".into()));
    }
    if upper_total <= 0.0 {
        return Err(Error::ZeroSignal("upper cloud has zero total area".into()));
    }
    Ok((a11 / lower_total, a12 / upper_total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Simpson quadrature of the baseline-subtracted model over +/- 8 sigma.
    fn area_by_quadrature(m: &PeakModel) -> f64 {
        let n = 32_768usize;
        let lo = m.center - 8.0 * m.sigma;
        let hi = m.center + 8.0 * m.sigma;
        let h = (hi - lo) / n as f64;
        let f = |t: f64| m.eval(t) - m.baseline;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 0 { 2.0 } else { 4.0 };
            acc += w * f(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn synth_trace(models: &[PeakModel], t0: f64, dt: f64, n: usize) -> DetectionTrace {
        let samples = (0..n)
            .map(|i| {
                let t = t0 + i as f64 * dt;
                models.iter().map(|m| m.eval(t)).sum()
            })
            .collect();
        DetectionTrace {
            channel: Channel::F1,
            t0,
            dt,
            samples,
        }
    }

    #[test]
    fn area_of_unit_gaussian() {
        let m = PeakModel::gaussian(1.0, 0.0, 1.0);
        assert_relative_eq!(
            m.area(),
            (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn area_with_quadratic_term() {
        let mut m = PeakModel::gaussian(1.0, 0.0, 1.0);
        m.poly[1] = 0.1;
        let expected = (2.0 * std::f64::consts::PI).sqrt() * 1.1;
        assert_relative_eq!(m.area(), expected, max_relative = 1e-12);
        assert_relative_eq!(m.area(), area_by_quadrature(&m), max_relative = 1e-9);
    }

    #[test]
    fn area_ignores_odd_terms() {
        let mut m = PeakModel::gaussian(2.0, 0.5, 0.3);
        let base = m.area();
        m.poly[0] = 0.4;
        m.poly[2] = 0.02;
        assert_eq!(m.area(), base);
        assert_relative_eq!(m.area(), area_by_quadrature(&m), max_relative = 1e-8);
    }

    #[test]
    fn area_matches_quadrature_over_random_models() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..40 {
            let sigma = rng.random_range(0.5e-3..5e-3);
            let m = PeakModel {
                height: rng.random_range(0.1..10.0),
                center: rng.random_range(-0.01..0.01),
                sigma,
                poly: [
                    rng.random_range(-0.2..0.2) / sigma,
                    rng.random_range(-0.1..0.3) / (sigma * sigma),
                    rng.random_range(-0.05..0.05) / (sigma * sigma * sigma),
                    rng.random_range(0.0..0.01) / (sigma * sigma * sigma * sigma),
                ],
                baseline: rng.random_range(-1.0..1.0),
            };
            assert_relative_eq!(m.area(), area_by_quadrature(&m), max_relative = 1e-6);
        }
    }

    #[test]
    fn fit_recovers_pure_gaussian_exactly() {
        let truth = PeakModel::gaussian(1.37, 0.052, 1.9e-3);
        let trace = synth_trace(&[truth], 0.03, 5e-5, 900);
        let report = fit_peak(&trace, (0.040, 0.064), None).unwrap();
        assert_relative_eq!(report.model.height, truth.height, max_relative = 1e-8);
        assert_relative_eq!(report.model.center, truth.center, max_relative = 1e-8);
        assert_relative_eq!(report.model.sigma, truth.sigma, max_relative = 1e-8);
        assert_abs_diff_eq!(report.model.baseline, 0.0, epsilon = 1e-8);
        assert!(report.residual_rms < 1e-9);
    }

    #[test]
    fn fit_with_distortion_and_noise_recovers_area() {
        // beta = 0.05 / sigma^2, delta = 0.001 / sigma^4, noise 0.4% of h:
        // the recovered area stays within 0.6%.
        let sigma = 2.0e-3;
        let mut truth = PeakModel::gaussian(1.0, 0.05, sigma);
        truth.poly[1] = 0.05 / (sigma * sigma);
        truth.poly[3] = 0.001 / (sigma * sigma * sigma * sigma);
        let mut trace = synth_trace(&[truth], 0.03, 5e-5, 900);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for s in &mut trace.samples {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += 0.004 * z;
        }
        let report = fit_peak(&trace, (0.038, 0.062), None).unwrap();
        let err = (report.area() - truth.area()).abs() / truth.area();
        assert!(err < 0.006, "area error {err} above 0.6%");
    }

    #[test]
    fn structured_residuals_raise_runs_flag() {
        // Low-pass the synthetic peak with a moving average; the smoothing
        // distortion leaves structured residuals the model cannot absorb.
        let truth = PeakModel::gaussian(1.0, 0.05, 1.5e-3);
        let clean = synth_trace(&[truth], 0.03, 5e-5, 900);
        let mut smoothed = clean.clone();
        let half = 25usize;
        for i in 0..clean.samples.len() {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(clean.samples.len() - 1);
            smoothed.samples[i] = clean.samples[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        }
        let report = fit_peak(&smoothed, (0.040, 0.060), None).unwrap();
        assert!(
            report.runs_test_flag,
            "expected structured-residual flag, z = {}",
            report.runs_test_z
        );

        let clean_report = fit_peak(&clean, (0.040, 0.060), None).unwrap();
        assert!(!clean_report.runs_test_flag);
    }

    #[test]
    fn degenerate_window_rejected() {
        let mut trace = synth_trace(&[PeakModel::gaussian(1.0, 10.0, 1e-3)], 0.0, 5e-5, 1000);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for s in &mut trace.samples {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += 0.01 * z;
        }
        // Window far from the peak: noise only.
        assert!(matches!(
            fit_peak(&trace, (0.0, 0.04), None),
            Err(Error::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn crosstalk_zero_is_identity() {
        let a = synth_trace(&[PeakModel::gaussian(1.0, 0.05, 2e-3)], 0.0, 1e-4, 1000);
        let b = synth_trace(&[PeakModel::gaussian(0.7, 0.08, 2e-3)], 0.0, 1e-4, 1000);
        let (ua, ub) = remove_crosstalk(&a, &b, 0.0).unwrap();
        assert_eq!(ua.samples, a.samples);
        assert_eq!(ub.samples, b.samples);
    }

    #[test]
    fn crosstalk_round_trip() {
        let a = synth_trace(&[PeakModel::gaussian(1.0, 0.05, 2e-3)], 0.0, 1e-4, 1000);
        let b = synth_trace(&[PeakModel::gaussian(0.7, 0.08, 2e-3)], 0.0, 1e-4, 1000);
        let kappa = 0.05;
        let mut mixed_a = a.clone();
        let mut mixed_b = b.clone();
        for i in 0..a.samples.len() {
            mixed_a.samples[i] = a.samples[i] + kappa * b.samples[i];
            mixed_b.samples[i] = b.samples[i] + kappa * a.samples[i];
        }
        let (ua, ub) = remove_crosstalk(&mixed_a, &mixed_b, kappa).unwrap();
        for i in 0..a.samples.len() {
            assert_abs_diff_eq!(ua.samples[i], a.samples[i], epsilon = 1e-12);
            assert_abs_diff_eq!(ub.samples[i], b.samples[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn crosstalk_estimated_from_single_peak_region() {
        // Only channel 1 has signal in the window; channel 2 sees kappa times
        // that plus noise.
        let kappa = 0.08;
        let signal = synth_trace(&[PeakModel::gaussian(1.0, 0.05, 2e-3)], 0.0, 1e-4, 1000);
        let mut contaminated = signal.clone();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for i in 0..signal.samples.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            contaminated.samples[i] = kappa * signal.samples[i] + 5e-4 * z;
        }
        let estimated = estimate_crosstalk(&signal, &contaminated, (0.04, 0.06)).unwrap();
        assert!(
            (estimated - kappa).abs() / kappa < 0.02,
            "estimated {estimated} vs injected {kappa}"
        );
    }

    #[test]
    fn crosstalk_rejects_misaligned() {
        let a = synth_trace(&[PeakModel::gaussian(1.0, 0.05, 2e-3)], 0.0, 1e-4, 1000);
        let mut b = a.clone();
        b.t0 += 1e-3;
        assert!(matches!(
            remove_crosstalk(&a, &b, 0.05),
            Err(Error::MisalignedTraces(_))
        ));
    }

    #[test]
    fn populations_balanced_areas() {
        let (x, y) = normalized_populations(&[2.0, 2.0, 3.0, 3.0], 1.0).unwrap();
        assert_eq!(x, 0.5);
        assert_eq!(y, 0.5);
    }

    #[test]
    fn populations_round_trip_through_distortion() {
        // Areas generated with xi_true = 1.05, corrected with the same xi.
        let xi_true = 1.05;
        let (x_true, y_true) = (0.37, 0.81);
        let (n_lower, n_upper) = (1.0e5, 1.3e5);
        let areas = [
            x_true * n_lower / xi_true,
            (1.0 - x_true) * n_lower,
            y_true * n_upper / xi_true,
            (1.0 - y_true) * n_upper,
        ];
        let (x, y) = normalized_populations(&areas, xi_true).unwrap();
        assert_relative_eq!(x, x_true, max_relative = 1e-12);
        assert_relative_eq!(y, y_true, max_relative = 1e-12);
    }

    #[test]
    fn populations_endpoints_fixed_under_xi() {
        for xi in [0.5, 0.9, 1.0, 1.05, 2.0] {
            let (x, _) = normalized_populations(&[4.0, 0.0, 1.0, 1.0], xi).unwrap();
            assert_eq!(x, 1.0);
            let (x0, _) = normalized_populations(&[0.0, 4.0, 1.0, 1.0], xi).unwrap();
            assert_eq!(x0, 0.0);
        }
    }

    #[test]
    fn populations_zero_signal_error() {
        assert!(matches!(
            normalized_populations(&[0.0, 0.0, 1.0, 1.0], 1.0),
            Err(Error::ZeroSignal(_))
        ));
    }
}
