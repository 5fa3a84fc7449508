//! Two-sample (Allan) deviation over an octave tau grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Estimator variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AllanMode {
    /// Differences of consecutive non-overlapping block means; matches the
    /// grouped acquisition of the instrument.
    #[default]
    NonOverlapping,
    /// All overlapping block pairs; smoother curves, correlated bins.
    Overlapping,
}

/// Allan deviation per averaging time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllanResult {
    /// Averaging times, s, strictly increasing (octave spaced).
    pub taus: Vec<f64>,
    /// Allan deviation at each tau, input units.
    pub sigmas: Vec<f64>,
    /// Number of squared differences averaged per bin.
    pub counts: Vec<usize>,
}

impl AllanResult {
    /// Least-squares slope of log10(sigma) against log10(tau), skipping
    /// zero-sigma bins.
    pub fn log_log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .taus
            .iter()
            .zip(self.sigmas.iter())
            .filter(|(_, s)| **s > 0.0)
            .map(|(t, s)| (t.log10(), s.log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        (den > 0.0).then(|| num / den)
    }
}

/// Allan deviation of a uniformly spaced series across octave-spaced
/// averaging times (m = 1, 2, 4, ...). Bins with fewer than two differences
/// are omitted.
pub fn allan_deviation(values: &[f64], dt: f64, mode: AllanMode) -> Result<AllanResult> {
    if values.len() < 8 {
        return Err(Error::SeriesTooShort {
            needed: 8,
            got: values.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("sample spacing {dt} must be > 0")));
    }
    let n = values.len();
    let mut taus = Vec::new();
    let mut sigmas = Vec::new();
    let mut counts = Vec::new();
    let mut m = 1usize;
    loop {
        let (variance, count) = match mode {
            AllanMode::NonOverlapping => {
                let k = n / m;
                if k < 2 {
                    break;
                }
                let means: Vec<f64> = (0..k)
                    .map(|j| values[j * m..(j + 1) * m].iter().sum::<f64>() / m as f64)
                    .collect();
                let count = k - 1;
                let sum_sq: f64 = means.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
                (sum_sq / (2.0 * count as f64), count)
            }
            AllanMode::Overlapping => {
                if n < 2 * m + 1 {
                    break;
                }
                let count = n - 2 * m + 1;
                // Prefix sums keep the overlapped estimator linear in n.
                let mut prefix = Vec::with_capacity(n + 1);
                prefix.push(0.0);
                for v in values {
                    prefix.push(prefix.last().unwrap() + v);
                }
                let block = |j: usize| (prefix[j + m] - prefix[j]) / m as f64;
                let sum_sq: f64 = (0..count).map(|j| (block(j + m) - block(j)).powi(2)).sum();
                (sum_sq / (2.0 * count as f64), count)
            }
        };
        if count < 2 {
            break;
        }
        taus.push(m as f64 * dt);
        sigmas.push(variance.sqrt());
        counts.push(count);
        m *= 2;
    }
    if taus.is_empty() {
        return Err(Error::SeriesTooShort { needed: 8, got: n });
    }
    Ok(AllanResult {
        taus,
        sigmas,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_series_gives_zero() {
        let result = allan_deviation(&[3.7; 64], 1.0, AllanMode::NonOverlapping).unwrap();
        for s in &result.sigmas {
            assert_eq!(*s, 0.0);
        }
    }

    #[test]
    fn white_noise_slope_minus_half() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let values: Vec<f64> = (0..65536)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        for mode in [AllanMode::NonOverlapping, AllanMode::Overlapping] {
            let mut result = allan_deviation(&values, 1.0, mode).unwrap();
            // Drop low-count bins where the estimate itself scatters.
            while let Some(&c) = result.counts.last() {
                if c >= 16 {
                    break;
                }
                result.taus.pop();
                result.sigmas.pop();
                result.counts.pop();
            }
            let slope = result.log_log_slope().unwrap();
            assert!(
                (slope + 0.5).abs() < 0.05,
                "{mode:?}: slope {slope} not -0.5 +/- 0.05"
            );
        }
    }

    #[test]
    fn white_noise_sigma_at_tau_one() {
        // sigma_A(dt) of unit white noise is 1 at tau = dt.
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..65536)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let result = allan_deviation(&values, 1.0, AllanMode::NonOverlapping).unwrap();
        assert_relative_eq!(result.sigmas[0], 1.0, max_relative = 0.02);
    }

    #[test]
    fn linear_drift_slope_plus_one() {
        let rate = 1e-3;
        let values: Vec<f64> = (0..4096).map(|i| rate * i as f64).collect();
        let result = allan_deviation(&values, 1.0, AllanMode::NonOverlapping).unwrap();
        let slope = result.log_log_slope().unwrap();
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
        // sigma(tau) = rate * tau / sqrt(2) for a pure drift.
        for (tau, sigma) in result.taus.iter().zip(result.sigmas.iter()) {
            assert_relative_eq!(*sigma, rate * tau / 2f64.sqrt(), max_relative = 1e-9);
        }
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            allan_deviation(&[1.0; 7], 1.0, AllanMode::NonOverlapping),
            Err(Error::SeriesTooShort { .. })
        ));
    }
}
