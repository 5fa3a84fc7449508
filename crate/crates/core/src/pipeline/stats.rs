//! Monitor-channel correlation against the phase series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampled series on its own time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len());
        Self { times, values }
    }

    /// Nearest sample to `t`, if within `max_gap`.
    fn nearest(&self, t: f64, max_gap: f64) -> Option<f64> {
        if self.times.is_empty() {
            return None;
        }
        let i = self.times.partition_point(|&x| x < t);
        let mut best: Option<(f64, f64)> = None;
        for j in [i.wrapping_sub(1), i] {
            if let (Some(&tj), Some(&vj)) = (self.times.get(j), self.values.get(j)) {
                let gap = (tj - t).abs();
                if gap <= max_gap && best.is_none_or(|(g, _)| gap < g) {
                    best = Some((gap, vj));
                }
            }
        }
        best.map(|(_, v)| v)
    }
}

/// Pearson correlation of one monitor channel against the phase series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelCorrelation {
    pub channel: String,
    pub r: f64,
    /// Standard error sqrt((1 - r^2) / (n - 2)).
    pub stderr: f64,
    /// Matched sample count.
    pub n: usize,
}

/// Correlates `phi` against one monitor channel, resampling the monitor onto
/// the phase time base by nearest neighbor within `max_gap`.
pub fn correlate(
    channel: &str,
    phi: &TimeSeries,
    monitor: &TimeSeries,
    max_gap: f64,
) -> Result<ChannelCorrelation> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &p) in phi.times.iter().zip(phi.values.iter()) {
        if let Some(v) = monitor.nearest(t, max_gap) {
            xs.push(p);
            ys.push(v);
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::SeriesTooShort { needed: 3, got: n });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::ConstantSeries(channel.to_string()));
    }
    let r = sxy / (sxx * syy).sqrt();
    let stderr = ((1.0 - r * r) / (n as f64 - 2.0)).max(0.0).sqrt();
    Ok(ChannelCorrelation {
        channel: channel.to_string(),
        r,
        stderr,
        n,
    })
}

/// Correlates every monitor channel against the phase series.
pub fn correlate_monitors(
    phi: &TimeSeries,
    monitors: &[(String, TimeSeries)],
    max_gap: f64,
) -> Result<Vec<ChannelCorrelation>> {
    monitors
        .iter()
        .map(|(name, series)| correlate(name, phi, series, max_gap))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn series(values: Vec<f64>) -> TimeSeries {
        let times = (0..values.len()).map(|i| i as f64).collect();
        TimeSeries::new(times, values)
    }

    #[test]
    fn self_correlation_is_one() {
        let phi = series((0..100).map(|i| (i as f64 * 0.3).sin()).collect());
        let r = correlate("copy", &phi, &phi, 0.5).unwrap();
        assert!((r.r - 1.0).abs() < 1e-12);
        assert_eq!(r.n, 100);
    }

    #[test]
    fn independent_white_noise_uncorrelated() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let a: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = correlate("noise", &series(a), &series(b), 0.5).unwrap();
        // Null distribution: sigma_r ~ 1/sqrt(n); stay within 3 sigma plus
        // margin.
        assert!(r.r.abs() < 0.1, "unexpected correlation {}", r.r);
    }

    #[test]
    fn constant_series_rejected() {
        let phi = series((0..50).map(|i| i as f64).collect());
        let flat = series(vec![2.0; 50]);
        assert!(matches!(
            correlate("flat", &phi, &flat, 0.5),
            Err(Error::ConstantSeries(_))
        ));
    }

    #[test]
    fn nearest_neighbor_respects_gap() {
        let phi = TimeSeries::new(vec![0.0, 10.0, 20.0], vec![1.0, 2.0, 3.0]);
        let monitor = TimeSeries::new(vec![0.1, 9.8, 27.0], vec![1.0, 2.0, 9.0]);
        // Gap 1.0: the 27 s sample is too far from 20 s, leaving 2 matches,
        // below the minimum.
        assert!(correlate("m", &phi, &monitor, 1.0).is_err());
        let r = correlate("m", &phi, &monitor, 10.0).unwrap();
        assert_eq!(r.n, 3);
    }
}
