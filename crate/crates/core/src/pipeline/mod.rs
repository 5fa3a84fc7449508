//! Measurement-protocol statistics: shot grouping and per-group ellipse fits,
//! k-reversal differencing, doubly differential phases between source-mass
//! configurations, Allan deviation, monitor correlation and the sensitivity
//! budget.

mod allan;
mod budget;
mod stats;

pub use allan::{allan_deviation, AllanMode, AllanResult};
pub use budget::{
    extrapolate_zero_current, noise_budget, BudgetReport, BudgetRow, CurrentPhasePoint,
    ExtrapolationModel, ZeroCurrentFit,
};
pub use stats::{correlate, correlate_monitors, ChannelCorrelation, TimeSeries};

use serde::{Deserialize, Serialize};

use crate::ellipse::{estimate_xi, fit_ellipse_with, FitOptions, FitReport};
use crate::error::{Error, Result};
use crate::peaks::normalized_populations;
use crate::sim::{MassConfig, ShotRecord};

/// Smallest supported ellipse group.
pub const MIN_GROUP_SIZE: usize = 36;

/// One fitted group of consecutive same-configuration, same-k shots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupedEllipse {
    pub mass_config: MassConfig,
    pub k_sign: i8,
    pub start_index: u64,
    pub end_index: u64,
    /// Mean wall-clock time of the member shots, s.
    pub mid_time: f64,
    pub fit: FitReport,
}

/// Detection-efficiency handling for grouped fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiMode {
    /// Use this ratio everywhere.
    Fixed(f64),
    /// Estimate one ratio from the whole run, then apply it to every group.
    EstimatePerRun { lo: f64, hi: f64 },
}

impl Default for XiMode {
    fn default() -> Self {
        XiMode::Fixed(1.0)
    }
}

/// Resolves the efficiency ratio a grouped fit will use: the fixed value, or
/// one estimate over the whole run.
///
/// The estimate uses only the run's largest homogeneous
/// (mass configuration, k direction) subset: shots from different k signs or
/// configurations lie on different ellipses, and their union would skew the
/// fit-quality scan.
pub fn resolve_xi(shots: &[ShotRecord], xi: XiMode, opts: &FitOptions) -> Result<f64> {
    match xi {
        XiMode::Fixed(v) => Ok(v),
        XiMode::EstimatePerRun { lo, hi } => {
            let mut subsets: std::collections::BTreeMap<(u8, i8), Vec<[f64; 4]>> =
                std::collections::BTreeMap::new();
            for shot in shots {
                let config_key = match shot.mass_config {
                    MassConfig::C1 => 0u8,
                    MassConfig::C2 => 1u8,
                };
                subsets
                    .entry((config_key, shot.k_sign))
                    .or_default()
                    .push(shot.areas);
            }
            let areas = subsets
                .into_values()
                .max_by_key(Vec::len)
                .ok_or(Error::NoPairs)?;
            Ok(estimate_xi(&areas, (lo, hi), opts)?.xi_hat)
        }
    }
}

/// Partitions shots into ellipses and fits each one.
///
/// Shots split at every mass-configuration change; within a block the two k
/// directions form separate streams, each chunked into `group_size` shots.
/// Trailing shots that do not fill a group are dropped. Group boundaries
/// therefore never straddle a mass move.
pub fn group_and_fit(
    shots: &[ShotRecord],
    group_size: usize,
    xi: XiMode,
    opts: &FitOptions,
) -> Result<Vec<GroupedEllipse>> {
    if group_size < MIN_GROUP_SIZE {
        return Err(Error::GroupTooSmall {
            needed: MIN_GROUP_SIZE,
            got: group_size,
        });
    }
    if shots.is_empty() {
        return Err(Error::TooFewPoints {
            needed: group_size,
            got: 0,
        });
    }

    let xi_value = resolve_xi(shots, xi, opts)?;

    let mut groups = Vec::new();
    let mut block_start = 0usize;
    for i in 1..=shots.len() {
        let block_ends = i == shots.len() || shots[i].mass_config != shots[block_start].mass_config;
        if !block_ends {
            continue;
        }
        let block = &shots[block_start..i];
        for k in [1i8, -1] {
            let members: Vec<&ShotRecord> = block.iter().filter(|s| s.k_sign == k).collect();
            for chunk in members.chunks_exact(group_size) {
                let points = chunk
                    .iter()
                    .map(|s| normalized_populations(&s.areas, xi_value))
                    .collect::<Result<Vec<_>>>()?;
                let fit = fit_ellipse_with(&points, opts)?;
                groups.push(GroupedEllipse {
                    mass_config: chunk[0].mass_config,
                    k_sign: k,
                    start_index: chunk[0].index,
                    end_index: chunk[chunk.len() - 1].index,
                    mid_time: chunk.iter().map(|s| s.time).sum::<f64>() / chunk.len() as f64,
                    fit,
                });
            }
        }
        block_start = i;
    }
    groups.sort_by_key(|g| g.start_index);
    Ok(groups)
}

/// A phase with its 1-sigma error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhaseValue {
    pub phi: f64,
    pub dphi: f64,
}

/// k-reversal difference of a direct and a reverse fit:
/// `phi = phi_dir - phi_rev`, errors in quadrature. k-independent phase
/// offsets enter both fitted angles with opposite sign relative to the
/// k-flipping signal and cancel in the difference, which carries twice the
/// signal phase.
pub fn k_reversal_phase(direct: &FitReport, reverse: &FitReport) -> Result<PhaseValue> {
    if !direct.converged {
        return Err(Error::NotConverged("direct-k fit".into()));
    }
    if !reverse.converged {
        return Err(Error::NotConverged("reverse-k fit".into()));
    }
    Ok(PhaseValue {
        phi: direct.params.phi - reverse.params.phi,
        dphi: (direct.dphi * direct.dphi + reverse.dphi * reverse.dphi).sqrt(),
    })
}

/// Per-configuration k-differenced phase with bookkeeping.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KReversalPhase {
    pub mass_config: MassConfig,
    pub mid_time: f64,
    pub phi: f64,
    pub dphi: f64,
}

/// Pairs direct/reverse groups within each mass-configuration block in
/// temporal order and forms their k-reversal differences.
pub fn k_reversal_series(groups: &[GroupedEllipse]) -> Result<Vec<KReversalPhase>> {
    let mut series = Vec::new();
    let mut i = 0usize;
    while i < groups.len() {
        // Groups are index sorted; a direct and a reverse group covering the
        // same block interleave, so consecutive entries pair up.
        let a = &groups[i];
        let Some(b) = groups.get(i + 1) else { break };
        if a.mass_config == b.mass_config && a.k_sign != b.k_sign {
            let (dir, rev) = if a.k_sign == 1 { (a, b) } else { (b, a) };
            let phase = k_reversal_phase(&dir.fit, &rev.fit)?;
            series.push(KReversalPhase {
                mass_config: a.mass_config,
                mid_time: (a.mid_time + b.mid_time) / 2.0,
                phi: phase.phi,
                dphi: phase.dphi,
            });
            i += 2;
        } else {
            i += 1;
        }
    }
    if series.is_empty() {
        return Err(Error::NoPairs);
    }
    Ok(series)
}

/// One C1/C2 pair of phases with errors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfigPhasePair {
    pub phi_c1: f64,
    pub dphi_c1: f64,
    pub phi_c2: f64,
    pub dphi_c2: f64,
}

/// Doubly differential result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoubleDifference {
    /// Per-pair rotation angles with quadrature errors.
    pub points: Vec<PhaseValue>,
    /// Inverse-variance weighted mean of the per-pair angles.
    pub mean: f64,
    /// Error of the weighted mean.
    pub err: f64,
    /// Total chi-square of the points against the weighted mean.
    pub chi2_total: f64,
    /// Chi-square per degree of freedom (n - 1).
    pub chi2_reduced: f64,
}

/// Differences paired configuration phases and forms their weighted mean
/// and chi-square.
pub fn double_difference(pairs: &[ConfigPhasePair]) -> Result<DoubleDifference> {
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let points: Vec<PhaseValue> = pairs
        .iter()
        .map(|p| PhaseValue {
            phi: p.phi_c1 - p.phi_c2,
            dphi: (p.dphi_c1 * p.dphi_c1 + p.dphi_c2 * p.dphi_c2).sqrt(),
        })
        .collect();
    for p in &points {
        if !(p.dphi > 0.0) {
            return Err(Error::Domain("pair with non-positive error".into()));
        }
    }
    let weight_sum: f64 = points.iter().map(|p| 1.0 / (p.dphi * p.dphi)).sum();
    let mean = points
        .iter()
        .map(|p| p.phi / (p.dphi * p.dphi))
        .sum::<f64>()
        / weight_sum;
    let err = weight_sum.sqrt().recip();
    let chi2_total: f64 = points
        .iter()
        .map(|p| ((p.phi - mean) / p.dphi).powi(2))
        .sum();
    let dof = (points.len().saturating_sub(1)).max(1) as f64;
    Ok(DoubleDifference {
        mean,
        err,
        chi2_total,
        chi2_reduced: chi2_total / dof,
        points,
    })
}

/// Pairs a k-differenced phase series into consecutive (C1, C2) pairs in
/// temporal order.
pub fn pair_configurations(series: &[KReversalPhase]) -> Result<Vec<ConfigPhasePair>> {
    let mut pairs = Vec::new();
    let mut pending_c1: Option<&KReversalPhase> = None;
    let mut pending_c2: Option<&KReversalPhase> = None;
    for phase in series {
        match phase.mass_config {
            MassConfig::C1 => pending_c1 = Some(phase),
            MassConfig::C2 => pending_c2 = Some(phase),
        }
        if let (Some(c1), Some(c2)) = (pending_c1, pending_c2) {
            pairs.push(ConfigPhasePair {
                phi_c1: c1.phi,
                dphi_c1: c1.dphi,
                phi_c2: c2.phi,
                dphi_c2: c2.dphi,
            });
            pending_c1 = None;
            pending_c2 = None;
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    Ok(pairs)
}
