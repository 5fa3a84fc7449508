//! Sensitivity budget from the ledger and zero-current phase extrapolation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::weighted_linear_fit;
use crate::ledger::{Kind, SensitivityLedger, Target, Timescale};

/// One parameter's projected contribution to a phase observable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetRow {
    pub parameter: String,
    pub target: Target,
    /// Projected phase contribution, rad: |slope| rms (linear rows) or
    /// |curvature| rms^2 (quadratic rows).
    pub contribution: f64,
    /// Upper limit rather than a measured value; reported but excluded from
    /// the quadrature totals.
    pub bound: bool,
    pub kind: Kind,
    /// RMS used, in the row's unit.
    pub rms: f64,
    pub unit: String,
}

/// Budget over all ledger parameters at one timescale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetReport {
    pub timescale: Timescale,
    /// Rows sorted by descending contribution.
    pub rows: Vec<BudgetRow>,
    /// Quadrature sum of the non-bound mean-phase contributions, rad.
    pub mean_total: f64,
    /// Quadrature sum of the non-bound differential-phase contributions, rad.
    pub diff_total: f64,
}

/// Projects parameter fluctuations into mean- and differential-phase
/// contributions.
///
/// `rms_overrides` replaces the ledger's tabulated RMS for the named
/// parameters (values in ledger units); every override must name a ledger
/// parameter. Bound rows are carried along flagged but never summed.
pub fn noise_budget(
    ledger: &SensitivityLedger,
    rms_overrides: &BTreeMap<String, f64>,
    timescale: Timescale,
) -> Result<BudgetReport> {
    for (name, rms) in rms_overrides {
        if !ledger.contains(name) {
            return Err(Error::UnknownParameter(name.clone()));
        }
        if *rms < 0.0 {
            return Err(Error::Domain(format!("negative RMS for {name}")));
        }
    }

    let mut rows = Vec::new();
    for row in ledger.rows() {
        if !matches!(row.target, Target::MeanPhase | Target::DiffPhase) {
            continue;
        }
        let rms = rms_overrides
            .get(&row.parameter)
            .copied()
            .unwrap_or(match timescale {
                Timescale::Te => row.rms_te,
                Timescale::Day => row.rms_day,
            });
        let contribution = match row.kind {
            Kind::Linear => row.value.abs() * rms,
            Kind::Quadratic => row.value.abs() * rms * rms,
        };
        rows.push(BudgetRow {
            parameter: row.parameter.clone(),
            target: row.target,
            contribution,
            bound: row.bound,
            kind: row.kind,
            rms,
            unit: row.unit.clone(),
        });
    }
    rows.sort_by(|a, b| b.contribution.total_cmp(&a.contribution));

    let total = |target: Target| -> f64 {
        rows.iter()
            .filter(|r| r.target == target && !r.bound)
            .map(|r| r.contribution * r.contribution)
            .sum::<f64>()
            .sqrt()
    };

    Ok(BudgetReport {
        timescale,
        mean_total: total(Target::MeanPhase),
        diff_total: total(Target::DiffPhase),
        rows,
    })
}

/// Phase measured at one solenoid current.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurrentPhasePoint {
    /// Solenoid current, A.
    pub current: f64,
    /// Ellipse phase angle, rad.
    pub phi: f64,
    /// 1-sigma error, rad.
    pub err: f64,
}

/// Polynomial model for the current scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtrapolationModel {
    /// phi = a + c i^2 (vertex pinned at zero current).
    Parabola,
    /// phi = a + b i + c i^2 (vertex offset bounds a stray field).
    ParabolaPlusLinear,
}

/// Zero-current extrapolation of a solenoid scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeroCurrentFit {
    pub model: ExtrapolationModel,
    /// Extrapolated phase at zero current, rad.
    pub intercept: f64,
    pub intercept_err: f64,
    /// Quadratic coefficient, rad/A^2.
    pub curvature: f64,
    pub curvature_err: f64,
    /// Linear coefficient, rad/A (zero for the pure parabola).
    pub linear: f64,
    /// Parabola vertex, A; a nonzero vertex converts to a residual-field
    /// bound through the solenoid coefficient.
    pub vertex_current: f64,
}

impl ZeroCurrentFit {
    /// Residual static field implied by the vertex offset, T.
    pub fn stray_field_bound(&self, b0_per_amp: f64) -> f64 {
        self.vertex_current.abs() * b0_per_amp
    }
}

/// Weighted polynomial fit of phase against solenoid current, extrapolated
/// to zero current. Requires at least four distinct currents.
pub fn extrapolate_zero_current(
    points: &[CurrentPhasePoint],
    model: ExtrapolationModel,
) -> Result<ZeroCurrentFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.current).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < f64::EPSILON);
    if distinct.len() < 4 {
        return Err(Error::IllConditioned(format!(
            "need >= 4 distinct currents, got {}",
            distinct.len()
        )));
    }

    let n_params = match model {
        ExtrapolationModel::Parabola => 2,
        ExtrapolationModel::ParabolaPlusLinear => 3,
    };
    let design = DMatrix::from_fn(points.len(), n_params, |i, j| {
        let current = points[i].current;
        match (model, j) {
            (_, 0) => 1.0,
            (ExtrapolationModel::Parabola, 1) => current * current,
            (ExtrapolationModel::ParabolaPlusLinear, 1) => current,
            (ExtrapolationModel::ParabolaPlusLinear, 2) => current * current,
            _ => unreachable!(),
        }
    });
    let y: Vec<f64> = points.iter().map(|p| p.phi).collect();
    let weights: Vec<f64> = points
        .iter()
        .map(|p| {
            if p.err > 0.0 {
                1.0 / (p.err * p.err)
            } else {
                1.0
            }
        })
        .collect();
    let (params, covariance) = weighted_linear_fit(&design, &y, &weights)?;

    let (linear, curvature, curvature_err) = match model {
        ExtrapolationModel::Parabola => (0.0, params[1], covariance[(1, 1)].max(0.0).sqrt()),
        ExtrapolationModel::ParabolaPlusLinear => {
            (params[1], params[2], covariance[(2, 2)].max(0.0).sqrt())
        }
    };
    let vertex_current = if curvature.abs() > 0.0 && model == ExtrapolationModel::ParabolaPlusLinear
    {
        -linear / (2.0 * curvature)
    } else {
        0.0
    };

    Ok(ZeroCurrentFit {
        model,
        intercept: params[0],
        intercept_err: covariance[(0, 0)].max(0.0).sqrt(),
        curvature,
        curvature_err,
        linear,
        vertex_current,
    })
}
