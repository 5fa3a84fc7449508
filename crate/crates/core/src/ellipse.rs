//! Differential-phase extraction by least-squares ellipse fitting.
//!
//! Points (x, y) follow the parametric fringe model
//!
//! ```text
//! x(t) = A sin(t) + B
//! y(t) = C sin(t + phi) + D
//! ```
//!
//! and the differential phase `phi` is read off the ellipse they trace.
//! Fitting runs in stages: a direct algebraic conic fit (minimizing algebraic
//! distance under an ellipse-enforcing normalization, solved as a small
//! generalized eigenproblem), conversion of the conic to (A, B, C, D, phi),
//! then an optional geometric refinement over the five parameters with the
//! fringe phases `t_i` profiled out by per-point projection.
//!
//! The parametric point set is invariant under `phi -> -phi` (reflection
//! `t -> pi - t`), so the fit determines `phi` only up to sign; results are
//! canonicalized into (0, pi) and orientation is left to the k-reversal
//! differencing of the analysis pipeline.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{levenberg_fit, LeastSquaresOptions};
use crate::peaks::normalized_populations;

/// Parametric fringe-ellipse parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    /// Fringe amplitude of the x (lower-cloud) signal.
    pub x_amplitude: f64,
    /// Fringe center of the x signal.
    pub x_center: f64,
    /// Fringe amplitude of the y (upper-cloud) signal.
    pub y_amplitude: f64,
    /// Fringe center of the y signal.
    pub y_center: f64,
    /// Differential phase, rad, canonicalized into (0, pi).
    pub phi: f64,
}

impl EllipseParams {
    /// Point on the ellipse at fringe phase `t`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        (
            self.x_amplitude * t.sin() + self.x_center,
            self.y_amplitude * (t + self.phi).sin() + self.y_center,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_amplitude > 0.0 && self.y_amplitude > 0.0) {
            return Err(Error::Domain("ellipse amplitudes must be positive".into()));
        }
        if !(self.phi > 0.0 && self.phi < std::f64::consts::PI) {
            return Err(Error::Domain(format!("phi {} outside (0, pi)", self.phi)));
        }
        Ok(())
    }
}

/// Outcome of one ellipse fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub params: EllipseParams,
    /// 1-sigma uncertainty on phi, rad.
    pub dphi: f64,
    /// Per-coordinate RMS of the geometric residuals.
    pub rms: f64,
    pub n_points: usize,
    pub converged: bool,
    /// How `dphi` was obtained.
    pub dphi_method: String,
}

/// Fit configuration.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Run the geometric refinement stage after the algebraic fit.
    pub refine: bool,
    /// Residual-bootstrap resamples for `dphi`; 0 selects the linearized
    /// covariance instead.
    pub bootstrap_resamples: usize,
    /// Seed for the bootstrap resampling stream.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            refine: true,
            bootstrap_resamples: 200,
            seed: 0,
        }
    }
}

impl FitOptions {
    /// Fast variant for Monte-Carlo sweeps: no bootstrap, linearized dphi.
    pub fn fast() -> Self {
        Self {
            refine: true,
            bootstrap_resamples: 0,
            seed: 0,
        }
    }
}

/// Fits the fringe ellipse to `points` with default options
/// (geometric refinement plus 200-resample residual bootstrap).
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<FitReport> {
    fit_ellipse_with(points, &FitOptions::default())
}

/// Fits the fringe ellipse to `points`.
pub fn fit_ellipse_with(points: &[(f64, f64)], opts: &FitOptions) -> Result<FitReport> {
    if points.len() < 6 {
        return Err(Error::TooFewPoints {
            needed: 6,
            got: points.len(),
        });
    }
    let conic = fit_conic(points)?;
    let algebraic = conic_to_params(&conic)?;

    let (params, converged) = if opts.refine {
        match refine_geometric(points, algebraic) {
            Ok(refined) => (refined, true),
            Err(Error::NoConvergence(_)) => (algebraic, false),
            Err(e) => return Err(e),
        }
    } else {
        (algebraic, true)
    };

    let (ts, residuals) = project_residuals(points, &params);
    let rms = (residuals
        .iter()
        .map(|(dx, dy)| dx * dx + dy * dy)
        .sum::<f64>()
        / (2 * points.len()) as f64)
        .sqrt();

    let (dphi, dphi_method) = if opts.bootstrap_resamples > 0 {
        (
            bootstrap_dphi(&params, &ts, &residuals, opts),
            format!("residual-bootstrap-{}", opts.bootstrap_resamples),
        )
    } else {
        (
            linearized_phi_sigma(points, &params, &ts),
            "linearized-covariance".to_string(),
        )
    };

    Ok(FitReport {
        params,
        dphi: dphi.max(f64::MIN_POSITIVE),
        rms,
        n_points: points.len(),
        converged,
        dphi_method,
    })
}

/// One point of a phi-versus-xi scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct XiScanPoint {
    pub xi: f64,
    pub phi: f64,
    pub dphi: f64,
}

/// Recomputes normalized populations for every `xi` on the grid and refits,
/// tracing out `phi(xi)` and `dphi(xi)`. Both curves reach their minimum near
/// the true detection-efficiency ratio.
pub fn phi_vs_xi(
    areas: &[[f64; 4]],
    xi_grid: &[f64],
    opts: &FitOptions,
) -> Result<Vec<XiScanPoint>> {
    xi_grid
        .iter()
        .map(|&xi| {
            let points = areas
                .iter()
                .map(|a| normalized_populations(a, xi))
                .collect::<Result<Vec<_>>>()?;
            let report = fit_ellipse_with(&points, opts)?;
            Ok(XiScanPoint {
                xi,
                phi: report.params.phi,
                dphi: report.dphi,
            })
        })
        .collect()
}

/// Detection-efficiency estimate from fit-quality minimization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct XiEstimate {
    pub xi_hat: f64,
    pub phi_at_min: f64,
    pub dphi_at_min: f64,
    /// Local quadratic curvature of the minimized fit-quality objective.
    pub curvature: f64,
}

/// Estimates the detection-efficiency ratio by golden-section minimization of
/// the fit-quality curve over `interval`.
///
/// The minimized objective is the geometric residual RMS of the ellipse fit:
/// the residual phase error and the RMS share the same valley (the
/// distortion left by a wrong ratio is exactly what neither can absorb), and
/// the RMS is deterministic in xi. The reported `dphi_at_min` comes from a
/// full fit at the minimizer.
pub fn estimate_xi(
    areas: &[[f64; 4]],
    interval: (f64, f64),
    opts: &FitOptions,
) -> Result<XiEstimate> {
    let (lo, hi) = interval;
    if !(hi > lo && lo > 0.0) {
        return Err(Error::Domain(format!(
            "invalid xi search interval [{lo}, {hi}]"
        )));
    }
    let fast = FitOptions {
        bootstrap_resamples: 0,
        ..opts.clone()
    };
    let mut objective = |xi: f64| -> Result<f64> {
        let points = areas
            .iter()
            .map(|a| normalized_populations(a, xi))
            .collect::<Result<Vec<_>>>()?;
        Ok(fit_ellipse_with(&points, &fast)?.rms)
    };
    // Coarse grid first, then golden section inside the bracketing cells.
    const GRID: usize = 16;
    let step = (hi - lo) / GRID as f64;
    let mut best = (0usize, f64::INFINITY);
    for k in 0..=GRID {
        let value = objective(lo + k as f64 * step)?;
        if value < best.1 {
            best = (k, value);
        }
    }
    if best.0 == 0 || best.0 == GRID {
        return Err(Error::NoMinimumInInterval(lo, hi));
    }
    let bracket_lo = lo + (best.0 - 1) as f64 * step;
    let bracket_hi = lo + (best.0 + 1) as f64 * step;
    let tol = (hi - lo) * 1e-4;
    let (xi_hat, rms_at_min) =
        match crate::fitting::golden_section_min(&mut objective, bracket_lo, bracket_hi, tol) {
            Ok(found) => found,
            // Wiggle at the bracket edge: fall back to the grid minimum.
            Err(Error::NoMinimumInInterval(_, _)) => (lo + best.0 as f64 * step, best.1),
            Err(e) => return Err(e),
        };

    let h = ((hi - lo) / 20.0).max(10.0 * tol);
    let f_plus = objective((xi_hat + h).min(hi))?;
    let f_minus = objective((xi_hat - h).max(lo))?;
    let curvature = (f_plus - 2.0 * rms_at_min + f_minus) / (h * h);

    let points = areas
        .iter()
        .map(|a| normalized_populations(a, xi_hat))
        .collect::<Result<Vec<_>>>()?;
    let report = fit_ellipse_with(&points, opts)?;

    Ok(XiEstimate {
        xi_hat,
        phi_at_min: report.params.phi,
        dphi_at_min: report.dphi,
        curvature,
    })
}

/// Independent per-cloud efficiency estimates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct XiPairEstimate {
    pub xi_lower: f64,
    pub xi_upper: f64,
    pub phi_at_min: f64,
    pub dphi_at_min: f64,
}

/// Per-cloud variant of [`estimate_xi`]: minimizes the same fit-quality
/// objective over independent lower/upper efficiency ratios by coordinate
/// descent (three sweeps of golden-section line searches).
pub fn estimate_xi_per_cloud(
    areas: &[[f64; 4]],
    interval: (f64, f64),
    opts: &FitOptions,
) -> Result<XiPairEstimate> {
    let (lo, hi) = interval;
    if !(hi > lo && lo > 0.0) {
        return Err(Error::Domain(format!(
            "invalid xi search interval [{lo}, {hi}]"
        )));
    }
    let fast = FitOptions {
        bootstrap_resamples: 0,
        ..opts.clone()
    };
    let objective = |xi_lower: f64, xi_upper: f64| -> Result<f64> {
        let points = areas
            .iter()
            .map(|a| crate::peaks::normalized_populations_per_cloud(a, xi_lower, xi_upper))
            .collect::<Result<Vec<_>>>()?;
        Ok(fit_ellipse_with(&points, &fast)?.rms)
    };
    let tol = (hi - lo) * 1e-3;
    let mut xi_lower = (lo + hi) / 2.0;
    let mut xi_upper = (lo + hi) / 2.0;
    for _ in 0..3 {
        let fixed_upper = xi_upper;
        match crate::fitting::golden_section_min(|x| objective(x, fixed_upper), lo, hi, tol) {
            Ok((x, _)) => xi_lower = x,
            Err(Error::NoMinimumInInterval(_, _)) => {}
            Err(e) => return Err(e),
        }
        let fixed_lower = xi_lower;
        match crate::fitting::golden_section_min(|x| objective(fixed_lower, x), lo, hi, tol) {
            Ok((x, _)) => xi_upper = x,
            Err(Error::NoMinimumInInterval(_, _)) => {}
            Err(e) => return Err(e),
        }
    }
    let points = areas
        .iter()
        .map(|a| crate::peaks::normalized_populations_per_cloud(a, xi_lower, xi_upper))
        .collect::<Result<Vec<_>>>()?;
    let report = fit_ellipse_with(&points, opts)?;
    Ok(XiPairEstimate {
        xi_lower,
        xi_upper,
        phi_at_min: report.params.phi,
        dphi_at_min: report.dphi,
    })
}

// ---------------------------------------------------------------------------
// Stage 1: direct algebraic conic fit
// ---------------------------------------------------------------------------

/// Direct least-squares conic fit with the ellipse constraint 4ac - b^2 = 1
/// imposed through a generalized eigenproblem. Returns coefficients of
/// `a x^2 + b xy + c y^2 + d x + e y + f = 0`.
fn fit_conic(points: &[(f64, f64)]) -> Result<[f64; 6]> {
    let n = points.len();
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let mean_dist = points
        .iter()
        .map(|p| ((p.0 - mean_x).powi(2) + (p.1 - mean_y).powi(2)).sqrt())
        .sum::<f64>()
        / n as f64;
    if mean_dist < 1e-12 {
        return Err(Error::DegenerateConic);
    }
    let scale = std::f64::consts::SQRT_2 / mean_dist;

    // Scatter matrix over the design rows [x^2, xy, y^2, x, y, 1].
    let mut s = DMatrix::<f64>::zeros(6, 6);
    let mut row = [0.0; 6];
    for &(px, py) in points {
        let x = (px - mean_x) * scale;
        let y = (py - mean_y) * scale;
        row[0] = x * x;
        row[1] = x * y;
        row[2] = y * y;
        row[3] = x;
        row[4] = y;
        row[5] = 1.0;
        for i in 0..6 {
            for j in i..6 {
                s[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..6 {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }

    let s11 = s.fixed_view::<3, 3>(0, 0).into_owned();
    let s12 = s.fixed_view::<3, 3>(0, 3).into_owned();
    let s22 = s.fixed_view::<3, 3>(3, 3).into_owned();
    let s22_inv = s22.try_inverse().ok_or(Error::DegenerateConic)?;
    let reduced = s11 - s12 * s22_inv * s12.transpose();

    // Constraint matrix of 4ac - b^2; its inverse is constant.
    let c1_inv = Matrix3::new(0.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.5, 0.0, 0.0);
    let system = c1_inv * reduced;

    let quad = constrained_eigenvector(&system).ok_or(Error::DegenerateConic)?;
    let linear = -s22_inv * s12.transpose() * quad;

    let coeffs = denormalize_conic(
        [quad[0], quad[1], quad[2], linear[0], linear[1], linear[2]],
        mean_x,
        mean_y,
        scale,
    );
    if coeffs[1] * coeffs[1] - 4.0 * coeffs[0] * coeffs[2] >= 0.0 {
        return Err(Error::DegenerateConic);
    }
    Ok(coeffs)
}

/// Eigenvector of the 3x3 system satisfying the ellipse constraint
/// `4 v0 v2 - v1^2 > 0`; exactly one eigenvalue qualifies for clean data.
fn constrained_eigenvector(system: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let trace = system[(0, 0)] + system[(1, 1)] + system[(2, 2)];
    let minor_sum = system[(0, 0)] * system[(1, 1)] - system[(0, 1)] * system[(1, 0)]
        + system[(0, 0)] * system[(2, 2)]
        - system[(0, 2)] * system[(2, 0)]
        + system[(1, 1)] * system[(2, 2)]
        - system[(1, 2)] * system[(2, 1)];
    let det = system.determinant();

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in real_cubic_roots(-trace, minor_sum, -det) {
        let shifted = system - Matrix3::identity() * lambda;
        let Some(v) = adjugate_null_vector(&shifted) else {
            continue;
        };
        if 4.0 * v[0] * v[2] - v[1] * v[1] > 0.0 {
            match best {
                Some((l, _)) if lambda.abs() >= l.abs() => {}
                _ => best = Some((lambda.abs(), v)),
            }
        }
    }
    best.map(|(_, v)| v)
}

/// Null vector of a rank-2 matrix: the largest row of the adjugate.
fn adjugate_null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [
        Vector3::new(
            m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
            -(m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)]),
            m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)],
        ),
        Vector3::new(
            -(m[(0, 1)] * m[(2, 2)] - m[(0, 2)] * m[(2, 1)]),
            m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
            -(m[(0, 0)] * m[(2, 1)] - m[(0, 1)] * m[(2, 0)]),
        ),
        Vector3::new(
            m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)],
            -(m[(0, 0)] * m[(1, 2)] - m[(0, 2)] * m[(1, 0)]),
            m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        ),
    ];
    let v = rows
        .iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))?;
    let norm = v.norm();
    if norm < 1e-30 {
        return None;
    }
    Some(v / norm)
}

/// Real roots of `x^3 + p2 x^2 + p1 x + p0`.
fn real_cubic_roots(p2: f64, p1: f64, p0: f64) -> Vec<f64> {
    let p = p1 - p2 * p2 / 3.0;
    let q = 2.0 * p2 * p2 * p2 / 27.0 - p2 * p1 / 3.0 + p0;
    let shift = -p2 / 3.0;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    if disc >= 0.0 {
        let r = (-p / 3.0).max(0.0).sqrt();
        if r < 1e-300 {
            return vec![shift];
        }
        let cos_arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let theta = cos_arg.acos();
        (0..3)
            .map(|k| {
                2.0 * r * ((theta + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift
            })
            .collect()
    } else {
        let sqrt_term = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let u = (-q / 2.0 + sqrt_term).cbrt();
        let v = (-q / 2.0 - sqrt_term).cbrt();
        vec![u + v + shift]
    }
}

/// Undo the centroid/scale normalization of the conic coefficients.
fn denormalize_conic(c: [f64; 6], mx: f64, my: f64, s: f64) -> [f64; 6] {
    let [a, b, cc, d, e, f] = c;
    let s2 = s * s;
    [
        a * s2,
        b * s2,
        cc * s2,
        -2.0 * a * s2 * mx - b * s2 * my + d * s,
        -b * s2 * mx - 2.0 * cc * s2 * my + e * s,
        a * s2 * mx * mx + b * s2 * mx * my + cc * s2 * my * my - d * s * mx - e * s * my + f,
    ]
}

// ---------------------------------------------------------------------------
// Stage 2: conic -> parametric parameters
// ---------------------------------------------------------------------------

/// Converts conic coefficients to (A, B, C, D, phi).
///
/// Eliminating `t` from the parametric model gives, with `u = (x - B)/A`,
/// `v = (y - D)/C`:
///
/// `u^2 + v^2 - 2 u v cos(phi) = sin^2(phi)`
///
/// so the centered quadratic part is proportional to
/// `(1/A^2, -2 cos(phi)/(A C), 1/C^2)` and the constant fixes the scale.
fn conic_to_params(coeffs: &[f64; 6]) -> Result<EllipseParams> {
    let mut c = *coeffs;
    if c[0] < 0.0 {
        for v in &mut c {
            *v = -*v;
        }
    }
    let [a, b, cc, d, e, f] = c;
    let det = 4.0 * a * cc - b * b;
    if det <= 0.0 || a <= 0.0 || cc <= 0.0 {
        return Err(Error::DegenerateConic);
    }
    let x_center = (b * e - 2.0 * cc * d) / det;
    let y_center = (b * d - 2.0 * a * e) / det;
    let at_center = a * x_center * x_center
        + b * x_center * y_center
        + cc * y_center * y_center
        + d * x_center
        + e * y_center
        + f;
    let sin_sq = 1.0 - b * b / (4.0 * a * cc);
    let lambda = -at_center / sin_sq;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::DegenerateConic);
    }
    let x_amplitude = (lambda / a).sqrt();
    let y_amplitude = (lambda / cc).sqrt();
    let cos_phi = (-b / (2.0 * (a * cc).sqrt())).clamp(-1.0, 1.0);
    let phi = cos_phi.acos();
    // Conics within 1e-3 of phi = 0 or pi sit numerically on the
    // ellipse/line boundary (collinear input lands here) and carry no
    // usable phase.
    if !(MIN_RESOLVED_PHI..=std::f64::consts::PI - MIN_RESOLVED_PHI).contains(&phi) {
        return Err(Error::DegenerateConic);
    }
    Ok(EllipseParams {
        x_amplitude,
        x_center,
        y_amplitude,
        y_center,
        phi,
    })
}

const MIN_RESOLVED_PHI: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Stage 3: geometric refinement
// ---------------------------------------------------------------------------

/// Nonlinear least squares over (A, B, C, D, phi) with the per-point fringe
/// phases profiled out by projection onto the current ellipse.
fn refine_geometric(points: &[(f64, f64)], start: EllipseParams) -> Result<EllipseParams> {
    let mut ts = vec![f64::NAN; points.len()];
    let initial = [
        start.x_amplitude,
        start.x_center,
        start.y_amplitude,
        start.y_center,
        start.phi,
    ];
    let fit = levenberg_fit(
        |p: &[f64], out: &mut [f64]| {
            let params = slice_to_params(p);
            for (i, &(x, y)) in points.iter().enumerate() {
                let t = project_point(&params, x, y, ts[i]);
                ts[i] = t;
                let (mx, my) = params.point_at(t);
                out[2 * i] = x - mx;
                out[2 * i + 1] = y - my;
            }
        },
        &initial,
        2 * points.len(),
        &LeastSquaresOptions::default(),
    )?;
    Ok(canonicalize(slice_to_params(&fit.params)))
}

fn slice_to_params(p: &[f64]) -> EllipseParams {
    EllipseParams {
        x_amplitude: p[0],
        x_center: p[1],
        y_amplitude: p[2],
        y_center: p[3],
        phi: p[4],
    }
}

/// Folds (A, C, phi) into the canonical branch A, C > 0, phi in (0, pi).
/// Sign flips of the amplitudes are absorbed by fringe-phase shifts and
/// `phi -> -phi` by the reflection `t -> pi - t`, so the point set is
/// unchanged.
fn canonicalize(mut p: EllipseParams) -> EllipseParams {
    if p.x_amplitude < 0.0 {
        p.x_amplitude = -p.x_amplitude;
        p.phi = std::f64::consts::PI - p.phi;
    }
    if p.y_amplitude < 0.0 {
        p.y_amplitude = -p.y_amplitude;
        p.phi += std::f64::consts::PI;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    p.phi = p.phi.rem_euclid(two_pi);
    if p.phi > std::f64::consts::PI {
        p.phi = two_pi - p.phi;
    }
    p
}

/// Fringe phase minimizing the squared distance from (x, y) to the ellipse.
/// Warm-starts from `hint` when finite, otherwise seeds from the four
/// analytic candidates of the x and y equations, then polishes with Newton.
fn project_point(p: &EllipseParams, x: f64, y: f64, hint: f64) -> f64 {
    let dist_sq = |t: f64| -> f64 {
        let (mx, my) = p.point_at(t);
        (x - mx) * (x - mx) + (y - my) * (y - my)
    };

    let mut t = if hint.is_finite() {
        hint
    } else {
        let u = ((x - p.x_center) / p.x_amplitude).clamp(-1.0, 1.0);
        let v = ((y - p.y_center) / p.y_amplitude).clamp(-1.0, 1.0);
        let from_x = u.asin();
        let from_y = v.asin() - p.phi;
        let candidates = [
            from_x,
            std::f64::consts::PI - from_x,
            from_y,
            std::f64::consts::PI - v.asin() - p.phi,
        ];
        candidates
            .into_iter()
            .min_by(|a, b| dist_sq(*a).total_cmp(&dist_sq(*b)))
            .unwrap()
    };

    for _ in 0..12 {
        let (sx, cx_) = t.sin_cos();
        let (sy, cy_) = (t + p.phi).sin_cos();
        let ex = p.x_amplitude * sx + p.x_center - x;
        let ey = p.y_amplitude * sy + p.y_center - y;
        let g1 = ex * p.x_amplitude * cx_ + ey * p.y_amplitude * cy_;
        let g2 = p.x_amplitude * p.x_amplitude * cx_ * cx_ - ex * p.x_amplitude * sx
            + p.y_amplitude * p.y_amplitude * cy_ * cy_
            - ey * p.y_amplitude * sy;
        let step = if g2 > 1e-300 {
            -(g1 / g2).clamp(-0.5, 0.5)
        } else {
            -(g1.signum()) * 0.1
        };
        t += step;
        if step.abs() < 1e-13 {
            break;
        }
    }
    t
}

/// Projects every point and returns the fringe phases and (dx, dy) residuals.
fn project_residuals(points: &[(f64, f64)], params: &EllipseParams) -> (Vec<f64>, Vec<(f64, f64)>) {
    let mut ts = Vec::with_capacity(points.len());
    let mut residuals = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let t = project_point(params, x, y, f64::NAN);
        let (mx, my) = params.point_at(t);
        ts.push(t);
        residuals.push((x - mx, y - my));
    }
    (ts, residuals)
}

// ---------------------------------------------------------------------------
// Uncertainty
// ---------------------------------------------------------------------------

/// Residual-bootstrap uncertainty: resample (dx, dy) residual pairs with
/// replacement onto the fitted points and refit. Resample refits use the
/// algebraic stage; the refinement offset is common to all resamples and
/// cancels in the scatter.
///
/// The geometric projection absorbs each point's tangential noise component
/// into its fringe phase, so raw residuals carry only about half the noise
/// power; the usual degrees-of-freedom factor sqrt(m / (m - p)) with m = 2N
/// observations and p = N + 5 parameters restores the scale.
fn bootstrap_dphi(
    params: &EllipseParams,
    ts: &[f64],
    residuals: &[(f64, f64)],
    opts: &FitOptions,
) -> f64 {
    let n = ts.len();
    if n <= 5 {
        return f64::MIN_POSITIVE;
    }
    let inflation = (2.0 * n as f64 / (n as f64 - 5.0)).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let mut phis = Vec::with_capacity(opts.bootstrap_resamples);
    let fitted: Vec<(f64, f64)> = ts.iter().map(|&t| params.point_at(t)).collect();
    let mut resampled = vec![(0.0, 0.0); n];
    for _ in 0..opts.bootstrap_resamples {
        for i in 0..n {
            let j = rng.random_range(0..n);
            resampled[i] = (
                fitted[i].0 + inflation * residuals[j].0,
                fitted[i].1 + inflation * residuals[j].1,
            );
        }
        if let Ok(p) = fit_conic(&resampled).and_then(|c| conic_to_params(&c)) {
            phis.push(p.phi);
        }
    }
    if phis.len() < 2 {
        return f64::MIN_POSITIVE;
    }
    let mean = phis.iter().sum::<f64>() / phis.len() as f64;
    (phis.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (phis.len() - 1) as f64).sqrt()
}

/// Linearized 1-sigma on phi from the Gauss-Newton information at the
/// solution, with the per-point fringe phases profiled out: each point's
/// information block is reduced by its projection on the local tangent
/// direction before accumulation.
fn linearized_phi_sigma(points: &[(f64, f64)], params: &EllipseParams, ts: &[f64]) -> f64 {
    let n = points.len();
    let mut information = nalgebra::Matrix5::<f64>::zeros();
    let mut cost = 0.0;
    for (i, &(x, y)) in points.iter().enumerate() {
        let t = ts[i];
        let (st, ct) = t.sin_cos();
        let (sp, cp) = (t + params.phi).sin_cos();
        let ex = params.x_amplitude * st + params.x_center - x;
        let ey = params.y_amplitude * sp + params.y_center - y;
        cost += ex * ex + ey * ey;
        // d(model)/d(A, B, C, D, phi) for the x and y coordinates, and the
        // tangent d(model)/dt.
        let jx = [st, 1.0, 0.0, 0.0, 0.0];
        let jy = [0.0, 0.0, sp, 1.0, params.y_amplitude * cp];
        let gx = params.x_amplitude * ct;
        let gy = params.y_amplitude * cp;
        let g_norm_sq = gx * gx + gy * gy;
        for a in 0..5 {
            for b in 0..5 {
                let full = jx[a] * jx[b] + jy[a] * jy[b];
                let tangent = if g_norm_sq > 1e-300 {
                    (jx[a] * gx + jy[a] * gy) * (jx[b] * gx + jy[b] * gy) / g_norm_sq
                } else {
                    0.0
                };
                information[(a, b)] += full - tangent;
            }
        }
    }
    // Residual dof: 2N observations minus N fringe phases minus 5 parameters.
    let dof = n.saturating_sub(5).max(1) as f64;
    let variance = cost / dof;
    information
        .try_inverse()
        .map(|inv| (inv[(4, 4)] * variance).max(0.0).sqrt())
        .unwrap_or(f64::NAN)
}
