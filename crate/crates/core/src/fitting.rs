//! Shared fitting machinery: damped (Levenberg-style) nonlinear least squares
//! with a numerical Jacobian, weighted linear least squares, and a
//! golden-section scalar minimizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Options for [`levenberg_fit`].
#[derive(Debug, Clone)]
pub struct LeastSquaresOptions {
    /// Iteration budget; exceeding it returns `Error::NoConvergence`.
    pub max_iterations: usize,
    /// Convergence when the largest relative parameter change drops below this.
    pub parameter_tolerance: f64,
    /// Initial damping parameter.
    pub initial_damping: f64,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            parameter_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

/// Converged nonlinear least-squares solution.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub params: Vec<f64>,
    /// RMS of the residual vector at the solution.
    pub residual_rms: f64,
    /// Parameter covariance `s^2 (J^T J)^-1`.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
}

/// Minimizes `|residuals(p)|^2` by iterative local linearization with a
/// damping parameter adapted on residual decrease.
///
/// `residuals` writes one entry per data point into its output slice; the
/// Jacobian is taken by forward differences. Converges when the relative
/// parameter change falls below the configured tolerance.
pub fn levenberg_fit<F>(
    mut residuals: F,
    initial: &[f64],
    residual_len: usize,
    opts: &LeastSquaresOptions,
) -> Result<LeastSquaresFit>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n_params = initial.len();
    assert!(n_params > 0 && residual_len >= n_params);

    let mut params = initial.to_vec();
    let mut resid = vec![0.0; residual_len];
    let mut trial_resid = vec![0.0; residual_len];
    residuals(&params, &mut resid);
    let mut cost: f64 = resid.iter().map(|r| r * r).sum();
    let mut damping = opts.initial_damping;
    let mut jacobian = DMatrix::zeros(residual_len, n_params);
    let mut perturbed = vec![0.0; residual_len];

    for iteration in 1..=opts.max_iterations {
        // Forward-difference Jacobian.
        for j in 0..n_params {
            let step = 1e-8 * params[j].abs().max(1e-8);
            let saved = params[j];
            params[j] = saved + step;
            residuals(&params, &mut perturbed);
            params[j] = saved;
            for i in 0..residual_len {
                jacobian[(i, j)] = (perturbed[i] - resid[i]) / step;
            }
        }

        let r_vec = DVector::from_column_slice(&resid);
        let jt = jacobian.transpose();
        let jtj = &jt * &jacobian;
        let gradient = &jt * &r_vec;

        let mut step_taken = false;
        for _ in 0..40 {
            let mut damped = jtj.clone();
            for k in 0..n_params {
                let d = jtj[(k, k)].max(1e-300);
                damped[(k, k)] = d * (1.0 + damping);
            }
            let Some(solution) = damped.lu().solve(&(-&gradient)) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params
                .iter()
                .zip(solution.iter())
                .map(|(p, dp)| p + dp)
                .collect();
            residuals(&trial, &mut trial_resid);
            let trial_cost: f64 = trial_resid.iter().map(|r| r * r).sum();
            if trial_cost.is_finite() && trial_cost <= cost {
                let max_rel_change = params
                    .iter()
                    .zip(solution.iter())
                    .map(|(p, dp)| dp.abs() / p.abs().max(1e-12))
                    .fold(0.0, f64::max);
                params = trial;
                std::mem::swap(&mut resid, &mut trial_resid);
                cost = trial_cost;
                damping = (damping / 3.0).max(1e-14);
                step_taken = true;
                if max_rel_change < opts.parameter_tolerance {
                    residuals(&params, &mut resid);
                    return Ok(finish(&params, &resid, &jtj, iteration));
                }
                break;
            }
            damping *= 10.0;
            if damping > 1e14 {
                break;
            }
        }

        if !step_taken {
            // Damping saturated: the quadratic model cannot improve the cost,
            // which at a stationary point is convergence.
            return Ok(finish(&params, &resid, &jtj, iteration));
        }
    }

    Err(Error::NoConvergence(opts.max_iterations))
}

fn finish(params: &[f64], resid: &[f64], jtj: &DMatrix<f64>, iterations: usize) -> LeastSquaresFit {
    let m = resid.len();
    let n = params.len();
    let cost: f64 = resid.iter().map(|r| r * r).sum();
    let dof = m.saturating_sub(n).max(1) as f64;
    let variance = cost / dof;
    let covariance = jtj
        .clone()
        .try_inverse()
        .map(|inv| inv * variance)
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    LeastSquaresFit {
        params: params.to_vec(),
        residual_rms: (cost / m as f64).sqrt(),
        covariance,
        iterations,
    }
}

/// Weighted linear least squares over an arbitrary design matrix.
///
/// `weights` are inverse-variance weights (1/sigma_i^2). Returns parameters
/// and their covariance.
pub fn weighted_linear_fit(
    design: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let m = design.nrows();
    let n = design.ncols();
    assert_eq!(y.len(), m);
    assert_eq!(weights.len(), m);
    if m < n {
        return Err(Error::IllConditioned(format!(
            "{m} observations for {n} parameters"
        )));
    }
    let mut xtw_x = DMatrix::zeros(n, n);
    let mut xtw_y = DVector::zeros(n);
    for i in 0..m {
        let w = weights[i];
        for a in 0..n {
            xtw_y[a] += w * design[(i, a)] * y[i];
            for b in 0..n {
                xtw_x[(a, b)] += w * design[(i, a)] * design[(i, b)];
            }
        }
    }
    let inv = xtw_x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("singular normal equations".into()))?;
    // Guard against numerically meaningless inversions.
    let identity_error = (&xtw_x * &inv - DMatrix::<f64>::identity(n, n)).norm();
    if !identity_error.is_finite() || identity_error > 1e-4 {
        return Err(Error::IllConditioned(format!(
            "normal equations near singular (inversion check {identity_error:.2e})"
        )));
    }
    let params = &inv * xtw_y;
    Ok((params.iter().copied().collect(), inv))
}

/// Golden-section minimization of a scalar function on `[lo, hi]`.
///
/// Errors with `NoMinimumInInterval` when the minimizer lands on an endpoint,
/// i.e. the function is monotone over the interval at the given tolerance.
pub fn golden_section_min<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    assert!(hi > lo && tol > 0.0);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let (x_min, f_min) = if fc < fd { (c, fc) } else { (d, fd) };
    // Reject monotone functions: their minimizer collapses onto an endpoint.
    let edge = tol.max((hi - lo) * 1e-3);
    if x_min - lo < edge || hi - x_min < edge {
        let f_lo = f(lo)?;
        let f_hi = f(hi)?;
        if f_lo < f_min || f_hi < f_min {
            return Err(Error::NoMinimumInInterval(lo, hi));
        }
    }
    Ok((x_min, f_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn levenberg_recovers_exponential_decay() {
        // y = a exp(-k t); noiseless self-fit from a rough start.
        let truth = [2.5, 0.7];
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let data: Vec<f64> = times
            .iter()
            .map(|t| truth[0] * (-truth[1] * t).exp())
            .collect();
        let fit = levenberg_fit(
            |p: &[f64], out: &mut [f64]| {
                for (i, t) in times.iter().enumerate() {
                    out[i] = p[0] * (-p[1] * t).exp() - data[i];
                }
            },
            &[1.0, 0.2],
            times.len(),
            &LeastSquaresOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(fit.params[0], truth[0], max_relative = 1e-8);
        assert_relative_eq!(fit.params[1], truth[1], max_relative = 1e-8);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn levenberg_handles_flat_residual() {
        // Already at the optimum: must converge, not diverge.
        let data = [1.0, 1.0, 1.0, 1.0];
        let fit = levenberg_fit(
            |p: &[f64], out: &mut [f64]| {
                for (i, d) in data.iter().enumerate() {
                    out[i] = p[0] - d;
                }
            },
            &[1.0],
            data.len(),
            &LeastSquaresOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(fit.params[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn weighted_fit_matches_hand_solution() {
        // y = 2 + 3 x with exact data and unit weights.
        let xs = [0.0, 1.0, 2.0, 3.0];
        let design = DMatrix::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        let (params, _) = weighted_linear_fit(&design, &y, &[1.0; 4]).unwrap();
        assert_relative_eq!(params[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(params[1], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn weighted_fit_rejects_singular_design() {
        // Two identical columns.
        let design = DMatrix::from_fn(5, 2, |i, _| i as f64);
        let y = vec![0.0; 5];
        assert!(matches!(
            weighted_linear_fit(&design, &y, &[1.0; 5]),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, _) = golden_section_min(|x| Ok((x - 1.3).powi(2)), 0.0, 3.0, 1e-9).unwrap();
        assert_relative_eq!(x, 1.3, epsilon = 1e-7);
    }

    #[test]
    fn golden_section_rejects_monotone() {
        assert!(matches!(
            golden_section_min(|x| Ok(x), 0.0, 1.0, 1e-9),
            Err(Error::NoMinimumInInterval(_, _))
        ));
    }
}
