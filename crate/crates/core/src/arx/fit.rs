use nalgebra::DVector;

use super::{ArxModel, RegressionProblem};
use crate::error::{Result, SbmError};

/// Largest accepted ratio of extreme singular values of the regressor.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Least-squares fit through a Householder QR of the regressor matrix.
///
/// The triangular factor's singular values gate the solve: a ratio above
/// [`CONDITION_LIMIT`] is reported as rank deficiency. The returned model
/// carries `residual_variance = SSE / rows`.
pub fn fit_least_squares(problem: &RegressionProblem) -> Result<ArxModel> {
    let rows = problem.row_count();
    let cols = problem.column_count();
    if rows < cols {
        return Err(SbmError::TooShort {
            needed: cols,
            available: rows,
        });
    }
    let qr = problem.phi.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || smax / smin > CONDITION_LIMIT {
        return Err(SbmError::RankDeficient(format!(
            "regressor singular values span [{smin:e}, {smax:e}]"
        )));
    }
    let mut qty = problem.y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = DVector::from_iterator(cols, qty.iter().take(cols).copied());
    let theta = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| SbmError::RankDeficient("singular triangular factor".into()))?;

    let mut model = problem.empty_model();
    model.set_theta(&theta)?;
    model.residual_variance = sse(problem, &theta) / rows as f64;
    Ok(model)
}

/// Sum of squared residuals of `theta` on `problem`.
pub fn sse(problem: &RegressionProblem, theta: &DVector<f64>) -> f64 {
    (&problem.y - &problem.phi * theta).norm_squared()
}

/// Normalized AIC, `ln(SSE/n) + 2k/n`.
///
/// The residual variance is floored at machine resolution relative to the
/// mean square of the target, so exact fits of different orders compare by
/// their penalty term alone instead of by rounding noise.
pub fn naic(problem: &RegressionProblem, model: &ArxModel) -> f64 {
    naic_value(
        sse(problem, &model.theta()),
        problem.row_count(),
        model.param_count(),
        problem.y.norm_squared(),
    )
}

/// `ln(max(sse, eps * target_energy) / n) + 2k/n`.
pub fn naic_value(sse: f64, n: usize, k: usize, target_energy: f64) -> f64 {
    let n = n as f64;
    let floor = (f64::EPSILON * target_energy).max(f64::MIN_POSITIVE);
    (sse.max(floor) / n).ln() + 2.0 * k as f64 / n
}
