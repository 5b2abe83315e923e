use super::ArxModel;
use crate::error::{Result, SbmError};

/// One-step prediction from measured history.
///
/// `y_past` and each `u_past[i]` are chronological; their last `N` values
/// are used, the final element being time `t-1`.
pub fn predict_one_step(model: &ArxModel, y_past: &[f64], u_past: &[&[f64]]) -> Result<f64> {
    let n = model.order;
    if u_past.len() != model.input_count() {
        return Err(SbmError::DimensionMismatch {
            expected: model.input_count(),
            actual: u_past.len(),
        });
    }
    let short = std::iter::once(y_past.len())
        .chain(u_past.iter().map(|u| u.len()))
        .find(|&l| l < n);
    if let Some(available) = short {
        return Err(SbmError::InsufficientHistory {
            needed: n,
            available,
        });
    }
    let ly = y_past.len();
    let mut acc = 0.0;
    for j in 0..n {
        acc -= model.a[j] * y_past[ly - 1 - j];
    }
    for (bi, u) in model.b.iter().zip(u_past) {
        let lu = u.len();
        for j in 0..n {
            acc += bi[j] * u[lu - 1 - j];
        }
    }
    Ok(acc)
}

/// Free-run simulation over `horizon` steps.
///
/// `initial_y` holds the `N` measured outputs preceding the horizon. Each
/// `inputs[i]` is aligned with `initial_y` followed by the horizon, so it
/// needs at least `N + horizon - 1` values. Predictions are fed back as
/// lagged outputs.
pub fn simulate_free_run(
    model: &ArxModel,
    initial_y: &[f64],
    inputs: &[&[f64]],
    horizon: usize,
) -> Result<Vec<f64>> {
    let n = model.order;
    if initial_y.len() != n {
        return Err(SbmError::InsufficientHistory {
            needed: n,
            available: initial_y.len(),
        });
    }
    if inputs.len() != model.input_count() {
        return Err(SbmError::DimensionMismatch {
            expected: model.input_count(),
            actual: inputs.len(),
        });
    }
    let need = n + horizon.saturating_sub(1);
    if let Some(u) = inputs.iter().find(|u| u.len() < need) {
        return Err(SbmError::InsufficientHistory {
            needed: need,
            available: u.len(),
        });
    }
    Ok(run(model, initial_y, inputs, 0, horizon))
}

/// Free run over samples `start..start + horizon` of full-length channels,
/// seeded with the measured outputs `start - N..start`.
pub fn simulate_window(
    model: &ArxModel,
    y: &[f64],
    inputs: &[&[f64]],
    start: usize,
    horizon: usize,
) -> Result<Vec<f64>> {
    let n = model.order;
    if start < n {
        return Err(SbmError::InsufficientHistory {
            needed: n,
            available: start,
        });
    }
    if start + horizon > y.len() {
        return Err(SbmError::InsufficientData(format!(
            "window {start}+{horizon} exceeds {} samples",
            y.len()
        )));
    }
    if inputs.len() != model.input_count() {
        return Err(SbmError::DimensionMismatch {
            expected: model.input_count(),
            actual: inputs.len(),
        });
    }
    Ok(run(model, &y[start - n..start], inputs, start - n, horizon))
}

/// Core recursion. `inputs` index `offset + k` lines up with seed sample `k`.
fn run(
    model: &ArxModel,
    seed: &[f64],
    inputs: &[&[f64]],
    offset: usize,
    horizon: usize,
) -> Vec<f64> {
    let n = model.order;
    // hist[k] is the output at relative sample k (seed first, then predictions)
    let mut hist = Vec::with_capacity(n + horizon);
    hist.extend_from_slice(seed);
    for k in n..n + horizon {
        let mut acc = 0.0;
        for j in 0..n {
            acc -= model.a[j] * hist[k - 1 - j];
        }
        for (bi, u) in model.b.iter().zip(inputs) {
            for j in 0..n {
                acc += bi[j] * u[offset + k - 1 - j];
            }
        }
        hist.push(acc);
    }
    hist.split_off(n)
}
