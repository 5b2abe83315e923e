//! Linear ARX models of the form
//!
//! ```text
//! y_t + a_1 y_{t-1} + ... + a_N y_{t-N} = sum_i sum_j b_{i,j} u_{i,t-j} + e_t
//! ```
//!
//! with a single order `N` shared by the autoregressive part and every
//! input. The flat parameter vector is
//! `theta = [-a_1..-a_N, b_{1,1}..b_{1,N}, ..., b_{M,1}..b_{M,N}]`, and the
//! matching regressor at time `t` is
//! `[y_{t-1}..y_{t-N}, u_{1,t-1}..u_{1,t-N}, ..., u_{M,t-N}]`, so that
//! `y_t = regressor_t . theta + e_t`.

mod fit;
mod order;
mod simulate;
mod state_space;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use fit::{fit_least_squares, naic, naic_value, sse, CONDITION_LIMIT};
pub use order::{select_order, OrderCell, OrderSelection, PARSIMONY_TOLERANCE};
pub use simulate::{predict_one_step, simulate_free_run, simulate_window};
pub use state_space::{to_state_space, StateSpace};

use crate::dataio::TimeSeriesFrame;
use crate::error::{Result, SbmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArxModel {
    pub order: usize,
    /// Input channel names; their count is `M`.
    pub inputs: Vec<String>,
    #[serde(default)]
    pub output: String,
    /// Autoregressive coefficients `a_1..a_N`.
    pub a: Vec<f64>,
    /// Input coefficients, `b[i][j]` is `b_{i+1,j+1}`.
    pub b: Vec<Vec<f64>>,
    pub sample_interval_s: f64,
    #[serde(default)]
    pub residual_variance: f64,
}

impl ArxModel {
    /// Zero model with the given shape.
    pub fn zeros(
        order: usize,
        inputs: Vec<String>,
        output: impl Into<String>,
        sample_interval_s: f64,
    ) -> Self {
        let m = inputs.len();
        Self {
            order,
            inputs,
            output: output.into(),
            a: vec![0.0; order],
            b: vec![vec![0.0; order]; m],
            sample_interval_s,
            residual_variance: 0.0,
        }
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    /// Length of `theta`, `N + M*N`.
    pub fn param_count(&self) -> usize {
        self.order * (1 + self.input_count())
    }

    pub fn theta(&self) -> DVector<f64> {
        let n = self.order;
        let mut th = DVector::zeros(self.param_count());
        for j in 0..n {
            th[j] = -self.a[j];
        }
        for (i, bi) in self.b.iter().enumerate() {
            for j in 0..n {
                th[n + i * n + j] = bi[j];
            }
        }
        th
    }

    /// Replaces all coefficients from a flat `theta`.
    pub fn set_theta(&mut self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(SbmError::DimensionMismatch {
                expected: self.param_count(),
                actual: theta.len(),
            });
        }
        let n = self.order;
        for j in 0..n {
            self.a[j] = -theta[j];
        }
        for (i, bi) in self.b.iter_mut().enumerate() {
            for j in 0..n {
                bi[j] = theta[n + i * n + j];
            }
        }
        Ok(())
    }

    pub fn with_theta(&self, theta: &DVector<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.set_theta(theta)?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(SbmError::config("order", "model order must be at least 1"));
        }
        if self.a.len() != self.order {
            return Err(SbmError::DimensionMismatch {
                expected: self.order,
                actual: self.a.len(),
            });
        }
        if self.b.len() != self.inputs.len() {
            return Err(SbmError::DimensionMismatch {
                expected: self.inputs.len(),
                actual: self.b.len(),
            });
        }
        for bi in &self.b {
            if bi.len() != self.order {
                return Err(SbmError::DimensionMismatch {
                    expected: self.order,
                    actual: bi.len(),
                });
            }
        }
        Ok(())
    }

    /// Roots of `z^N + a_1 z^{N-1} + ... + a_N` as `(re, im)` pairs.
    pub fn poles(&self) -> Vec<(f64, f64)> {
        let n = self.order;
        let comp = DMatrix::from_fn(n, n, |r, c| {
            if r == 0 {
                -self.a[c]
            } else if r == c + 1 {
                1.0
            } else {
                0.0
            }
        });
        comp.complex_eigenvalues()
            .iter()
            .map(|z| (z.re, z.im))
            .collect()
    }

    /// True when every pole lies strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|(re, im)| re.hypot(*im) < 1.0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = crate::read_json(path)?;
        m.validate()?;
        Ok(m)
    }
}

/// Writes the regressor for time `t` into `out`.
///
/// `output` and `inputs` are full channel slices; requires `t >= order`.
pub fn fill_regressor(output: &[f64], inputs: &[&[f64]], order: usize, t: usize, out: &mut [f64]) {
    for j in 0..order {
        out[j] = output[t - 1 - j];
    }
    for (i, u) in inputs.iter().enumerate() {
        let base = order * (i + 1);
        for j in 0..order {
            out[base + j] = u[t - 1 - j];
        }
    }
}

/// Splits a model-ready frame into (inputs, output): the last channel is the
/// output, all others are inputs.
pub fn split_channels(frame: &TimeSeriesFrame) -> Result<(Vec<&[f64]>, &[f64])> {
    let c = frame.channel_count();
    if c < 1 {
        return Err(SbmError::InvalidFrame("frame has no channels".into()));
    }
    let inputs = (0..c - 1).map(|i| frame.channel_at(i)).collect();
    Ok((inputs, frame.channel_at(c - 1)))
}

/// Stacked regression `Y = Phi theta + e` over every sample with a full lag history.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub phi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub order: usize,
    pub input_names: Vec<String>,
    pub output_name: String,
    pub sample_interval_s: f64,
}

impl RegressionProblem {
    pub fn row_count(&self) -> usize {
        self.y.len()
    }

    pub fn column_count(&self) -> usize {
        self.phi.ncols()
    }

    /// Zero model with this problem's shape.
    pub fn empty_model(&self) -> ArxModel {
        ArxModel::zeros(
            self.order,
            self.input_names.clone(),
            self.output_name.clone(),
            self.sample_interval_s,
        )
    }
}

/// Builds the regression for an ARX model of `order` on a frame whose last
/// channel is the output.
pub fn build_regression(data: &TimeSeriesFrame, order: usize) -> Result<RegressionProblem> {
    if order == 0 {
        return Err(SbmError::config("order", "model order must be at least 1"));
    }
    let len = data.len();
    if len <= order {
        return Err(SbmError::TooShort {
            needed: order,
            available: len,
        });
    }
    let (inputs, output) = split_channels(data)?;
    let cols = order * (1 + inputs.len());
    let rows = len - order;
    let mut phi = DMatrix::zeros(rows, cols);
    let mut buf = vec![0.0; cols];
    for r in 0..rows {
        fill_regressor(output, &inputs, order, r + order, &mut buf);
        for (c, v) in buf.iter().enumerate() {
            phi[(r, c)] = *v;
        }
    }
    let names = data.channel_names();
    Ok(RegressionProblem {
        phi,
        y: DVector::from_column_slice(&output[order..]),
        order,
        input_names: names[..names.len() - 1]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        output_name: names[names.len() - 1].to_string(),
        sample_interval_s: data.sample_interval_s(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(len: usize, m: usize) -> TimeSeriesFrame {
        let mut cols: Vec<(String, Vec<f64>)> = (0..m)
            .map(|i| {
                (
                    format!("u{i}"),
                    (0..len).map(|t| (t * (i + 2)) as f64).collect(),
                )
            })
            .collect();
        cols.push(("y".into(), (0..len).map(|t| t as f64 * 0.5).collect()));
        TimeSeriesFrame::from_columns(60.0, cols).unwrap()
    }

    #[test]
    fn counting() {
        assert_eq!(build_regression(&frame(4, 4), 3).unwrap().row_count(), 1);
        assert_eq!(
            build_regression(&frame(50, 4), 3).unwrap().column_count(),
            15
        );
        assert!(matches!(
            build_regression(&frame(3, 4), 3),
            Err(SbmError::TooShort { .. })
        ));
    }

    #[test]
    fn all_zero_data() {
        let cols: Vec<(String, Vec<f64>)> = ["u", "y"]
            .iter()
            .map(|n| (n.to_string(), vec![0.0; 10]))
            .collect();
        let p = build_regression(&TimeSeriesFrame::from_columns(60.0, cols).unwrap(), 2).unwrap();
        assert!(p.phi.iter().all(|v| *v == 0.0) && p.y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn regressor_layout() {
        let p = build_regression(&frame(10, 2), 2).unwrap();
        // row 0 is t = 2: y lags (1, 0)*0.5, u0 lags (1, 0)*2, u1 lags (1, 0)*3
        let row: Vec<f64> = p.phi.row(0).iter().copied().collect();
        assert_eq!(row, vec![0.5, 0.0, 2.0, 0.0, 3.0, 0.0]);
        assert_eq!(p.y[0], 1.0);
        assert_eq!(p.input_names, vec!["u0", "u1"]);
    }

    #[test]
    fn theta_round_trip() {
        let mut m = ArxModel::zeros(3, vec!["a".into(), "b".into()], "y", 60.0);
        let th = DVector::from_fn(9, |i, _| i as f64 + 1.0);
        m.set_theta(&th).unwrap();
        assert_eq!(m.a, vec![-1.0, -2.0, -3.0]);
        assert_eq!(m.b[1], vec![7.0, 8.0, 9.0]);
        assert_eq!(m.theta(), th);
        assert!(m.set_theta(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn stability_flag() {
        let mut m = ArxModel::zeros(2, vec![], "y", 60.0);
        m.a = vec![-1.5, 0.56]; // poles 0.8, 0.7
        assert!(m.is_stable());
        m.a = vec![-2.5, 1.5]; // poles 1.5, 1.0
        assert!(!m.is_stable());
    }

    #[test]
    fn json_field_names() {
        let m = ArxModel::zeros(1, vec!["u".into()], "y", 60.0);
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        for k in [
            "order",
            "inputs",
            "a",
            "b",
            "sample_interval_s",
            "residual_variance",
        ] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
