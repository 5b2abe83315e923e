//! Online estimation of ARX coefficients with a random-walk Kalman filter.
//!
//! The coefficients are the filter state and drift as
//! `theta_t = theta_{t-1} + w_t`, `w_t ~ N(0, Q)`. Each sample is an
//! observation `y_t = u_t' theta_t + e_t`, `e_t ~ N(0, R)`, where `u_t` is
//! the ARX regressor built from measured lags. One step is
//!
//! ```text
//! yhat_t  = u_t' theta_{t-1}
//! K_t     = P_{t-1} u_t / (R + u_t' P_{t-1} u_t)
//! theta_t = theta_{t-1} + K_t (y_t - yhat_t)
//! P_t     = (I - K_t u_t') P_{t-1} + Q
//! ```
//!
//! followed by explicit symmetrization of `P_t`. Covariance bounds
//! `alpha I <= P_t <= beta I` are monitored, never enforced.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::arx::{fill_regressor, split_channels, ArxModel};
use crate::dataio::TimeSeriesFrame;
use crate::error::{Result, SbmError};

pub const DEFAULT_R: f64 = 1.0;
/// `P_0 = diag(|theta_0|) * P0_FRACTION`.
pub const P0_FRACTION: f64 = 1e-3;
pub const DEFAULT_ALPHA: f64 = 1e-12;
/// `beta = BETA_FACTOR * max(diag(P_0))`.
pub const BETA_FACTOR: f64 = 1e6;
pub const DEFAULT_DIVERGENCE_GUARD: f64 = 1e6;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterTuning {
    #[serde(with = "row_matrix")]
    pub q: DMatrix<f64>,
    pub r: f64,
    #[serde(with = "row_matrix")]
    pub p0: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Largest allowed `|theta_i|` before a step is rejected.
    pub divergence_guard: f64,
}

/// Stores matrices as nested rows (`[[a, b], [c, d]]`) so tuning files can
/// be written by hand.
mod row_matrix {
    use nalgebra::DMatrix;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        s.collect_seq(rows)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom(
                "matrix rows must all have the same length",
            ));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

/// Symmetrizes `m` and clips eigenvalues in `[-PSD_TOL, 0)` to zero.
///
/// Fails when `m` is asymmetric beyond tolerance or has a clearly negative
/// eigenvalue.
pub fn project_psd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(SbmError::NotPsd(format!("{what} is not square")));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(SbmError::NotPsd(format!("{what} asymmetric by {asym:e}")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL * scale {
        return Err(SbmError::NotPsd(format!("{what} has eigenvalue {min:e}")));
    }
    if min >= 0.0 {
        return Ok(sym);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

impl FilterTuning {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        if self.p0.nrows() != k || self.p0.ncols() != k || self.q.ncols() != k {
            return Err(SbmError::DimensionMismatch {
                expected: k,
                actual: self.p0.nrows(),
            });
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(SbmError::InvalidTuning(format!(
                "R must be positive, got {}",
                self.r
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < self.beta) {
            return Err(SbmError::InvalidTuning(format!(
                "need 0 < alpha < beta, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if !(self.divergence_guard > 0.0) {
            return Err(SbmError::InvalidTuning(
                "divergence guard must be positive".into(),
            ));
        }
        project_psd(&self.q, "Q")?;
        project_psd(&self.p0, "P0")?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let t: Self = crate::read_json(path)?;
        t.validate()?;
        Ok(t)
    }
}

/// Tuning from initial estimates and the cross-dataset parameter covariance:
/// `R = 1`, `P_0 = diag(|theta_0|) * 0.1%`, `Q = Sigma / n_train` projected
/// onto the PSD cone.
pub fn default_tuning(
    theta0: &DVector<f64>,
    sigma: &DMatrix<f64>,
    n_train: usize,
) -> Result<FilterTuning> {
    let k = theta0.len();
    if sigma.nrows() != k || sigma.ncols() != k {
        return Err(SbmError::DimensionMismatch {
            expected: k,
            actual: sigma.nrows(),
        });
    }
    if n_train == 0 {
        return Err(SbmError::config("n_train", "must be at least 1"));
    }
    let q = project_psd(&(sigma / n_train as f64), "Sigma")?;
    let p0 = DMatrix::from_diagonal(&theta0.map(|v| v.abs() * P0_FRACTION));
    let pmax = p0.diagonal().max();
    let beta = if pmax > 0.0 {
        BETA_FACTOR * pmax
    } else {
        BETA_FACTOR
    };
    Ok(FilterTuning {
        q,
        r: DEFAULT_R,
        p0,
        alpha: DEFAULT_ALPHA,
        beta: beta.max(DEFAULT_ALPHA * 10.0),
        divergence_guard: DEFAULT_DIVERGENCE_GUARD,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub predicted: f64,
    pub innovation: f64,
    /// `R + u' P_{t-1} u`.
    pub innovation_variance: f64,
    pub gain_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterFilter {
    theta: DVector<f64>,
    p: DMatrix<f64>,
    tuning: FilterTuning,
    step_count: u64,
    last_innovation: f64,
    // scratch
    pu: DVector<f64>,
    ptu: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovarianceStatus {
    InBounds,
    /// Eigenvalues of `P` below `alpha`.
    BelowAlpha(Vec<f64>),
    /// Eigenvalues of `P` above `beta`.
    AboveBeta(Vec<f64>),
}

impl CovarianceStatus {
    pub fn is_in_bounds(&self) -> bool {
        matches!(self, CovarianceStatus::InBounds)
    }
}

impl ParameterFilter {
    pub fn new(theta0: DVector<f64>, tuning: FilterTuning) -> Result<Self> {
        tuning.validate()?;
        if theta0.len() != tuning.dim() {
            return Err(SbmError::DimensionMismatch {
                expected: tuning.dim(),
                actual: theta0.len(),
            });
        }
        let k = theta0.len();
        let p = project_psd(&tuning.p0, "P0")?;
        let q = project_psd(&tuning.q, "Q")?;
        Ok(Self {
            theta: theta0,
            p,
            tuning: FilterTuning { q, ..tuning },
            step_count: 0,
            last_innovation: 0.0,
            pu: DVector::zeros(k),
            ptu: DVector::zeros(k),
        })
    }

    /// Filter initialised from a fitted model's coefficients.
    pub fn from_model(model: &ArxModel, tuning: FilterTuning) -> Result<Self> {
        Self::new(model.theta(), tuning)
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn tuning(&self) -> &FilterTuning {
        &self.tuning
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn last_innovation(&self) -> f64 {
        self.last_innovation
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Processes one observation. On error the filter is left unchanged.
    pub fn step(&mut self, regressor: &[f64], y: f64) -> Result<StepDiagnostics> {
        let k = self.dim();
        if regressor.len() != k {
            return Err(SbmError::DimensionMismatch {
                expected: k,
                actual: regressor.len(),
            });
        }
        if !y.is_finite() || regressor.iter().any(|v| !v.is_finite()) {
            return Err(SbmError::NonFiniteInput);
        }
        let u = DVector::from_column_slice(regressor);
        let predicted = u.dot(&self.theta);
        let innovation = y - predicted;

        self.p.mul_to(&u, &mut self.pu);
        self.p.tr_mul_to(&u, &mut self.ptu);
        let s = self.tuning.r + u.dot(&self.pu);
        let gain = &self.pu / s;

        let theta = &self.theta + &gain * innovation;
        if let Some((index, value)) = theta
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= self.tuning.divergence_guard))
        {
            return Err(SbmError::DivergenceDetected {
                index,
                value: *value,
                guard: self.tuning.divergence_guard,
            });
        }

        // P <- P - K (u' P) + Q, then symmetrize in place
        self.p.ger(-1.0, &gain, &self.ptu, 1.0);
        self.p += &self.tuning.q;
        for i in 0..k {
            for j in i + 1..k {
                let m = 0.5 * (self.p[(i, j)] + self.p[(j, i)]);
                self.p[(i, j)] = m;
                self.p[(j, i)] = m;
            }
        }
        self.theta = theta;
        self.step_count += 1;
        self.last_innovation = innovation;
        Ok(StepDiagnostics {
            predicted,
            innovation,
            innovation_variance: s,
            gain_norm: gain.norm(),
        })
    }

    /// Compares the extreme eigenvalues of `P` with `alpha` and `beta`.
    pub fn check_covariance_bounds(&self) -> CovarianceStatus {
        check_covariance_bounds(&self.p, self.tuning.alpha, self.tuning.beta)
    }
}

pub fn check_covariance_bounds(p: &DMatrix<f64>, alpha: f64, beta: f64) -> CovarianceStatus {
    let eig = SymmetricEigen::new((p + p.transpose()) * 0.5);
    let low: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|v| *v < alpha)
        .collect();
    if !low.is_empty() {
        return CovarianceStatus::BelowAlpha(low);
    }
    let high: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|v| *v > beta)
        .collect();
    if !high.is_empty() {
        return CovarianceStatus::AboveBeta(high);
    }
    CovarianceStatus::InBounds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Sample index of the step just processed.
    pub t: usize,
    pub theta: Vec<f64>,
    pub pdiag: Vec<f64>,
    pub innovation: f64,
    pub bounds: CovarianceStatus,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamResult {
    pub trajectory: Vec<TrajectoryPoint>,
    /// One innovation per processed sample, starting at sample `N`.
    pub innovations: Vec<f64>,
}

impl StreamResult {
    /// Writes `t, theta_1..k, pdiag_1..k, innovation`.
    pub fn write_trajectory_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let k = self.trajectory.first().map_or(0, |p| p.theta.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=k).map(|i| format!("theta_{i}")));
        header.extend((1..=k).map(|i| format!("pdiag_{i}")));
        header.push("innovation".into());
        wtr.write_record(&header)?;
        for p in &self.trajectory {
            let mut row = vec![p.t.to_string()];
            row.extend(p.theta.iter().map(f64::to_string));
            row.extend(p.pdiag.iter().map(f64::to_string));
            row.push(p.innovation.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|source| SbmError::Io {
            path: "<trajectory>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Steps the filter through every sample `t >= N` of a model-ready frame
/// (inputs then output), recording every `record_every` steps.
pub fn run_stream(
    filter: &mut ParameterFilter,
    data: &TimeSeriesFrame,
    order: usize,
    record_every: usize,
) -> Result<StreamResult> {
    let (inputs, output) = split_channels(data)?;
    let k = order * (1 + inputs.len());
    if k != filter.dim() {
        return Err(SbmError::DimensionMismatch {
            expected: filter.dim(),
            actual: k,
        });
    }
    if data.len() <= order {
        return Err(SbmError::TooShort {
            needed: order,
            available: data.len(),
        });
    }
    let every = record_every.max(1);
    let mut out = StreamResult {
        trajectory: Vec::new(),
        innovations: Vec::with_capacity(data.len() - order),
    };
    let mut reg = vec![0.0; k];
    for t in order..data.len() {
        fill_regressor(output, &inputs, order, t, &mut reg);
        let diag = filter.step(&reg, output[t])?;
        out.innovations.push(diag.innovation);
        if (t - order + 1).is_multiple_of(every) {
            out.trajectory.push(TrajectoryPoint {
                t,
                theta: filter.theta.iter().copied().collect(),
                pdiag: filter.p.diagonal().iter().copied().collect(),
                innovation: diag.innovation,
                bounds: filter.check_covariance_bounds(),
            });
        }
    }
    Ok(out)
}
