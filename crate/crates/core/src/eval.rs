//! Moving-horizon forecast evaluation and the static-vs-adaptive experiment.
//!
//! An evaluation time is the last measured sample `s` before a forecast
//! window. The model is seeded with the measured outputs `s-N+1..=s`, run
//! freely over the next `n_sched` samples with the measured inputs, and
//! scored by the window mean squared error
//!
//! ```text
//! MSE_t = (1 / n_sched) * sum_{k=1..n_sched} (y_{s+k} - yhat_{s+k})^2
//! ```
//!
//! The first evaluation time is `s = N - 1` (hour 0); later ones follow every
//! `eval_stride`. The adaptive variant freezes the Kalman estimate after the
//! filter has processed sample `s` and keeps it for the whole window.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arx::{
    build_regression, fill_regressor, fit_least_squares, simulate_window, split_channels, ArxModel,
};
use crate::dataio::{load_csv, ChannelRoleMap, TimeSeriesFrame};
use crate::error::{Result, SbmError};
use crate::kalman::{default_tuning, run_stream, FilterTuning, ParameterFilter, StreamResult};
use crate::preprocess::{FilterSpec, SbmPreprocessor};
use crate::synthplant::PlantConfig;

pub const DEFAULT_T_SCHED_S: f64 = 4.0 * 86_400.0;
pub const DEFAULT_EVAL_STRIDE_S: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonSpec {
    /// Forecast window length, seconds.
    pub t_sched_s: f64,
    /// Spacing of evaluation times, seconds.
    pub eval_stride_s: f64,
}

impl Default for HorizonSpec {
    fn default() -> Self {
        Self {
            t_sched_s: DEFAULT_T_SCHED_S,
            eval_stride_s: DEFAULT_EVAL_STRIDE_S,
        }
    }
}

fn whole_samples(key: &str, seconds: f64, dt: f64) -> Result<usize> {
    if !(seconds > 0.0) {
        return Err(SbmError::config(
            key,
            format!("must be positive, got {seconds}"),
        ));
    }
    let ratio = seconds / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
        return Err(SbmError::config(
            key,
            format!("{seconds} s is not a whole number of {dt} s samples"),
        ));
    }
    Ok(n as usize)
}

impl HorizonSpec {
    /// Window length in samples.
    pub fn n_sched(&self, sample_interval_s: f64) -> Result<usize> {
        whole_samples("t_sched_s", self.t_sched_s, sample_interval_s)
    }

    pub fn stride_samples(&self, sample_interval_s: f64) -> Result<usize> {
        whole_samples("eval_stride_s", self.eval_stride_s, sample_interval_s)
    }

    /// Number of evaluation times that fit in `len` samples for an order-`order` model.
    pub fn evaluation_count(
        &self,
        len: usize,
        order: usize,
        sample_interval_s: f64,
    ) -> Result<usize> {
        let n_sched = self.n_sched(sample_interval_s)?;
        let stride = self.stride_samples(sample_interval_s)?;
        if len < order + n_sched {
            return Ok(0);
        }
        Ok((len - order - n_sched) / stride + 1)
    }
}

/// Mean squared error with the window length as divisor.
pub fn moving_horizon_mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(SbmError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(SbmError::InsufficientData("empty window".into()));
    }
    let sum: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / y_true.len() as f64)
}

/// Where each window's coefficients come from.
#[derive(Debug, Clone, Copy)]
pub enum ModelSource<'a> {
    Static(&'a ArxModel),
    /// A filter in its initial state; it is cloned and stepped through the
    /// data, and its estimate is frozen at every evaluation time.
    Adaptive(&'a ParameterFilter),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MseSeries {
    /// Evaluation times, hours after the first one.
    pub t_hours: Vec<f64>,
    /// Index of the last measured sample at each evaluation time.
    pub sample_index: Vec<usize>,
    pub mse: Vec<f64>,
    /// Coefficients used for each window (adaptive source only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<Vec<f64>>,
}

impl MseSeries {
    pub fn len(&self) -> usize {
        self.mse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mse.is_empty()
    }

    /// Writes `t_hours,mse`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t_hours", "mse"])?;
        for (t, m) in self.t_hours.iter().zip(&self.mse) {
            wtr.write_record([t.to_string(), m.to_string()])?;
        }
        wtr.flush().map_err(|source| SbmError::Io {
            path: "<mse series>".into(),
            source,
        })
    }
}

/// Scores `source` over every moving window of a model-ready frame.
pub fn evaluate_moving_horizon(
    source: ModelSource<'_>,
    data: &TimeSeriesFrame,
    spec: &HorizonSpec,
) -> Result<MseSeries> {
    let dt = data.sample_interval_s();
    let (inputs, y) = split_channels(data)?;
    let m = inputs.len();
    let order = match source {
        ModelSource::Static(model) => {
            if model.input_count() != m {
                return Err(SbmError::DimensionMismatch {
                    expected: model.input_count(),
                    actual: m,
                });
            }
            model.order
        }
        ModelSource::Adaptive(filter) => {
            if filter.dim() % (m + 1) != 0 || filter.dim() == 0 {
                return Err(SbmError::DimensionMismatch {
                    expected: filter.dim(),
                    actual: m + 1,
                });
            }
            filter.dim() / (m + 1)
        }
    };
    let n_sched = spec.n_sched(dt)?;
    let stride = spec.stride_samples(dt)?;
    let count = spec.evaluation_count(data.len(), order, dt)?;
    if count == 0 {
        return Err(SbmError::InsufficientData(format!(
            "{} samples cannot hold one window of {n_sched} after {order} seed samples",
            data.len()
        )));
    }

    let mut out = MseSeries {
        t_hours: Vec::with_capacity(count),
        sample_index: Vec::with_capacity(count),
        mse: Vec::with_capacity(count),
        theta: Vec::new(),
    };
    let mut adaptive = match source {
        ModelSource::Adaptive(f) => {
            let names = data.channel_names();
            let template = ArxModel::zeros(
                order,
                names[..m].iter().map(|s| s.to_string()).collect(),
                names[m],
                dt,
            );
            Some((f.clone(), template, order, vec![0.0; f.dim()]))
        }
        ModelSource::Static(_) => None,
    };

    for k in 0..count {
        let s = order - 1 + k * stride;
        let model = match (&source, adaptive.as_mut()) {
            (ModelSource::Static(model), _) => (*model).clone(),
            (_, Some((filter, template, next, reg))) => {
                while *next <= s {
                    fill_regressor(y, &inputs, order, *next, reg);
                    filter.step(reg, y[*next])?;
                    *next += 1;
                }
                out.theta.push(filter.theta().iter().copied().collect());
                template.with_theta(filter.theta())?
            }
            _ => unreachable!(),
        };
        let pred = simulate_window(&model, y, &inputs, s + 1, n_sched)?;
        out.mse
            .push(moving_horizon_mse(&y[s + 1..s + 1 + n_sched], &pred)?);
        out.sample_index.push(s);
        out.t_hours.push((k * stride) as f64 * dt / 3600.0);
    }
    Ok(out)
}

/// Cross-model statistics of the flat coefficient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStats {
    pub mean: DVector<f64>,
    /// Sample covariance (`n - 1` denominator).
    pub sigma: DMatrix<f64>,
    /// `scaled[m][i] = theta_m[i] / mean[i]`.
    pub scaled: Vec<Vec<f64>>,
    /// Sample variance of each scaled coefficient across models.
    pub scaled_variance: Vec<f64>,
}

pub fn cross_dataset_covariance(models: &[ArxModel]) -> Result<ParameterStats> {
    if models.len() < 2 {
        return Err(SbmError::TooFewModels(models.len()));
    }
    let first = &models[0];
    for m in &models[1..] {
        if m.order != first.order || m.input_count() != first.input_count() {
            return Err(SbmError::DimensionMismatch {
                expected: first.param_count(),
                actual: m.param_count(),
            });
        }
    }
    let thetas: Vec<DVector<f64>> = models.iter().map(ArxModel::theta).collect();
    let n = thetas.len() as f64;
    let k = first.param_count();
    // offsets from the first model keep identical models exactly zero-variance
    let base = &thetas[0];
    let mean = base
        + thetas
            .iter()
            .fold(DVector::zeros(k), |acc, t| acc + (t - base))
            / n;
    let mut sigma = DMatrix::zeros(k, k);
    for t in &thetas {
        let d = t - &mean;
        sigma += &d * d.transpose();
    }
    sigma /= n - 1.0;
    let scaled: Vec<Vec<f64>> = thetas
        .iter()
        .map(|t| t.iter().zip(mean.iter()).map(|(v, m)| v / m).collect())
        .collect();
    let scaled_variance = (0..k)
        .map(|i| {
            let col: Vec<f64> = scaled.iter().map(|r| r[i]).collect();
            let mu = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    Ok(ParameterStats {
        mean,
        sigma,
        scaled,
        scaled_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Windows inside the training period.
    Train,
    /// Windows straddling the end of training.
    Mixed,
    /// Windows on data after training.
    New,
}

impl Phase {
    /// Phase of the window starting `t_hours` after the first evaluation time.
    pub fn classify(t_hours: f64, d_train_days: f64, t_sched_s: f64) -> Phase {
        let t_days = t_hours / 24.0;
        let sched_days = t_sched_s / 86_400.0;
        if t_days <= d_train_days - sched_days {
            Phase::Train
        } else if t_days < d_train_days {
            Phase::Mixed
        } else {
            Phase::New
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (`n - 1`), 0 for a single value.
    pub std: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median/mean/std of the series per phase. Phases without points are omitted.
pub fn summarize(series: &MseSeries, d_train_days: f64, t_sched_s: f64) -> Vec<PhaseSummary> {
    [Phase::Train, Phase::Mixed, Phase::New]
        .into_iter()
        .filter_map(|phase| {
            let vals: Vec<f64> = series
                .t_hours
                .iter()
                .zip(&series.mse)
                .filter(|(t, _)| Phase::classify(**t, d_train_days, t_sched_s) == phase)
                .map(|(_, m)| *m)
                .collect();
            if vals.is_empty() {
                return None;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Some(PhaseSummary {
                phase,
                count: vals.len(),
                median: median(&vals),
                mean,
                std,
            })
        })
        .collect()
}

/// Experiment description; file paths are taken as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Raw plant record (CSV).
    pub dataset: PathBuf,
    pub roles: ChannelRoleMap,
    pub order: usize,
    pub d_train_days: f64,
    pub horizon: HorizonSpec,
    pub filters: FilterSpec,
    pub adaptive: bool,
    /// Trajectory recording stride, samples.
    pub record_every: usize,
    /// JSON file holding the parameter covariance as nested rows.
    pub sigma: Option<PathBuf>,
    /// Sibling raw records fitted independently to estimate the covariance.
    pub siblings: Vec<PathBuf>,
    /// Complete filter tuning (JSON), used as is.
    pub tuning: Option<PathBuf>,
    /// Adjustments applied to a tuning derived from `sigma` or `siblings`.
    pub overrides: TuningOverrides,
}

/// Optional departures from the default tuning rules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningOverrides {
    /// Measurement noise variance `R`.
    pub r: Option<f64>,
    /// Use the training fit's residual variance as `R`.
    pub r_from_residuals: bool,
}

impl TuningOverrides {
    fn apply(&self, tuning: &mut FilterTuning, model: &ArxModel) -> Result<()> {
        if let Some(r) = self.r {
            tuning.r = r;
        }
        if self.r_from_residuals {
            tuning.r = model.residual_variance;
        }
        tuning.validate()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            roles: PlantConfig::roles(),
            order: 3,
            d_train_days: 7.0,
            horizon: HorizonSpec::default(),
            filters: FilterSpec::default(),
            adaptive: true,
            record_every: 60,
            sigma: None,
            siblings: Vec::new(),
            tuning: None,
            overrides: TuningOverrides::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(SbmError::config("order", "must be at least 1"));
        }
        if !(self.d_train_days > 0.0) {
            return Err(SbmError::config("d_train_days", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(SbmError::config("record_every", "must be at least 1"));
        }
        if !(self.horizon.t_sched_s > 0.0) {
            return Err(SbmError::config("horizon.t_sched_s", "must be positive"));
        }
        if !(self.horizon.eval_stride_s > 0.0) {
            return Err(SbmError::config(
                "horizon.eval_stride_s",
                "must be positive",
            ));
        }
        self.filters.savgol.validate()?;
        self.roles.validate()?;
        if self.overrides.r.is_some() && self.overrides.r_from_residuals {
            return Err(SbmError::config(
                "overrides.r",
                "set either `r` or `r_from_residuals`, not both",
            ));
        }
        if let Some(r) = self.overrides.r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(SbmError::config(
                    "overrides.r",
                    format!("must be positive, got {r}"),
                ));
            }
        }
        if self.adaptive {
            let given = self.sigma.is_some() as u8
                + (!self.siblings.is_empty()) as u8
                + self.tuning.is_some() as u8;
            if given != 1 {
                return Err(SbmError::config(
                    "sigma",
                    "an adaptive run needs exactly one of `sigma`, `siblings` or `tuning`",
                ));
            }
        }
        Ok(())
    }
}

/// How the filter tuning is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum TuningInput {
    None,
    Sigma(DMatrix<f64>),
    /// Raw sibling records, preprocessed like the main record and fitted
    /// on their own training windows.
    Siblings(Vec<TimeSeriesFrame>),
    Tuning(FilterTuning),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub sample_interval_s: f64,
    pub n_train: usize,
    /// Window start days at which windows first include, and then only
    /// contain, data after training.
    pub phase_boundaries_days: [f64; 2],
    pub model: ArxModel,
    pub static_series: MseSeries,
    pub static_summary: Vec<PhaseSummary>,
    #[serde(default)]
    pub adaptive_series: Option<MseSeries>,
    #[serde(default)]
    pub adaptive_summary: Option<Vec<PhaseSummary>>,
    /// Source of the filter tuning.
    #[serde(default)]
    pub tuning_source: Option<String>,
    /// Trajectory file written next to the report.
    #[serde(default)]
    pub trajectory_file: Option<String>,
    #[serde(default)]
    pub final_theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub preprocessor: SbmPreprocessor,
    pub tuning: Option<FilterTuning>,
    pub trajectory: Option<StreamResult>,
}

pub const REPORT_FILE: &str = "report.json";
pub const STATIC_CSV: &str = "mse_static.csv";
pub const ADAPTIVE_CSV: &str = "mse_adaptive.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TUNING_FILE: &str = "tuning.json";
pub const PREPROCESSOR_FILE: &str = "preprocessor.json";

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| SbmError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl ExperimentOutcome {
    /// Writes the report JSON, the MSE CSVs, the fitted preprocessor and,
    /// for adaptive runs, the filter tuning and trajectory.
    pub fn write(&self, outdir: impl AsRef<Path>) -> Result<()> {
        let dir = outdir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| SbmError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        crate::write_json(dir.join(REPORT_FILE), &self.report)?;
        self.report
            .static_series
            .write_csv(create(&dir.join(STATIC_CSV))?)?;
        if let Some(a) = &self.report.adaptive_series {
            a.write_csv(create(&dir.join(ADAPTIVE_CSV))?)?;
        }
        crate::write_json(dir.join(PREPROCESSOR_FILE), &self.preprocessor)?;
        if let Some(t) = &self.tuning {
            crate::write_json(dir.join(TUNING_FILE), t)?;
        }
        if let Some(t) = &self.trajectory {
            t.write_trajectory_csv(create(&dir.join(TRAJECTORY_CSV))?)?;
        }
        Ok(())
    }
}

/// Fits the first `n_train` samples of a model-ready frame.
pub fn fit_training_window(
    data: &TimeSeriesFrame,
    order: usize,
    n_train: usize,
) -> Result<ArxModel> {
    let train = data.slice_window(0, n_train)?;
    fit_least_squares(&build_regression(&train, order)?)
}

/// Runs the experiment on in-memory records.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    raw: &TimeSeriesFrame,
    tuning: TuningInput,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let dt = raw.sample_interval_s();
    let n_train = raw.samples_per(config.d_train_days * 86_400.0);
    if n_train > raw.len() {
        return Err(SbmError::TooShort {
            needed: n_train,
            available: raw.len(),
        });
    }
    let pre = SbmPreprocessor::fit(
        &raw.slice_window(0, n_train)?,
        &config.roles,
        config.filters,
    )?;
    let data = pre.apply(raw)?;
    let model = fit_training_window(&data, config.order, n_train)?;
    let static_series =
        evaluate_moving_horizon(ModelSource::Static(&model), &data, &config.horizon)?;
    let static_summary = summarize(
        &static_series,
        config.d_train_days,
        config.horizon.t_sched_s,
    );

    let sched_days = config.horizon.t_sched_s / 86_400.0;
    let mut report = ExperimentReport {
        config: config.clone(),
        sample_interval_s: dt,
        n_train,
        phase_boundaries_days: [config.d_train_days - sched_days, config.d_train_days],
        model: model.clone(),
        static_series,
        static_summary,
        adaptive_series: None,
        adaptive_summary: None,
        tuning_source: None,
        trajectory_file: None,
        final_theta: None,
    };
    if !config.adaptive {
        return Ok(ExperimentOutcome {
            report,
            preprocessor: pre,
            tuning: None,
            trajectory: None,
        });
    }

    let theta0 = model.theta();
    let (mut filter_tuning, source) = match tuning {
        TuningInput::None => {
            return Err(SbmError::config(
                "sigma",
                "adaptive run without a tuning source",
            ));
        }
        TuningInput::Tuning(t) => (t, "tuning".to_string()),
        TuningInput::Sigma(sigma) => (
            default_tuning(&theta0, &sigma, n_train)?,
            "sigma".to_string(),
        ),
        TuningInput::Siblings(frames) => {
            let mut models = vec![model.clone()];
            for f in &frames {
                let d = pre.apply(f)?;
                let n = f.samples_per(config.d_train_days * 86_400.0);
                models.push(fit_training_window(&d, config.order, n.min(f.len()))?);
            }
            let stats = cross_dataset_covariance(&models)?;
            (
                default_tuning(&theta0, &stats.sigma, n_train)?,
                format!("siblings ({} models)", models.len()),
            )
        }
    };
    if source != "tuning" {
        config.overrides.apply(&mut filter_tuning, &model)?;
    }
    let filter = ParameterFilter::new(theta0, filter_tuning.clone())?;
    let adaptive_series =
        evaluate_moving_horizon(ModelSource::Adaptive(&filter), &data, &config.horizon)?;
    let mut stream_filter = filter.clone();
    let trajectory = run_stream(&mut stream_filter, &data, config.order, config.record_every)?;

    report.adaptive_summary = Some(summarize(
        &adaptive_series,
        config.d_train_days,
        config.horizon.t_sched_s,
    ));
    report.adaptive_series = Some(adaptive_series);
    report.tuning_source = Some(source);
    report.trajectory_file = Some(TRAJECTORY_CSV.to_string());
    report.final_theta = Some(stream_filter.theta().iter().copied().collect());
    Ok(ExperimentOutcome {
        report,
        preprocessor: pre,
        tuning: Some(filter_tuning),
        trajectory: Some(trajectory),
    })
}

/// Reads a parameter covariance stored as JSON nested rows.
pub fn load_sigma(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = crate::read_json(path)?;
    let k = rows.len();
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(SbmError::config(
            "sigma",
            "covariance must be a non-empty square matrix",
        ));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

/// Loads the configured files and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let raw = load_csv(&config.dataset, Some(&config.roles))?;
    let tuning = if !config.adaptive {
        TuningInput::None
    } else if let Some(p) = &config.sigma {
        TuningInput::Sigma(load_sigma(p)?)
    } else if let Some(p) = &config.tuning {
        TuningInput::Tuning(FilterTuning::load(p)?)
    } else {
        let frames = config
            .siblings
            .iter()
            .map(|p| load_csv(p, Some(&config.roles)))
            .collect::<Result<Vec<_>>>()?;
        TuningInput::Siblings(frames)
    };
    run_experiment_with(config, &raw, tuning)
}
