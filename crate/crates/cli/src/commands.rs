//! One function per subcommand. Each takes its effective config, writes its
//! artifacts into `outdir` and returns a short human-readable summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sbm_core::arx::{select_order, OrderSelection};
use sbm_core::dataio::{load_csv, write_csv, Channel};
use sbm_core::eval::{fit_training_window, load_sigma, run_experiment, ExperimentConfig};
use sbm_core::kalman::{default_tuning, run_stream, FilterTuning, ParameterFilter};
use sbm_core::preprocess::{FilterSpec, SbmPreprocessor};
use sbm_core::synthplant::{generate_dataset, monthly_suite, GeneratedDataset, PlantConfig};
use sbm_core::{write_json, ArxModel, ChannelRoleMap, Result, SbmError, TimeSeriesFrame};

use crate::config::{require_file, resolve};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SbmError + '_ {
    move |source| SbmError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn samples_for_days(frame: &TimeSeriesFrame, key: &str, days: Option<f64>) -> Result<usize> {
    let Some(days) = days else {
        return Ok(frame.len());
    };
    if !(days > 0.0) {
        return Err(SbmError::config(
            key,
            format!("must be positive, got {days}"),
        ));
    }
    let n = frame.samples_per(days * 86_400.0);
    if n > frame.len() {
        return Err(SbmError::TooShort {
            needed: n,
            available: frame.len(),
        });
    }
    Ok(n)
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Record length in days; required. Overrides `plant.duration_days`.
    pub days: Option<f64>,
    /// Number of month-like records; 1 writes a single record.
    pub months: usize,
    pub plant: PlantConfig,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            days: None,
            months: 1,
            plant: PlantConfig::default(),
        }
    }
}

impl GenerateConfig {
    pub fn finalize(&mut self) -> Result<()> {
        let days = self.days.ok_or_else(|| {
            SbmError::config(
                "days",
                "required: set `days` in the config file or pass --days",
            )
        })?;
        if self.months == 0 {
            return Err(SbmError::config("months", "must be at least 1"));
        }
        self.plant.duration_days = days;
        self.plant.validate()
    }
}

fn write_dataset(ds: &GeneratedDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(&ds.raw, dir.join("plant.csv"))?;
    write_csv(&ds.drivers, dir.join("drivers.csv"))?;
    ds.truth.save(dir.join("truth.json"))
}

pub fn generate(cfg: &GenerateConfig, outdir: &Path) -> Result<String> {
    if cfg.months == 1 {
        let ds = generate_dataset(&cfg.plant)?;
        write_dataset(&ds, outdir)?;
        return Ok(format!(
            "wrote {} samples to {}",
            ds.raw.len(),
            outdir.display()
        ));
    }
    let suite = monthly_suite(&cfg.plant, cfg.months)?;
    for (m, ds) in suite.iter().enumerate() {
        write_dataset(ds, &outdir.join(format!("month_{:02}", m + 1)))?;
    }
    Ok(format!(
        "wrote {} monthly records to {}",
        suite.len(),
        outdir.display()
    ))
}

// ---------------------------------------------------------------- preprocess

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Raw plant record (CSV).
    pub input: PathBuf,
    pub roles: ChannelRoleMap,
    /// Days at the start of the record used to fit PCA and scaling
    /// (default: the whole record).
    pub train_days: Option<f64>,
    pub filters: FilterSpec,
    /// Apply this fitted preprocessor instead of fitting a new one.
    pub preprocessor: Option<PathBuf>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            roles: PlantConfig::roles(),
            train_days: None,
            filters: FilterSpec::default(),
            preprocessor: None,
        }
    }
}

impl PreprocessConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        self.input = resolve(base, &self.input);
        self.preprocessor = self.preprocessor.as_deref().map(|p| resolve(base, p));
    }

    pub fn finalize(&self) -> Result<()> {
        require_file("input", &self.input)?;
        if let Some(p) = &self.preprocessor {
            require_file("preprocessor", p)?;
        }
        self.roles.validate()?;
        self.filters.savgol.validate()
    }
}

pub const PREPROCESSED_CSV: &str = "preprocessed.csv";
pub const PREPROCESSOR_JSON: &str = "preprocessor.json";

pub fn preprocess(cfg: &PreprocessConfig, outdir: &Path) -> Result<String> {
    let raw = load_csv(&cfg.input, Some(&cfg.roles))?;
    let pre = match &cfg.preprocessor {
        Some(p) => SbmPreprocessor::load(p)?,
        None => {
            let n = samples_for_days(&raw, "train_days", cfg.train_days)?;
            SbmPreprocessor::fit(&raw.slice_window(0, n)?, &cfg.roles, cfg.filters)?
        }
    };
    let data = pre.apply(&raw)?;
    write_csv(&data, outdir.join(PREPROCESSED_CSV))?;
    pre.save(outdir.join(PREPROCESSOR_JSON))?;
    Ok(format!(
        "preprocessed {} samples; PCA explains {:.2}% with 2 components",
        data.len(),
        100.0 * pre.pca.evr.iter().take(2).sum::<f64>()
    ))
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Model-ready record (CSV); inputs first, output last unless
    /// `inputs`/`output` pick channels.
    pub input: PathBuf,
    /// Model order; if unset, the order chosen from `orders` is used.
    pub order: Option<usize>,
    /// Candidate orders for the nAIC table.
    pub orders: Vec<usize>,
    /// Training lengths for the nAIC table (default: `train_days`, or the
    /// whole record).
    pub d_train_days: Vec<f64>,
    /// Days at the start of the record the final model is fitted on
    /// (default: the whole record).
    pub train_days: Option<f64>,
    pub inputs: Vec<String>,
    pub output: Option<String>,
}

impl FitConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        self.input = resolve(base, &self.input);
    }

    pub fn finalize(&self) -> Result<()> {
        require_file("input", &self.input)?;
        if self.order.is_none() && self.orders.is_empty() {
            return Err(SbmError::config(
                "order",
                "set `order` or candidate `orders`",
            ));
        }
        if self.order == Some(0) || self.orders.contains(&0) {
            return Err(SbmError::config("order", "orders must be >= 1"));
        }
        Ok(())
    }
}

/// Builds the `(inputs..., output)` frame. Repeated names are kept as
/// separate, suffixed channels so that a duplicated input surfaces as a
/// rank-deficient fit rather than being silently merged.
fn select_model_channels(
    frame: &TimeSeriesFrame,
    inputs: &[String],
    output: Option<&str>,
) -> Result<TimeSeriesFrame> {
    if inputs.is_empty() && output.is_none() {
        return Ok(frame.clone());
    }
    let names = frame.channel_names();
    let output = output.unwrap_or(names[names.len() - 1]).to_string();
    let inputs: Vec<String> = if inputs.is_empty() {
        names
            .iter()
            .filter(|n| **n != output)
            .map(|n| n.to_string())
            .collect()
    } else {
        inputs.to_vec()
    };
    let mut channels: Vec<Channel> = Vec::with_capacity(inputs.len() + 1);
    for name in inputs.iter().chain([&output]) {
        let values = frame.channel(name)?.to_vec();
        let copies = channels
            .iter()
            .filter(|c| c.name.split('#').next() == Some(name))
            .count();
        let label = if copies == 0 {
            name.clone()
        } else {
            format!("{name}#{}", copies + 1)
        };
        channels.push(Channel::new(label, values));
    }
    frame.with_channels(channels)
}

pub const MODEL_JSON: &str = "model.json";
pub const ORDER_TABLE_CSV: &str = "order_table.csv";
pub const ORDER_SELECTION_JSON: &str = "order_selection.json";

fn write_order_table(sel: &OrderSelection, path: &Path) -> Result<()> {
    let mut text = String::from("d_train_days,order,naic\n");
    for c in &sel.table {
        text.push_str(&format!("{},{},{}\n", c.d_train_days, c.order, c.naic));
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn fit(cfg: &FitConfig, outdir: &Path) -> Result<String> {
    let frame = load_csv(&cfg.input, None)?;
    let data = select_model_channels(&frame, &cfg.inputs, cfg.output.as_deref())?;
    let n_train = samples_for_days(&data, "train_days", cfg.train_days)?;
    let mut notes = Vec::new();
    let mut chosen = cfg.order;
    if !cfg.orders.is_empty() {
        let d_train = if cfg.d_train_days.is_empty() {
            vec![n_train as f64 * data.sample_interval_s() / 86_400.0]
        } else {
            cfg.d_train_days.clone()
        };
        let sel = select_order(&data, &cfg.orders, &d_train)?;
        write_order_table(&sel, &outdir.join(ORDER_TABLE_CSV))?;
        write_json(outdir.join(ORDER_SELECTION_JSON), &sel)?;
        notes.push(format!("nAIC selects order {}", sel.chosen));
        chosen = chosen.or(Some(sel.chosen));
    }
    let order = chosen.expect("checked in finalize");
    let model = fit_training_window(&data, order, n_train)?;
    model.save(outdir.join(MODEL_JSON))?;
    notes.push(format!(
        "fitted order {order} on {n_train} samples, residual variance {:.4e}",
        model.residual_variance
    ));
    Ok(notes.join("\n"))
}

// ---------------------------------------------------------------- run-filter

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunFilterConfig {
    /// Model-ready record (CSV) holding the model's input and output channels.
    pub data: PathBuf,
    /// Initial model (JSON, as written by `fit`).
    pub model: PathBuf,
    /// Complete filter tuning (JSON).
    pub tuning: Option<PathBuf>,
    /// Parameter covariance (JSON, nested rows) for the default tuning rules.
    pub sigma: Option<PathBuf>,
    /// Training length behind `sigma`, days; sets `Q = Sigma / n_train`.
    pub train_days: f64,
    /// Overrides the measurement noise variance of a derived tuning.
    pub r: Option<f64>,
    /// Trajectory recording stride, samples.
    pub record_every: usize,
}

impl Default for RunFilterConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            model: PathBuf::new(),
            tuning: None,
            sigma: None,
            train_days: 7.0,
            r: None,
            record_every: 60,
        }
    }
}

impl RunFilterConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        self.data = resolve(base, &self.data);
        self.model = resolve(base, &self.model);
        self.tuning = self.tuning.as_deref().map(|p| resolve(base, p));
        self.sigma = self.sigma.as_deref().map(|p| resolve(base, p));
    }

    pub fn finalize(&self) -> Result<()> {
        require_file("data", &self.data)?;
        require_file("model", &self.model)?;
        match (&self.tuning, &self.sigma) {
            (Some(t), None) => {
                require_file("tuning", t)?;
                if self.r.is_some() {
                    return Err(SbmError::config(
                        "r",
                        "cannot override `r` of an explicit `tuning` file",
                    ));
                }
            }
            (None, Some(s)) => require_file("sigma", s)?,
            _ => {
                return Err(SbmError::config(
                    "tuning",
                    "set exactly one of `tuning` or `sigma`",
                ))
            }
        }
        if self.record_every == 0 {
            return Err(SbmError::config("record_every", "must be at least 1"));
        }
        if !(self.train_days > 0.0) {
            return Err(SbmError::config("train_days", "must be positive"));
        }
        Ok(())
    }
}

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TUNING_JSON: &str = "tuning.json";
pub const FINAL_MODEL_JSON: &str = "final_model.json";

pub fn run_filter(cfg: &RunFilterConfig, outdir: &Path) -> Result<String> {
    let model = ArxModel::load(&cfg.model)?;
    let frame = load_csv(&cfg.data, None)?;
    let output = (!model.output.is_empty()).then_some(model.output.as_str());
    let data = select_model_channels(&frame, &model.inputs, output)?;
    let theta0 = model.theta();
    let tuning = match (&cfg.tuning, &cfg.sigma) {
        (Some(t), _) => FilterTuning::load(t)?,
        (None, Some(s)) => {
            let sigma = load_sigma(s)?;
            let n_train = data.samples_per(cfg.train_days * 86_400.0);
            let mut t = default_tuning(&theta0, &sigma, n_train)?;
            if let Some(r) = cfg.r {
                t.r = r;
                t.validate()?;
            }
            t
        }
        (None, None) => unreachable!("checked in finalize"),
    };
    let mut filter = ParameterFilter::new(theta0, tuning.clone())?;
    let res = run_stream(&mut filter, &data, model.order, cfg.record_every)?;
    let path = outdir.join(TRAJECTORY_CSV);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    res.write_trajectory_csv(std::io::BufWriter::new(file))?;
    tuning.save(outdir.join(TUNING_JSON))?;
    model
        .with_theta(filter.theta())?
        .save(outdir.join(FINAL_MODEL_JSON))?;
    let flagged = res
        .trajectory
        .iter()
        .filter(|p| !p.bounds.is_in_bounds())
        .count();
    Ok(format!(
        "{} filter steps, {} checkpoints, {flagged} with covariance out of bounds",
        filter.step_count(),
        res.trajectory.len()
    ))
}

// ---------------------------------------------------------------- experiment

pub fn resolve_experiment_paths(cfg: &mut ExperimentConfig, base: &Path) {
    cfg.dataset = resolve(base, &cfg.dataset);
    cfg.sigma = cfg.sigma.as_deref().map(|p| resolve(base, p));
    cfg.tuning = cfg.tuning.as_deref().map(|p| resolve(base, p));
    for s in &mut cfg.siblings {
        *s = resolve(base, s);
    }
}

pub fn finalize_experiment(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    require_file("dataset", &cfg.dataset)?;
    for p in cfg.sigma.iter().chain(&cfg.tuning) {
        require_file(
            if cfg.sigma.as_ref() == Some(p) {
                "sigma"
            } else {
                "tuning"
            },
            p,
        )?;
    }
    for s in &cfg.siblings {
        require_file("siblings", s)?;
    }
    Ok(())
}

pub fn experiment(cfg: &ExperimentConfig, outdir: &Path) -> Result<String> {
    let out = run_experiment(cfg)?;
    out.write(outdir)?;
    let mut lines = Vec::new();
    let fmt = |label: &str, s: &[sbm_core::eval::PhaseSummary]| {
        let parts: Vec<String> = s
            .iter()
            .map(|p| format!("{:?} median {:.4} (n={})", p.phase, p.median, p.count))
            .collect();
        format!("{label}: {}", parts.join(", "))
    };
    lines.push(fmt("static", &out.report.static_summary));
    if let Some(a) = &out.report.adaptive_summary {
        lines.push(fmt("adaptive", a));
    }
    Ok(lines.join("\n"))
}
