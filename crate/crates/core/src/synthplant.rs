//! Synthetic closed-loop plant records with known ground truth.
//!
//! A record has ten channels: six setpoints driven by a few smooth latent
//! factors, one independent setpoint, one setpoint that does not affect the
//! output, an ambient temperature and the compressor power. The power
//! deviation follows a stable third-order ARX law in
//! `(f1, f2, sp_ind - offset, temp - 15)`, where `f1`, `f2` are the latent
//! factors. Each input's gain can drift (ramp or random walk) and the first
//! input can act through a quadratic term; the autoregressive part never
//! changes.
//!
//! All randomness comes from [`SeededRng`], so a config reproduces its record
//! bit for bit.

use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arx::ArxModel;
use crate::dataio::{Channel, ChannelRoleMap, TimeOrigin, TimeSeriesFrame};
use crate::error::{Result, SbmError};
use crate::preprocess::SBM_CHANNELS;
use crate::rng::SeededRng;

/// Raw record channels, in file order.
pub const RAW_CHANNELS: [&str; 10] = [
    "sp_c1", "sp_c2", "sp_c3", "sp_c4", "sp_c5", "sp_c6", "sp_ind", "sp_exc", "temp", "power",
];
pub const PLANT_ORDER: usize = 3;
/// Poles of the output dynamics; they fix `a_1..a_3`.
pub const TRUE_POLES: [f64; PLANT_ORDER] = [0.9, 0.7, 0.5];
/// Share of each input's steady-state gain carried by lags 1..3.
pub const LAG_WEIGHTS: [f64; PLANT_ORDER] = [0.5, 0.3, 0.2];
pub const NOMINAL_TEMP: f64 = 15.0;
/// Half-width of the per-month multiplier range applied to the first three
/// input gains by [`monthly_suite`].
pub const MONTHLY_GAIN_SPREAD: f64 = 0.5;

const SETPOINT_OFFSETS: [f64; 6] = [50.0, 30.0, 20.0, 80.0, 40.0, 60.0];
const INDEPENDENT_OFFSET: f64 = 10.0;
const EXCLUDED_OFFSET: f64 = 25.0;
/// Each further latent factor is this much weaker than the previous one.
const LATENT_DECAY: f64 = 0.6;
const TEMP_DRIFT_TIMESCALE_H: f64 = 72.0;
const TEMP_FLUCTUATION_TIMESCALE_H: f64 = 1.0;
const EXCLUDED_TIMESCALE_H: f64 = 4.0;
// Rows are mixing directions; the first two are orthogonal already and
// later ones are orthogonalized against them.
const MIX_BASE: [[f64; 6]; 6] = [
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
    [1.3, -1.0, 0.8, -0.9, 1.0, -1.2],
    [1.0, 0.0, -1.0, 1.0, 0.0, -1.0],
    [0.0, 1.0, 0.0, -1.0, 1.0, 0.0],
    [1.0, 0.0, 0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, -1.0],
];

/// Time dependence of one input's gain multiplier (1 at the start).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    #[default]
    None,
    /// `1 + rate_per_day * max(0, day - start_day)`.
    Ramp {
        rate_per_day: f64,
        #[serde(default)]
        start_day: f64,
    },
    /// Gaussian increments with `variance_per_day` per day of elapsed time.
    RandomWalk { variance_per_day: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub seed: u64,
    pub duration_days: f64,
    pub sample_interval_s: f64,
    pub latent_factor_count: usize,
    /// Standard deviation of the first latent factor.
    pub latent_std: f64,
    pub latent_timescale_h: f64,
    pub setpoint_noise: f64,
    pub independent_std: f64,
    pub independent_timescale_h: f64,
    pub excluded_std: f64,
    pub temp_amplitude: f64,
    pub temp_drift_std: f64,
    pub temp_fluctuation_std: f64,
    /// Steady-state gains of the four inputs on the power deviation.
    pub gains: [f64; 4],
    pub drift: [Drift; 4],
    /// Coefficient of the quadratic term on the first input.
    pub nonlinearity: f64,
    /// Standard deviation of the white equation error.
    pub output_noise_std: f64,
    pub nominal_power: f64,
    /// Wall-clock time of the first sample.
    pub start: NaiveDateTime,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            duration_days: 14.0,
            sample_interval_s: 60.0,
            latent_factor_count: 2,
            latent_std: 1.0,
            latent_timescale_h: 2.0,
            setpoint_noise: 0.02,
            independent_std: 1.0,
            independent_timescale_h: 3.0,
            excluded_std: 1.0,
            temp_amplitude: 6.0,
            temp_drift_std: 2.0,
            temp_fluctuation_std: 0.5,
            gains: [2.0, -1.5, 1.0, -0.5],
            drift: [Drift::None; 4],
            nonlinearity: 0.0,
            output_noise_std: 0.02,
            nominal_power: 100.0,
            start: NaiveDate::from_ymd_opt(2024, 1, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
        }
    }
}

impl PlantConfig {
    /// Role assignment matching [`RAW_CHANNELS`].
    pub fn roles() -> ChannelRoleMap {
        ChannelRoleMap {
            output: "power".into(),
            correlated_setpoints: RAW_CHANNELS[..6].iter().map(|s| s.to_string()).collect(),
            independent_setpoint: "sp_ind".into(),
            excluded_setpoint: "sp_exc".into(),
            disturbance: "temp".into(),
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_days * 86_400.0 / self.sample_interval_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration_days", self.duration_days),
            ("sample_interval_s", self.sample_interval_s),
            ("latent_timescale_h", self.latent_timescale_h),
            ("independent_timescale_h", self.independent_timescale_h),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SbmError::config(key, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("latent_std", self.latent_std),
            ("setpoint_noise", self.setpoint_noise),
            ("independent_std", self.independent_std),
            ("excluded_std", self.excluded_std),
            ("temp_amplitude", self.temp_amplitude),
            ("temp_drift_std", self.temp_drift_std),
            ("temp_fluctuation_std", self.temp_fluctuation_std),
            ("output_noise_std", self.output_noise_std),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SbmError::config(
                    key,
                    format!("must be non-negative, got {v}"),
                ));
            }
        }
        if !(1..=6).contains(&self.latent_factor_count) {
            return Err(SbmError::config(
                "latent_factor_count",
                "must be between 1 and 6",
            ));
        }
        if self.gains.iter().any(|g| !g.is_finite())
            || !self.nonlinearity.is_finite()
            || !self.nominal_power.is_finite()
        {
            return Err(SbmError::config(
                "gains",
                "gains, nonlinearity and nominal_power must be finite",
            ));
        }
        for d in &self.drift {
            let ok = match *d {
                Drift::None => true,
                Drift::Ramp {
                    rate_per_day,
                    start_day,
                } => rate_per_day.is_finite() && start_day >= 0.0,
                Drift::RandomWalk { variance_per_day } => {
                    variance_per_day >= 0.0 && variance_per_day.is_finite()
                }
            };
            if !ok {
                return Err(SbmError::config("drift", format!("invalid drift {d:?}")));
            }
        }
        if self.sample_count() <= PLANT_ORDER {
            return Err(SbmError::config(
                "duration_days",
                "record must be longer than the plant order",
            ));
        }
        Ok(())
    }
}

/// Coefficients `a_1..a_N` of the monic polynomial with the given roots.
pub fn poly_from_poles(poles: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &p in poles {
        let mut next = c.clone();
        next.push(0.0);
        for k in 1..next.len() {
            next[k] -= p * c[k - 1];
        }
        c = next;
    }
    c.split_off(1)
}

/// 6 x k mixing matrix, one column per latent factor.
fn mixing_matrix(k: usize) -> Vec<[f64; 6]> {
    let mut cols: Vec<[f64; 6]> = Vec::with_capacity(k);
    for base in MIX_BASE.iter().take(k) {
        let mut v = *base;
        for c in &cols {
            let num: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            let den: f64 = c.iter().map(|x| x * x).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= num / den * ci;
            }
        }
        cols.push(v);
    }
    cols
}

/// Discrete Ornstein-Uhlenbeck step keeping a stationary standard deviation.
#[derive(Debug, Clone, Copy)]
struct Ou {
    rho: f64,
    kick: f64,
}

impl Ou {
    fn new(std: f64, timescale_h: f64, dt_s: f64) -> Self {
        let rho = (-dt_s / (timescale_h * 3600.0)).exp();
        Self {
            rho,
            kick: std * (1.0 - rho * rho).sqrt(),
        }
    }

    fn step(&self, x: f64, z: f64) -> f64 {
        self.rho * x + self.kick * z
    }
}

/// True coefficients of the generating law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub order: usize,
    pub poles: Vec<f64>,
    pub a: Vec<f64>,
    pub lag_weights: Vec<f64>,
    /// Nominal `b[i][j]`, before drift multipliers.
    pub b_nominal: Vec<Vec<f64>>,
    pub input_names: Vec<String>,
    pub nonlinearity: f64,
    pub output_noise_std: f64,
    pub sample_interval_s: f64,
    /// Coefficients sampled every hour.
    pub hourly: Vec<TruthPoint>,
    /// Gain multiplier of each input at every sample.
    #[serde(skip)]
    pub multipliers: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub t_hours: f64,
    pub multipliers: [f64; 4],
    pub theta: Vec<f64>,
}

impl GroundTruth {
    fn theta_with(&self, mult: &[f64; 4]) -> DVector<f64> {
        let n = self.order;
        let mut th = DVector::zeros(n * (1 + self.b_nominal.len()));
        for j in 0..n {
            th[j] = -self.a[j];
        }
        for (i, bi) in self.b_nominal.iter().enumerate() {
            for j in 0..n {
                th[n + i * n + j] = bi[j] * mult[i];
            }
        }
        th
    }

    /// True `theta` in effect for the output at sample `t`.
    pub fn theta_at(&self, t: usize) -> DVector<f64> {
        self.theta_with(&self.multipliers[t])
    }

    /// True model at sample `t`, on the driver channels.
    pub fn model_at(&self, t: usize) -> ArxModel {
        let mut m = ArxModel::zeros(
            self.order,
            self.input_names.clone(),
            SBM_CHANNELS[SBM_CHANNELS.len() - 1],
            self.sample_interval_s,
        );
        m.set_theta(&self.theta_at(t))
            .expect("shape fixed by construction");
        m.residual_variance = self.output_noise_std.powi(2);
        m
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::write_json(path, self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub config: PlantConfig,
    /// Ten-channel plant record, see [`RAW_CHANNELS`].
    pub raw: TimeSeriesFrame,
    /// The true model inputs and the power deviation, named like a
    /// preprocessed frame: `(phi1, phi2, sp1, temp, power)`.
    pub drivers: TimeSeriesFrame,
    pub truth: GroundTruth,
}

/// Generates one record.
pub fn generate_dataset(config: &PlantConfig) -> Result<GeneratedDataset> {
    config.validate()?;
    let n = config.sample_count();
    let dt = config.sample_interval_s;
    let dt_days = dt / 86_400.0;
    let k = config.latent_factor_count;
    let mix = mixing_matrix(k);
    let mut rng = SeededRng::new(config.seed);

    let latent_ou: Vec<Ou> = (0..k)
        .map(|c| {
            Ou::new(
                config.latent_std * LATENT_DECAY.powi(c as i32),
                config.latent_timescale_h,
                dt,
            )
        })
        .collect();
    let ind_ou = Ou::new(config.independent_std, config.independent_timescale_h, dt);
    let exc_ou = Ou::new(config.excluded_std, EXCLUDED_TIMESCALE_H, dt);
    let slow_ou = Ou::new(config.temp_drift_std, TEMP_DRIFT_TIMESCALE_H, dt);
    let fast_ou = Ou::new(
        config.temp_fluctuation_std,
        TEMP_FLUCTUATION_TIMESCALE_H,
        dt,
    );

    // stationary initial states
    let mut latent: Vec<f64> = (0..k)
        .map(|c| config.latent_std * LATENT_DECAY.powi(c as i32) * rng.normal())
        .collect();
    let mut ind = config.independent_std * rng.normal();
    let mut exc = config.excluded_std * rng.normal();
    let mut slow = config.temp_drift_std * rng.normal();
    let mut fast = config.temp_fluctuation_std * rng.normal();
    let mut walk = [1.0f64; 4];

    let a = poly_from_poles(&TRUE_POLES);
    let dc = 1.0 + a.iter().sum::<f64>();
    let b_nominal: Vec<Vec<f64>> = config
        .gains
        .iter()
        .map(|g| LAG_WEIGHTS.iter().map(|w| g * dc * w).collect())
        .collect();

    let mut sp = vec![vec![0.0; n]; 6];
    let mut sp_ind = vec![0.0; n];
    let mut sp_exc = vec![0.0; n];
    let mut temp = vec![0.0; n];
    let mut u = vec![vec![0.0; n]; 4];
    let mut feature1 = vec![0.0; n];
    let mut noise = vec![0.0; n];
    let mut multipliers = vec![[1.0; 4]; n];

    for t in 0..n {
        if t > 0 {
            for (x, ou) in latent.iter_mut().zip(&latent_ou) {
                *x = ou.step(*x, rng.normal());
            }
            ind = ind_ou.step(ind, rng.normal());
            exc = exc_ou.step(exc, rng.normal());
            slow = slow_ou.step(slow, rng.normal());
            fast = fast_ou.step(fast, rng.normal());
            for (i, d) in config.drift.iter().enumerate() {
                let z = rng.normal();
                if let Drift::RandomWalk { variance_per_day } = *d {
                    walk[i] += (variance_per_day * dt_days).sqrt() * z;
                }
            }
        }
        let day = t as f64 * dt_days;
        for (i, d) in config.drift.iter().enumerate() {
            multipliers[t][i] = match *d {
                Drift::None => 1.0,
                Drift::Ramp {
                    rate_per_day,
                    start_day,
                } => 1.0 + rate_per_day * (day - start_day).max(0.0),
                Drift::RandomWalk { .. } => walk[i],
            };
        }
        for (r, row) in sp.iter_mut().enumerate() {
            let mixed: f64 = mix.iter().zip(&latent).map(|(col, f)| col[r] * f).sum();
            row[t] = SETPOINT_OFFSETS[r] + mixed + config.setpoint_noise * rng.normal();
        }
        sp_ind[t] = INDEPENDENT_OFFSET + ind;
        sp_exc[t] = EXCLUDED_OFFSET + exc;
        let hour = day * 24.0;
        let diurnal =
            config.temp_amplitude * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin();
        temp[t] = NOMINAL_TEMP + diurnal + slow + fast;
        noise[t] = config.output_noise_std * rng.normal();

        u[0][t] = latent[0];
        u[1][t] = latent.get(1).copied().unwrap_or(0.0);
        u[2][t] = ind;
        u[3][t] = temp[t] - NOMINAL_TEMP;
        feature1[t] = u[0][t] + config.nonlinearity * u[0][t] * u[0][t];
    }

    let feature = |i: usize, t: usize| if i == 0 { feature1[t] } else { u[i][t] };
    let mut y = vec![0.0; n];
    for t in 0..n {
        if t < PLANT_ORDER {
            // start at the steady state of the first inputs
            y[t] = (0..4)
                .map(|i| config.gains[i] * multipliers[t][i] * feature(i, t))
                .sum();
            continue;
        }
        let mut acc = noise[t];
        for j in 0..PLANT_ORDER {
            acc -= a[j] * y[t - 1 - j];
        }
        for (i, bi) in b_nominal.iter().enumerate() {
            let m = multipliers[t][i];
            for j in 0..PLANT_ORDER {
                acc += bi[j] * m * feature(i, t - 1 - j);
            }
        }
        y[t] = acc;
    }

    let start = TimeOrigin::Instant(config.start);
    let mut raw_channels: Vec<Channel> = sp
        .into_iter()
        .enumerate()
        .map(|(r, v)| Channel::new(RAW_CHANNELS[r], v))
        .collect();
    raw_channels.push(Channel::new(RAW_CHANNELS[6], sp_ind));
    raw_channels.push(Channel::new(RAW_CHANNELS[7], sp_exc));
    raw_channels.push(Channel::new(RAW_CHANNELS[8], temp));
    raw_channels.push(Channel::new(
        RAW_CHANNELS[9],
        y.iter().map(|v| config.nominal_power + v).collect(),
    ));
    let raw = TimeSeriesFrame::new(start, dt, raw_channels)?;

    let mut driver_channels: Vec<Channel> = u
        .into_iter()
        .enumerate()
        .map(|(i, v)| Channel::new(SBM_CHANNELS[i], v))
        .collect();
    driver_channels.push(Channel::new(SBM_CHANNELS[4], y));
    let drivers = TimeSeriesFrame::new(start, dt, driver_channels)?;

    let mut truth = GroundTruth {
        order: PLANT_ORDER,
        poles: TRUE_POLES.to_vec(),
        a,
        lag_weights: LAG_WEIGHTS.to_vec(),
        b_nominal,
        input_names: SBM_CHANNELS[..4].iter().map(|s| s.to_string()).collect(),
        nonlinearity: config.nonlinearity,
        output_noise_std: config.output_noise_std,
        sample_interval_s: dt,
        hourly: Vec::new(),
        multipliers,
    };
    let per_hour = ((3600.0 / dt).round() as usize).max(1);
    truth.hourly = (0..n)
        .step_by(per_hour)
        .map(|t| TruthPoint {
            t_hours: t as f64 * dt / 3600.0,
            multipliers: truth.multipliers[t],
            theta: truth.theta_at(t).iter().copied().collect(),
        })
        .collect();

    Ok(GeneratedDataset {
        config: config.clone(),
        raw,
        drivers,
        truth,
    })
}

/// Month-like sibling records with distinct seeds and start dates.
///
/// Each month draws its own multipliers in `1 +- MONTHLY_GAIN_SPREAD` for
/// the first three input gains; the autoregressive part and the temperature
/// gain stay fixed. A single month is allowed, it just cannot feed a
/// cross-month covariance.
pub fn monthly_suite(config: &PlantConfig, months: usize) -> Result<Vec<GeneratedDataset>> {
    if months == 0 {
        return Err(SbmError::config("months", "must be at least 1"));
    }
    config.validate()?;
    let mut regime = SeededRng::new(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xA5A5);
    let mut out = Vec::with_capacity(months);
    for m in 0..months {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(1 + m as u64);
        for g in cfg.gains.iter_mut().take(3) {
            *g *= regime.uniform_in(1.0 - MONTHLY_GAIN_SPREAD, 1.0 + MONTHLY_GAIN_SPREAD);
        }
        cfg.start = config.start + chrono::Duration::days(31 * m as i64);
        out.push(generate_dataset(&cfg)?);
    }
    Ok(out)
}

/// Bare ARX system with white Gaussian inputs, for identification checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArxScenario {
    pub days: f64,
    pub order: usize,
    pub input_count: usize,
    /// Equation-error standard deviation.
    pub noise_std: f64,
    pub seed: u64,
    /// Replace the output by white noise of `noise_std`, unrelated to the inputs.
    pub white_output: bool,
    /// Total change of `b_{1,1}` over the run, applied as a linear ramp.
    pub b11_ramp: f64,
    pub sample_interval_s: f64,
}

impl Default for ArxScenario {
    fn default() -> Self {
        Self {
            days: 7.0,
            order: 3,
            input_count: 4,
            noise_std: 0.1,
            seed: 0,
            white_output: false,
            b11_ramp: 0.0,
            sample_interval_s: 60.0,
        }
    }
}

const SCENARIO_POLES: [f64; 6] = [0.7, 0.5, 0.3, 0.2, 0.1, 0.05];
const SCENARIO_GAINS: [f64; 6] = [0.8, -0.6, 0.5, 0.4, -0.3, 0.2];

#[derive(Debug, Clone, PartialEq)]
pub struct ArxScenarioData {
    /// Inputs `u1..uM`, then `y`.
    pub frame: TimeSeriesFrame,
    /// True model at the first sample.
    pub model: ArxModel,
    /// True `b_{1,1}` at every sample.
    pub b11: Vec<f64>,
}

impl ArxScenario {
    /// True model of the scenario (at the start of any ramp).
    pub fn true_model(&self) -> Result<ArxModel> {
        if self.order == 0 || self.order > SCENARIO_POLES.len() {
            return Err(SbmError::config(
                "order",
                format!("must be in 1..={}", SCENARIO_POLES.len()),
            ));
        }
        let inputs = (1..=self.input_count).map(|i| format!("u{i}")).collect();
        let mut m = ArxModel::zeros(self.order, inputs, "y", self.sample_interval_s);
        m.a = poly_from_poles(&SCENARIO_POLES[..self.order]);
        for (i, bi) in m.b.iter_mut().enumerate() {
            let g = SCENARIO_GAINS[i % SCENARIO_GAINS.len()];
            for (j, b) in bi.iter_mut().enumerate() {
                *b = g * 0.6f64.powi(j as i32);
            }
        }
        m.residual_variance = self.noise_std.powi(2);
        Ok(m)
    }
}

pub fn simulate_arx_scenario(sc: &ArxScenario) -> Result<ArxScenarioData> {
    let model = sc.true_model()?;
    if !(sc.days > 0.0) || !(sc.sample_interval_s > 0.0) || !(sc.noise_std >= 0.0) {
        return Err(SbmError::config(
            "days",
            "days and interval must be positive, noise non-negative",
        ));
    }
    let n = (sc.days * 86_400.0 / sc.sample_interval_s).round() as usize;
    let order = sc.order;
    if n <= order {
        return Err(SbmError::config("days", "scenario shorter than its order"));
    }
    let mut rng = SeededRng::new(sc.seed);
    let mut u = vec![vec![0.0; n]; sc.input_count];
    let mut y = vec![0.0; n];
    let mut b11 = vec![0.0; n];
    let b11_0 = model.b.first().map_or(0.0, |b| b[0]);
    for t in 0..n {
        for ui in u.iter_mut() {
            ui[t] = rng.normal();
        }
        let e = sc.noise_std * rng.normal();
        b11[t] = b11_0 + sc.b11_ramp * t as f64 / (n - 1) as f64;
        if sc.white_output {
            y[t] = e;
            continue;
        }
        if t < order {
            y[t] = e;
            continue;
        }
        let mut acc = e;
        for j in 0..order {
            acc -= model.a[j] * y[t - 1 - j];
        }
        for (i, bi) in model.b.iter().enumerate() {
            for j in 0..order {
                let b = if i == 0 && j == 0 { b11[t] } else { bi[j] };
                acc += b * u[i][t - 1 - j];
            }
        }
        y[t] = acc;
    }
    let mut cols: Vec<(String, Vec<f64>)> = u
        .into_iter()
        .enumerate()
        .map(|(i, v)| (format!("u{}", i + 1), v))
        .collect();
    cols.push(("y".into(), y));
    let frame = TimeSeriesFrame::from_columns(sc.sample_interval_s, cols)?;
    Ok(ArxScenarioData { frame, model, b11 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arx::{build_regression, fit_least_squares};

    #[test]
    fn poles_to_coefficients() {
        let a = poly_from_poles(&TRUE_POLES);
        let want = [-2.1, 1.43, -0.315];
        for (x, w) in a.iter().zip(want) {
            assert!((x - w).abs() < 1e-12);
        }
    }

    #[test]
    fn mixing_columns_are_orthogonal() {
        let m = mixing_matrix(6);
        for i in 0..6 {
            for j in 0..i {
                let d: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                assert!(d.abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn deterministic_and_shaped() {
        let cfg = PlantConfig {
            duration_days: 0.5,
            ..PlantConfig::default()
        };
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.raw.channel_names(), RAW_CHANNELS.to_vec());
        assert_eq!(a.raw.len(), 720);
        assert_eq!(a.drivers.channel_names(), SBM_CHANNELS.to_vec());
        assert_eq!(a.truth.hourly.len(), 12);
        let c = generate_dataset(&PlantConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.raw, c.raw);
    }

    #[test]
    fn quiet_plant_is_constant() {
        let cfg = PlantConfig {
            duration_days: 0.2,
            latent_std: 0.0,
            setpoint_noise: 0.0,
            independent_std: 0.0,
            excluded_std: 0.0,
            temp_amplitude: 0.0,
            temp_drift_std: 0.0,
            temp_fluctuation_std: 0.0,
            output_noise_std: 0.0,
            ..PlantConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        for ch in ds.raw.channels() {
            assert!(ch.values.iter().all(|v| *v == ch.values[0]), "{}", ch.name);
        }
        assert_eq!(ds.raw.channel("power").unwrap()[0], 100.0);
    }

    #[test]
    fn noise_free_drivers_give_exact_fit() {
        let cfg = PlantConfig {
            duration_days: 1.0,
            output_noise_std: 0.0,
            ..PlantConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        let model = fit_least_squares(&build_regression(&ds.drivers, 3).unwrap()).unwrap();
        let err = (model.theta() - ds.truth.theta_at(0)).amax();
        assert!(err < 1e-8, "{err:e}");
    }

    #[test]
    fn ramp_multiplier() {
        let cfg = PlantConfig {
            duration_days: 2.0,
            drift: [
                Drift::Ramp {
                    rate_per_day: 0.5,
                    start_day: 1.0,
                },
                Drift::None,
                Drift::None,
                Drift::None,
            ],
            ..PlantConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        assert_eq!(ds.truth.multipliers[1000][0], 1.0);
        assert!((ds.truth.multipliers[2160][0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn suite_shape() {
        let cfg = PlantConfig {
            duration_days: 0.1,
            ..PlantConfig::default()
        };
        let suite = monthly_suite(&cfg, 3).unwrap();
        assert_eq!(suite.len(), 3);
        assert_ne!(suite[0].config.seed, suite[1].config.seed);
        assert_eq!(suite[0].truth.a, suite[2].truth.a);
        assert_eq!(suite[0].config.gains[3], suite[1].config.gains[3]);
        assert_ne!(suite[0].config.gains[0], suite[1].config.gains[0]);
        assert!(monthly_suite(&cfg, 0).is_err());
        assert_eq!(monthly_suite(&cfg, 1).unwrap().len(), 1);
    }

    #[test]
    fn invalid_config() {
        let cfg = PlantConfig {
            duration_days: -1.0,
            ..PlantConfig::default()
        };
        match generate_dataset(&cfg) {
            Err(SbmError::InvalidConfig { key, .. }) => assert_eq!(key, "duration_days"),
            other => panic!("{other:?}"),
        }
    }
}
