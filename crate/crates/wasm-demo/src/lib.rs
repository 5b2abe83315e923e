//! Browser demo of the identification and adaptive-updating pipeline.
//!
//! Three operations are exported to JavaScript, each returning a JSON
//! string for the page in `www/` to plot:
//!
//! - [`identify`]: simulate a noisy third-order ARX plant, sweep candidate
//!   orders by nAIC and fit the chosen one.
//! - [`track_ramp`]: stream the parameter filter over data whose first input
//!   coefficient ramps linearly, next to the frozen estimate.
//! - [`compare_static_adaptive`]: the two-week drift experiment, static and
//!   adaptive moving-horizon MSE side by side.
//!
//! The computations live in plain functions (`*_json`) so they can be tested
//! natively; the `#[wasm_bindgen]` wrappers only convert errors.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::DMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use sbm_core::arx::{build_regression, fit_least_squares, select_order};
use sbm_core::eval::{
    run_experiment_with, ExperimentConfig, PhaseSummary, TuningInput, TuningOverrides,
};
use sbm_core::kalman::{default_tuning, run_stream, ParameterFilter};
use sbm_core::synthplant::{
    generate_dataset, monthly_suite, simulate_arx_scenario, ArxScenario, Drift, PlantConfig,
};

const CANDIDATE_ORDERS: [usize; 5] = [1, 2, 3, 4, 5];

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Identification {
    chosen: usize,
    mean_naic: Vec<(usize, f64)>,
    truth: Vec<f64>,
    fitted: Vec<f64>,
    residual_variance: f64,
}

pub fn identify_json(seed: u64, noise_std: f64, days: f64) -> Result<String, String> {
    if !(noise_std > 0.0) {
        return Err(
            "noise_std must be positive (noise-free data makes higher orders singular)".into(),
        );
    }
    if !(0.5..=14.0).contains(&days) {
        return Err("days must be between 0.5 and 14".into());
    }
    let data = simulate_arx_scenario(&ArxScenario {
        days,
        noise_std,
        seed,
        ..ArxScenario::default()
    })
    .map_err(|e| e.to_string())?;
    let sel = select_order(&data.frame, &CANDIDATE_ORDERS, &[days / 2.0, days])
        .map_err(|e| e.to_string())?;
    let problem = build_regression(&data.frame, sel.chosen).map_err(|e| e.to_string())?;
    let model = fit_least_squares(&problem).map_err(|e| e.to_string())?;
    to_json(&Identification {
        chosen: sel.chosen,
        mean_naic: sel.mean_by_order,
        truth: data.model.theta().iter().copied().collect(),
        fitted: model.theta().iter().copied().collect(),
        residual_variance: model.residual_variance,
    })
}

#[derive(Serialize)]
struct RampTracking {
    t_hours: Vec<f64>,
    truth: Vec<f64>,
    tracked: Vec<f64>,
    frozen: f64,
    /// Time-averaged absolute errors as fractions of the ramp.
    tracked_error: f64,
    frozen_error: f64,
}

pub fn track_ramp_json(seed: u64, ramp: f64, q_scale: f64) -> Result<String, String> {
    if !(ramp.abs() > 0.0 && ramp.is_finite()) || !(q_scale >= 0.0 && q_scale.is_finite()) {
        return Err("ramp must be non-zero and q_scale non-negative".into());
    }
    let sc = ArxScenario {
        days: 7.0,
        noise_std: 1.0,
        seed,
        b11_ramp: ramp,
        ..ArxScenario::default()
    };
    let data = simulate_arx_scenario(&sc).map_err(|e| e.to_string())?;
    let theta0 = data.model.theta();
    let k = theta0.len();
    let idx = sc.order;
    let n = data.frame.len();
    let n_train = n / 2;
    // Spread of b_{1,1} over one training span, scaled by the slider.
    let mut sigma = DMatrix::identity(k, k) * 1e-10;
    sigma[(idx, idx)] = q_scale * (ramp * n_train as f64 / n as f64).powi(2);
    let tuning = default_tuning(&theta0, &sigma, n_train).map_err(|e| e.to_string())?;
    let mut filter = ParameterFilter::new(theta0.clone(), tuning).map_err(|e| e.to_string())?;
    let res = run_stream(&mut filter, &data.frame, sc.order, 60).map_err(|e| e.to_string())?;

    let frozen = theta0[idx];
    let mut out = RampTracking {
        t_hours: Vec::new(),
        truth: Vec::new(),
        tracked: Vec::new(),
        frozen,
        tracked_error: 0.0,
        frozen_error: 0.0,
    };
    for p in &res.trajectory {
        let truth = data.b11[p.t];
        out.t_hours.push(p.t as f64 / 60.0);
        out.truth.push(truth);
        out.tracked.push(p.theta[idx]);
        out.tracked_error += (p.theta[idx] - truth).abs();
        out.frozen_error += (frozen - truth).abs();
    }
    let m = res.trajectory.len().max(1) as f64 * ramp.abs();
    out.tracked_error /= m;
    out.frozen_error /= m;
    to_json(&out)
}

#[derive(Serialize)]
struct Comparison<'a> {
    t_hours: &'a [f64],
    static_mse: &'a [f64],
    adaptive_mse: &'a [f64],
    static_summary: &'a [PhaseSummary],
    adaptive_summary: &'a [PhaseSummary],
    phase_boundaries_days: [f64; 2],
}

pub fn compare_static_adaptive_json(seed: u64, rate_per_day: f64) -> Result<String, String> {
    if !(rate_per_day.abs() <= 0.3) {
        return Err("rate_per_day must be within +-0.3".into());
    }
    let mut cfg = PlantConfig {
        seed,
        duration_days: 14.0 + 3.0 / 1440.0,
        ..PlantConfig::default()
    };
    cfg.drift[0] = Drift::Ramp {
        rate_per_day,
        start_day: 0.0,
    };
    cfg.drift[1] = Drift::Ramp {
        rate_per_day: -rate_per_day,
        start_day: 0.0,
    };
    let ds = generate_dataset(&cfg).map_err(|e| e.to_string())?;
    let sib_cfg = PlantConfig {
        duration_days: 7.0,
        seed: 100 + seed,
        ..PlantConfig::default()
    };
    let siblings = monthly_suite(&sib_cfg, 5)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|d| d.raw)
        .collect();
    let config = ExperimentConfig {
        siblings: vec!["in-memory".into()],
        overrides: TuningOverrides {
            r: None,
            r_from_residuals: true,
        },
        ..ExperimentConfig::default()
    };
    let out = run_experiment_with(&config, &ds.raw, TuningInput::Siblings(siblings))
        .map_err(|e| e.to_string())?;
    let r = &out.report;
    let adaptive = r
        .adaptive_series
        .as_ref()
        .ok_or("adaptive series missing")?;
    to_json(&Comparison {
        t_hours: &r.static_series.t_hours,
        static_mse: &r.static_series.mse,
        adaptive_mse: &adaptive.mse,
        static_summary: &r.static_summary,
        adaptive_summary: r.adaptive_summary.as_deref().unwrap_or_default(),
        phase_boundaries_days: r.phase_boundaries_days,
    })
}

#[wasm_bindgen]
pub fn identify(seed: u32, noise_std: f64, days: f64) -> Result<String, JsError> {
    identify_json(seed.into(), noise_std, days).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn track_ramp(seed: u32, ramp: f64, q_scale: f64) -> Result<String, JsError> {
    track_ramp_json(seed.into(), ramp, q_scale).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare_static_adaptive(seed: u32, rate_per_day: f64) -> Result<String, JsError> {
    compare_static_adaptive_json(seed.into(), rate_per_day).map_err(|e| JsError::new(&e))
}
