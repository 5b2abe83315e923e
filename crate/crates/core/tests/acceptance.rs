//! Acceptance suite: one test per quantitative acceptance property, in order.
//!
//! Every test prints a `PASS`/`FAIL` line with the measured numbers before
//! asserting, so `cargo test --test acceptance -- --nocapture` doubles as a
//! report.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use sbm_core::arx::{build_regression, fit_least_squares, naic, select_order, split_channels};
use sbm_core::eval::{
    cross_dataset_covariance, evaluate_moving_horizon, fit_training_window, run_experiment_with,
    ExperimentConfig, HorizonSpec, ModelSource, Phase, PhaseSummary, TuningInput, TuningOverrides,
};
use sbm_core::kalman::{default_tuning, run_stream, FilterTuning, ParameterFilter};
use sbm_core::preprocess::{
    lowpass_filter, pca_fit, savgol_coefficients, savgol_filter, FilterSpec, SavGolSpec,
    SbmPreprocessor,
};
use sbm_core::rng::SeededRng;
use sbm_core::synthplant::{
    generate_dataset, monthly_suite, simulate_arx_scenario, ArxScenario, Drift, PlantConfig,
};
use sbm_core::TimeSeriesFrame;

fn report(name: &str, pass: bool, detail: impl std::fmt::Display) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn check_runtime(name: &str, elapsed: Duration, limit: Duration) {
    let pass = elapsed < limit;
    report(
        &format!("{name} runtime"),
        pass,
        format!("{elapsed:.2?} (limit {limit:?})"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- ARX

#[test]
fn exact_arx_recovery_on_noise_free_data() {
    let t0 = Instant::now();
    let sc = ArxScenario {
        days: 7.0,
        order: 3,
        input_count: 4,
        noise_std: 0.0,
        seed: 17,
        ..ArxScenario::default()
    };
    let data = simulate_arx_scenario(&sc).unwrap();
    let problem = build_regression(&data.frame, 3).unwrap();
    let fitted = fit_least_squares(&problem).unwrap();
    let err = (fitted.theta() - data.model.theta()).amax();
    let elapsed = t0.elapsed();
    let pass = err <= 1e-8;
    report(
        "exact ARX recovery",
        pass,
        format!("max |theta - truth| = {err:.3e}"),
    );
    assert!(pass);
    check_runtime("exact ARX recovery", elapsed, Duration::from_secs(5));
}

// ---------------------------------------------------------------- Kalman

/// Batch posterior of theta ~ N(theta0, P0) under y = u'theta + e, e ~ N(0, R).
fn batch_posterior_mean(info: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    info.clone().cholesky().unwrap().solve(rhs)
}

#[test]
fn q_zero_filter_matches_batch_regularized_least_squares() {
    let t0 = Instant::now();
    let sc = ArxScenario {
        days: 10_010.0 / 1440.0,
        noise_std: 0.2,
        seed: 23,
        ..ArxScenario::default()
    };
    let data = simulate_arx_scenario(&sc).unwrap();
    let (inputs, y) = split_channels(&data.frame).unwrap();
    let k = data.model.param_count();
    let r = 0.5;
    let mut rng = SeededRng::new(99);
    let theta0 = DVector::from_fn(k, |_, _| rng.normal());
    let p0 = DMatrix::from_diagonal(&DVector::from_fn(k, |i, _| 0.2 + 0.05 * i as f64));
    let tuning = FilterTuning {
        q: DMatrix::zeros(k, k),
        r,
        p0: p0.clone(),
        alpha: 1e-12,
        beta: 1e9,
        divergence_guard: 1e6,
    };
    let mut filter = ParameterFilter::new(theta0.clone(), tuning).unwrap();
    let mut info = p0.clone().try_inverse().unwrap();
    let mut rhs = &info * &theta0;
    let mut worst = 0.0f64;
    let mut checks = 0;
    let mut reg = vec![0.0; k];
    for step in 1..=10_000 {
        let t = step + 2;
        sbm_core::arx::fill_regressor(y, &inputs, 3, t, &mut reg);
        filter.step(&reg, y[t]).unwrap();
        let u = DVector::from_column_slice(&reg);
        info += &u * u.transpose() / r;
        rhs += &u * (y[t] / r);
        if step % 100 == 0 {
            worst = worst.max((filter.theta() - batch_posterior_mean(&info, &rhs)).amax());
            checks += 1;
        }
    }
    let elapsed = t0.elapsed();
    let pass = worst <= 1e-8 && checks == 100;
    report(
        "RLS equivalence",
        pass,
        format!("{checks} checkpoints, worst |theta - batch| = {worst:.3e}"),
    );
    assert!(pass);
    check_runtime("RLS equivalence", elapsed, Duration::from_secs(10));
}

#[test]
fn hand_checked_scalar_step_and_zero_innovation() {
    let scalar = FilterTuning {
        q: DMatrix::zeros(1, 1),
        r: 1.0,
        p0: DMatrix::identity(1, 1),
        alpha: 1e-12,
        beta: 1e9,
        divergence_guard: 1e6,
    };
    let mut f = ParameterFilter::new(DVector::zeros(1), scalar).unwrap();
    f.step(&[1.0], 1.0).unwrap();
    let (theta, p) = (f.theta()[0], f.covariance()[(0, 0)]);
    let scalar_ok = theta == 0.5 && p == 0.5;
    report(
        "scalar filter step",
        scalar_ok,
        format!("theta = {theta}, P = {p}"),
    );

    let theta0 = DVector::from_vec(vec![0.4, -1.2, 2.5]);
    let tuning = FilterTuning {
        q: DMatrix::identity(3, 3) * 1e-3,
        r: 0.3,
        p0: DMatrix::identity(3, 3) * 0.7,
        alpha: 1e-12,
        beta: 1e9,
        divergence_guard: 1e6,
    };
    let mut g = ParameterFilter::new(theta0.clone(), tuning).unwrap();
    let mut rng = SeededRng::new(5);
    let mut zero_ok = true;
    for _ in 0..1000 {
        let u: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let y = DVector::from_column_slice(&u).dot(&theta0);
        let d = g.step(&u, y).unwrap();
        zero_ok &= d.innovation == 0.0 && g.theta() == &theta0;
    }
    report(
        "zero-innovation invariance",
        zero_ok,
        "theta unchanged bit-for-bit over 1000 exact-prediction steps",
    );
    assert!(scalar_ok && zero_ok);
}

// ---------------------------------------------------------------- order selection

#[test]
fn order_selection_recovers_third_order() {
    let t0 = Instant::now();
    let orders = [1, 2, 3, 4, 5];
    let d_train = [3.0, 5.0, 7.0];
    let mut hits = 0;
    let mut naic_ok = 0;
    let mut chosen = Vec::new();
    for seed in 1..=20 {
        let sc = ArxScenario {
            days: 7.0,
            seed,
            ..ArxScenario::default()
        };
        let data = simulate_arx_scenario(&sc).unwrap();
        let naic_of = |n: usize| {
            let p = build_regression(&data.frame, n).unwrap();
            naic(&p, &fit_least_squares(&p).unwrap())
        };
        if naic_of(3) < naic_of(1) {
            naic_ok += 1;
        }
        let sel = select_order(&data.frame, &orders, &d_train).unwrap();
        if sel.chosen == 3 {
            hits += 1;
        }
        chosen.push(sel.chosen);
    }
    let elapsed = t0.elapsed();
    let pass = naic_ok == 20 && hits >= 18;
    report(
        "order selection",
        pass,
        format!(
            "nAIC(3) < nAIC(1) on {naic_ok}/20 seeds; chose 3 on {hits}/20 (chosen {chosen:?})"
        ),
    );
    assert!(pass);
    check_runtime("order selection", elapsed, Duration::from_secs(60));
}

// ---------------------------------------------------------------- preprocessing

/// Least-squares quadratic through `window` points, evaluated at `at`.
fn local_quadratic(xs: &[f64], ys: &[f64], at: f64) -> f64 {
    let a = DMatrix::from_fn(xs.len(), 3, |r, c| xs[r].powi(c as i32));
    let b = DVector::from_column_slice(ys);
    let coef = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * b))
        .unwrap();
    coef[0] + coef[1] * at + coef[2] * at * at
}

#[test]
fn savitzky_golay_matches_least_squares_oracle() {
    let c5 = savgol_coefficients(SavGolSpec::new(5, 2).unwrap()).unwrap();
    let expect = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
    let w_err = c5
        .iter()
        .zip(expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report(
        "Savitzky-Golay 5/2 weights",
        w_err <= 1e-12,
        format!("max error {w_err:.3e}"),
    );

    let spec = SavGolSpec::new(15, 2).unwrap();
    let mut rng = SeededRng::new(12);
    let signal: Vec<f64> = (0..400)
        .map(|i| (i as f64 * 0.05).sin() + 0.3 * rng.normal())
        .collect();
    let smoothed = savgol_filter(&signal, spec).unwrap();
    let xs: Vec<f64> = (-7..=7).map(|v| v as f64).collect();
    let mut oracle_err = 0.0f64;
    for i in 7..signal.len() - 7 {
        let expect = local_quadratic(&xs, &signal[i - 7..=i + 7], 0.0);
        oracle_err = oracle_err.max((smoothed[i] - expect).abs());
    }
    // End samples come from the polynomial of the first / last full window.
    for i in 0..7 {
        let head = local_quadratic(&xs, &signal[..15], i as f64 - 7.0);
        let tail = local_quadratic(&xs, &signal[signal.len() - 15..], 7.0 - i as f64);
        oracle_err = oracle_err
            .max((smoothed[i] - head).abs())
            .max((smoothed[signal.len() - 1 - i] - tail).abs());
    }
    report(
        "Savitzky-Golay 15/2 vs sliding least squares",
        oracle_err <= 1e-10,
        format!("max error {oracle_err:.3e}"),
    );

    let quad: Vec<f64> = (0..200)
        .map(|i| {
            let x = i as f64 * 0.1;
            1.5 - 0.4 * x + 0.07 * x * x
        })
        .collect();
    let q_out = savgol_filter(&quad, spec).unwrap();
    let q_err = quad
        .iter()
        .zip(&q_out)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report(
        "Savitzky-Golay quadratic reproduction",
        q_err <= 1e-9,
        format!("max error {q_err:.3e}"),
    );
    assert!(w_err <= 1e-12 && oracle_err <= 1e-10 && q_err <= 1e-9);
}

/// Zero-phase magnitude of a bilinear second-order Butterworth section run
/// forward and backward: `1 / (1 + (tan(pi f dt) / tan(pi fc dt))^4)`.
fn analytic_zero_phase_gain(freq_hz: f64, cutoff_hz: f64, dt: f64) -> f64 {
    let r =
        (std::f64::consts::PI * freq_hz * dt).tan() / (std::f64::consts::PI * cutoff_hz * dt).tan();
    1.0 / (1.0 + r.powi(4))
}

/// Amplitude of the `freq_hz` component of `x`, measured by projection on
/// sine and cosine over a whole number of periods.
fn measured_amplitude(x: &[f64], freq_hz: f64, dt: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz * dt;
    let (mut s, mut c) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        s += v * (w * i as f64).sin();
        c += v * (w * i as f64).cos();
    }
    2.0 * s.hypot(c) / x.len() as f64
}

#[test]
fn zero_phase_lowpass_attenuation() {
    let dt = 60.0;
    let cutoff_per_hour = 1.0;
    let fc = cutoff_per_hour / 3600.0;
    let n = 60 * 24 * 10;
    let mut ok = true;
    for (label, mult, lo, hi) in [("cutoff", 1.0, 0.48, 0.52), ("10x cutoff", 10.0, 0.0, 0.01)] {
        let f = fc * mult;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * dt * i as f64).sin())
            .collect();
        let y = lowpass_filter(&x, dt, cutoff_per_hour).unwrap();
        // Middle 8 days, an integer number of periods for both frequencies.
        let mid = &y[1440..1440 * 9];
        let amp = measured_amplitude(mid, f, dt);
        let oracle = analytic_zero_phase_gain(f, fc, dt);
        let pass = amp >= lo && amp <= hi && (amp - oracle).abs() < 1e-3;
        ok &= pass;
        report(
            &format!("low-pass at {label}"),
            pass,
            format!("amplitude {amp:.5}, analytic {oracle:.5}, band [{lo}, {hi}]"),
        );
    }
    assert!(ok);
}

#[test]
fn pca_explains_setpoint_group() {
    let ds = generate_dataset(&PlantConfig::default()).unwrap();
    let roles = PlantConfig::roles();
    let group: Vec<&str> = roles
        .correlated_setpoints
        .iter()
        .map(String::as_str)
        .collect();
    let pca = pca_fit(&ds.raw, &group, 2).unwrap();
    let explained = pca.evr[0] + pca.evr[1];
    let pass = explained >= 0.90;
    report(
        "PCA structure",
        pass,
        format!(
            "first two components explain {:.2}% (evr {:?})",
            100.0 * explained,
            pca.evr
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- experiment

/// The committed two-week drift scenario: gains of the first two inputs
/// ramp in opposite directions from day 0.
fn drift_scenario(seed: u64) -> PlantConfig {
    let mut cfg = PlantConfig {
        seed,
        duration_days: 14.0 + 3.0 / 1440.0,
        ..PlantConfig::default()
    };
    cfg.drift[0] = Drift::Ramp {
        rate_per_day: 0.1,
        start_day: 0.0,
    };
    cfg.drift[1] = Drift::Ramp {
        rate_per_day: -0.1,
        start_day: 0.0,
    };
    cfg
}

fn drift_siblings(seed: u64) -> Vec<TimeSeriesFrame> {
    let cfg = PlantConfig {
        duration_days: 7.0,
        seed: 100 + seed,
        ..PlantConfig::default()
    };
    monthly_suite(&cfg, 11)
        .unwrap()
        .into_iter()
        .map(|d| d.raw)
        .collect()
}

fn phase_median(summary: &[PhaseSummary], phase: Phase) -> f64 {
    summary.iter().find(|s| s.phase == phase).unwrap().median
}

#[test]
fn static_model_degrades_while_adaptive_model_tracks() {
    let t0 = Instant::now();
    let seed = 1;
    let ds = generate_dataset(&drift_scenario(seed)).unwrap();
    let config = ExperimentConfig {
        siblings: vec!["siblings".into()],
        overrides: TuningOverrides {
            r: None,
            r_from_residuals: true,
        },
        ..ExperimentConfig::default()
    };
    let out = run_experiment_with(
        &config,
        &ds.raw,
        TuningInput::Siblings(drift_siblings(seed)),
    )
    .unwrap();
    let elapsed = t0.elapsed();
    let r = &out.report;
    assert_eq!(r.static_series.len(), 241);
    let adaptive = r.adaptive_summary.as_ref().unwrap();
    let (s_train, s_new) = (
        phase_median(&r.static_summary, Phase::Train),
        phase_median(&r.static_summary, Phase::New),
    );
    let (a_train, a_new) = (
        phase_median(adaptive, Phase::Train),
        phase_median(adaptive, Phase::New),
    );

    let degrade = s_new / s_train;
    let a_ratio = a_new / a_train;
    let (pa, pb, pc) = (
        degrade >= 5.0,
        (0.5..=2.0).contains(&a_ratio),
        a_new < s_new,
    );
    report(
        "static degradation",
        pa,
        format!("static median days 7-14 / days 0-3 = {s_new:.4} / {s_train:.4} = {degrade:.2}"),
    );
    report(
        "adaptive stays within 2x",
        pb,
        format!("adaptive median days 7-14 / days 0-3 = {a_new:.4} / {a_train:.4} = {a_ratio:.2}"),
    );
    report(
        "adaptive beats static on new data",
        pc,
        format!("adaptive {a_new:.4} < static {s_new:.4}"),
    );
    assert!(pa && pb && pc);
    check_runtime("drift experiment", elapsed, Duration::from_secs(120));
}

#[test]
fn monthly_parameter_stability_ordering() {
    let mut ok = true;
    for seed in 1..=3 {
        let cfg = PlantConfig {
            seed,
            duration_days: 7.0,
            ..PlantConfig::default()
        };
        let suite = monthly_suite(&cfg, 12).unwrap();
        let pre = SbmPreprocessor::fit(&suite[0].raw, &PlantConfig::roles(), FilterSpec::default())
            .unwrap();
        let models: Vec<_> = suite
            .iter()
            .map(|d| {
                let data = pre.apply(&d.raw).unwrap();
                fit_training_window(&data, 3, data.len()).unwrap()
            })
            .collect();
        let stats = cross_dataset_covariance(&models).unwrap();
        let v = &stats.scaled_variance;
        // theta layout: a_1..a_3, then b_{i,1..3} per input; input 1 = phi1, input 4 = temp
        let a_max = v[0..3].iter().cloned().fold(0.0, f64::max);
        let b4_max = v[12..15].iter().cloned().fold(0.0, f64::max);
        let b1_min = v[3..6].iter().cloned().fold(f64::INFINITY, f64::min);
        let pass = a_max < b1_min && b4_max < b1_min;
        ok &= pass;
        report(
            &format!("parameter stability (seed {seed})"),
            pass,
            format!("max a_j {a_max:.3e}, max b4_j {b4_max:.3e} < min b1_j {b1_min:.3e}"),
        );
    }
    assert!(ok);
}

#[test]
fn default_tuning_stays_bounded_over_a_year() {
    let t0 = Instant::now();
    let mut cfg = PlantConfig {
        duration_days: 365.0,
        ..PlantConfig::default()
    };
    for d in cfg.drift.iter_mut().take(3) {
        *d = Drift::RandomWalk {
            variance_per_day: 0.002,
        };
    }
    let ds = generate_dataset(&cfg).unwrap();
    let n_train = 7 * 1440;
    let train = ds.raw.slice_window(0, n_train).unwrap();
    let pre = SbmPreprocessor::fit(&train, &PlantConfig::roles(), FilterSpec::default()).unwrap();
    let data = pre.apply(&ds.raw).unwrap();
    let model = fit_training_window(&data, 3, n_train).unwrap();
    let suite = monthly_suite(
        &PlantConfig {
            duration_days: 7.0,
            seed: 50,
            ..PlantConfig::default()
        },
        12,
    )
    .unwrap();
    let models: Vec<_> = suite
        .iter()
        .map(|d| fit_training_window(&pre.apply(&d.raw).unwrap(), 3, n_train).unwrap())
        .collect();
    let sigma = cross_dataset_covariance(&models).unwrap().sigma;
    let tuning = default_tuning(&model.theta(), &sigma, n_train).unwrap();
    let guard = tuning.divergence_guard;
    let mut filter = ParameterFilter::new(model.theta(), tuning).unwrap();
    let res = run_stream(&mut filter, &data, 3, 60).unwrap();
    let elapsed = t0.elapsed();

    let checkpoints = res.trajectory.len();
    let out_of_bounds = res
        .trajectory
        .iter()
        .filter(|p| !p.bounds.is_in_bounds())
        .count();
    let max_theta = res
        .trajectory
        .iter()
        .flat_map(|p| p.theta.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let pass = checkpoints >= 365 * 24 - 1 && out_of_bounds == 0 && max_theta < guard;
    report(
        "year-long boundedness",
        pass,
        format!("{checkpoints} hourly checkpoints, {out_of_bounds} out of bounds, max |theta| {max_theta:.3} < guard {guard:e}"),
    );
    assert!(pass);
    check_runtime("year-long boundedness", elapsed, Duration::from_secs(600));
}

#[test]
fn truncation_leaves_earlier_mse_bit_identical() {
    let seed = 1;
    let ds = generate_dataset(&drift_scenario(seed)).unwrap();
    let config = ExperimentConfig {
        siblings: vec!["siblings".into()],
        ..ExperimentConfig::default()
    };
    let out = run_experiment_with(
        &config,
        &ds.raw,
        TuningInput::Siblings(drift_siblings(seed)),
    )
    .unwrap();
    let pre = out.preprocessor;
    let data = pre.apply(&ds.raw).unwrap();
    let model = &out.report.model;
    let filter = ParameterFilter::new(model.theta(), out.tuning.unwrap()).unwrap();
    let spec = HorizonSpec::default();
    let n_sched = spec.n_sched(data.sample_interval_s()).unwrap();
    let full_s = evaluate_moving_horizon(ModelSource::Static(model), &data, &spec).unwrap();
    let full_a = evaluate_moving_horizon(ModelSource::Adaptive(&filter), &data, &spec).unwrap();
    // The experiment's own series are the same computation.
    assert_eq!(full_s.mse, out.report.static_series.mse);
    assert_eq!(full_a.mse, out.report.adaptive_series.as_ref().unwrap().mse);

    let mut mismatches = 0;
    let mut cuts = 0;
    for cut_k in (0..full_s.len()).step_by(20).chain([full_s.len() - 1]) {
        let end = full_s.sample_index[cut_k] + n_sched + 1;
        let cut = data.slice_window(0, end).unwrap();
        let s = evaluate_moving_horizon(ModelSource::Static(model), &cut, &spec).unwrap();
        let a = evaluate_moving_horizon(ModelSource::Adaptive(&filter), &cut, &spec).unwrap();
        assert_eq!(s.len(), cut_k + 1);
        for i in 0..=cut_k {
            mismatches += usize::from(s.mse[i].to_bits() != full_s.mse[i].to_bits());
            mismatches += usize::from(a.mse[i].to_bits() != full_a.mse[i].to_bits());
        }
        cuts += 1;
    }
    let pass = mismatches == 0;
    report(
        "causality audit",
        pass,
        format!("{cuts} truncation points, {mismatches} differing earlier MSE values (static + adaptive)"),
    );
    assert!(pass);
}
