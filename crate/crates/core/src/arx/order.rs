use serde::{Deserialize, Serialize};

use super::{build_regression, fit_least_squares, naic};
use crate::dataio::TimeSeriesFrame;
use crate::error::{Result, SbmError};

/// Relative nAIC band within which a smaller order is preferred.
pub const PARSIMONY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCell {
    pub order: usize,
    pub d_train_days: f64,
    pub naic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    /// One cell per (training length, order), training length outermost.
    pub table: Vec<OrderCell>,
    /// Mean nAIC across training lengths, one per candidate order.
    pub mean_by_order: Vec<(usize, f64)>,
    pub chosen: usize,
}

/// Sweeps `orders` x `d_train_days`, fitting on the first `d` days each time,
/// and picks the smallest order whose mean nAIC is within
/// [`PARSIMONY_TOLERANCE`] (relative) of the best mean.
pub fn select_order(
    data: &TimeSeriesFrame,
    orders: &[usize],
    d_train_days: &[f64],
) -> Result<OrderSelection> {
    if orders.is_empty() || orders.contains(&0) {
        return Err(SbmError::config(
            "orders",
            "candidate orders must be non-empty and >= 1",
        ));
    }
    if d_train_days.is_empty() || d_train_days.iter().any(|d| !(*d > 0.0)) {
        return Err(SbmError::config(
            "d_train_days",
            "training lengths must be positive",
        ));
    }
    let mut sorted: Vec<usize> = orders.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut table = Vec::with_capacity(sorted.len() * d_train_days.len());
    for &d in d_train_days {
        let len = data.samples_per(d * 86_400.0);
        if len > data.len() {
            return Err(SbmError::TooShort {
                needed: len,
                available: data.len(),
            });
        }
        let window = data.slice_window(0, len)?;
        for &order in &sorted {
            let problem = build_regression(&window, order)?;
            let model = fit_least_squares(&problem)?;
            table.push(OrderCell {
                order,
                d_train_days: d,
                naic: naic(&problem, &model),
            });
        }
    }

    let mean_by_order: Vec<(usize, f64)> = sorted
        .iter()
        .map(|&o| {
            let vals: Vec<f64> = table
                .iter()
                .filter(|c| c.order == o)
                .map(|c| c.naic)
                .collect();
            (o, vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    let best = mean_by_order
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let band = PARSIMONY_TOLERANCE * best.abs();
    let chosen = mean_by_order
        .iter()
        .find(|(_, v)| *v - best <= band)
        .map(|(o, _)| *o)
        .unwrap_or(sorted[0]);

    Ok(OrderSelection {
        table,
        mean_by_order,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthplant::simulate_arx_scenario;
    use crate::synthplant::ArxScenario;

    #[test]
    fn single_candidate() {
        let sc = ArxScenario {
            days: 0.5,
            ..ArxScenario::default()
        };
        let frame = simulate_arx_scenario(&sc).unwrap().frame;
        let sel = select_order(&frame, &[3], &[0.25, 0.5]).unwrap();
        assert_eq!(sel.chosen, 3);
        assert_eq!(sel.table.len(), 2);
    }

    #[test]
    fn nearly_noise_free_second_order_picks_two() {
        let sc = ArxScenario {
            days: 1.0,
            order: 2,
            noise_std: 1e-4,
            ..ArxScenario::default()
        };
        let frame = simulate_arx_scenario(&sc).unwrap().frame;
        let sel = select_order(&frame, &[1, 2, 3, 4], &[0.5, 1.0]).unwrap();
        assert_eq!(sel.chosen, 2, "{:?}", sel.mean_by_order);
    }

    #[test]
    fn white_noise_output_picks_one() {
        let mut wins = 0;
        for seed in 0..20 {
            let sc = ArxScenario {
                days: 0.5,
                seed,
                white_output: true,
                ..ArxScenario::default()
            };
            let frame = simulate_arx_scenario(&sc).unwrap().frame;
            if select_order(&frame, &[1, 2, 3], &[0.5]).unwrap().chosen == 1 {
                wins += 1;
            }
        }
        assert!(wins > 10, "order 1 chosen for {wins} of 20 seeds");
    }

    #[test]
    fn too_short() {
        let sc = ArxScenario {
            days: 0.5,
            ..ArxScenario::default()
        };
        let frame = simulate_arx_scenario(&sc).unwrap().frame;
        assert!(matches!(
            select_order(&frame, &[1], &[2.0]),
            Err(SbmError::TooShort { .. })
        ));
    }
}
