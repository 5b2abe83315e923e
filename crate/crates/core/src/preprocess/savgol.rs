//! Savitzky-Golay smoothing with polynomial end fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavGolSpec {
    /// Odd window length in samples.
    pub window: usize,
    pub poly_order: usize,
}

impl Default for SavGolSpec {
    fn default() -> Self {
        Self {
            window: 15,
            poly_order: 2,
        }
    }
}

impl SavGolSpec {
    pub fn new(window: usize, poly_order: usize) -> Result<Self> {
        let spec = Self { window, poly_order };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(SbmError::InvalidSpec(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.poly_order >= self.window {
            return Err(SbmError::InvalidSpec(format!(
                "poly_order {} must be below window {}",
                self.poly_order, self.window
            )));
        }
        Ok(())
    }

    fn half(&self) -> usize {
        self.window / 2
    }
}

/// Weights that evaluate the window's least-squares polynomial at
/// `offset` samples from the window centre.
///
/// Positions are scaled to [-1, 1] before building the Vandermonde matrix,
/// then the fit is solved through its QR factors.
pub fn savgol_weights_at(spec: SavGolSpec, offset: isize) -> Result<Vec<f64>> {
    spec.validate()?;
    let m = spec.half() as f64;
    let cols = spec.poly_order + 1;
    let vander = DMatrix::from_fn(spec.window, cols, |r, c| {
        ((r as f64 - m) / m).powi(c as i32)
    });
    let qr = vander.qr();
    let r = qr.r();
    let q = qr.q();
    let x = offset as f64 / m;
    let basis = DVector::from_fn(cols, |c, _| x.powi(c as i32));
    let z = r
        .transpose()
        .solve_lower_triangular(&basis)
        .ok_or_else(|| SbmError::InvalidSpec("singular Vandermonde factor".into()))?;
    Ok((q * z).iter().copied().collect())
}

/// Central-point convolution weights.
pub fn savgol_coefficients(spec: SavGolSpec) -> Result<Vec<f64>> {
    savgol_weights_at(spec, 0)
}

pub fn savgol_filter(signal: &[f64], spec: SavGolSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = signal.len();
    let w = spec.window;
    if n < w {
        return Err(SbmError::SignalTooShort { len: n, window: w });
    }
    let h = spec.half();
    let centre = savgol_coefficients(spec)?;
    let dot = |weights: &[f64], start: usize| -> f64 {
        weights
            .iter()
            .zip(&signal[start..start + w])
            .map(|(a, b)| a * b)
            .sum()
    };

    let mut out = vec![0.0; n];
    for i in h..n - h {
        out[i] = dot(&centre, i - h);
    }
    for i in 0..h {
        let head = savgol_weights_at(spec, i as isize - h as isize)?;
        out[i] = dot(&head, 0);
        let tail = savgol_weights_at(spec, h as isize - i as isize)?;
        out[n - 1 - i] = dot(&tail, n - w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn five_point_quadratic() {
        let c = savgol_coefficients(SavGolSpec::new(5, 2).unwrap()).unwrap();
        let expect = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn three_point_quadratic_interpolates() {
        let c = savgol_coefficients(SavGolSpec::new(3, 2).unwrap()).unwrap();
        for (a, b) in c.iter().zip([0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for (w, p) in [(5, 0), (7, 3), (15, 2), (21, 4), (15, 14)] {
            let spec = SavGolSpec::new(w, p).unwrap();
            for off in -(w as isize / 2)..=(w as isize / 2) {
                let s: f64 = savgol_weights_at(spec, off).unwrap().iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "w={w} p={p} off={off}: {s}");
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(SavGolSpec::new(4, 2).is_err());
        assert!(SavGolSpec::new(1, 0).is_err());
        assert!(SavGolSpec::new(5, 5).is_err());
    }

    #[test]
    fn short_signal() {
        assert!(matches!(
            savgol_filter(&[1.0; 14], SavGolSpec::default()),
            Err(SbmError::SignalTooShort {
                len: 14,
                window: 15
            })
        ));
    }

    #[test]
    fn constant_and_quadratic_reproduced() {
        let spec = SavGolSpec::default();
        let c = vec![-2.5; 40];
        for v in savgol_filter(&c, spec).unwrap() {
            assert!((v + 2.5).abs() < 1e-12);
        }
        let q: Vec<f64> = (0..60)
            .map(|t| 0.3 * (t * t) as f64 - 2.0 * t as f64 + 7.0)
            .collect();
        for (a, b) in savgol_filter(&q, spec).unwrap().iter().zip(&q) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn full_order_is_identity(
            half in 1usize..6,
            xs in proptest::collection::vec(-100.0f64..100.0, 13..40),
        ) {
            let w = 2 * half + 1;
            let spec = SavGolSpec::new(w, w - 1).unwrap();
            let out = savgol_filter(&xs, spec).unwrap();
            for (a, b) in out.iter().zip(&xs) {
                prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
            }
        }
    }
}
