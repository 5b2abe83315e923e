//! Zero-phase second-order Butterworth low-pass.
//!
//! The section is designed with the bilinear transform (cutoff prewarped)
//! and run forward then backward, so the overall magnitude response is
//! `|H|^2` and the phase is zero. Each pass starts from the steady state
//! that corresponds to its first input sample, which keeps constants exact
//! and the filter linear.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Result, SbmError};

/// Default cutoff, one cycle per hour.
pub const DEFAULT_CUTOFF_PER_HOUR: f64 = 1.0;

/// Biquad coefficients with `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn butterworth_lowpass(sample_interval_s: f64, cutoff_hz: f64) -> Result<Self> {
        let nyquist = 0.5 / sample_interval_s;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(SbmError::CutoffAboveNyquist {
                cutoff_hz,
                nyquist_hz: nyquist,
            });
        }
        let k = (PI * cutoff_hz * sample_interval_s).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Ok(Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
        })
    }

    /// Transposed direct form II, initialised at the steady state for `x[0]`.
    pub fn run(&self, x: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let Some(&x0) = x.first() else {
            return Vec::new();
        };
        let mut z2 = (b2 - a2) * x0;
        let mut z1 = (b1 - a1) * x0 + z2;
        let mut out = Vec::with_capacity(x.len());
        for &xi in x {
            let yi = b0 * xi + z1;
            z1 = b1 * xi - a1 * yi + z2;
            z2 = b2 * xi - a2 * yi;
            out.push(yi);
        }
        out
    }

    /// Magnitude of the single-pass frequency response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_interval_s: f64) -> f64 {
        let w = 2.0 * PI * freq_hz * sample_interval_s;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (
            1.0 + self.a[0] * c1 + self.a[1] * c2,
            self.a[0] * s1 + self.a[1] * s2,
        );
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

/// Zero-phase low-pass of `signal`; `cutoff_per_hour` is in cycles per hour.
pub fn lowpass_filter(
    signal: &[f64],
    sample_interval_s: f64,
    cutoff_per_hour: f64,
) -> Result<Vec<f64>> {
    let section = Biquad::butterworth_lowpass(sample_interval_s, cutoff_per_hour / 3600.0)?;
    let mut fwd = section.run(signal);
    fwd.reverse();
    let mut out = section.run(&fwd);
    out.reverse();
    Ok(out)
}
