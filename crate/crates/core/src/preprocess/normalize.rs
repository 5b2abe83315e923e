use serde::{Deserialize, Serialize};

use crate::dataio::{Channel, TimeSeriesFrame};
use crate::error::{Result, SbmError};

/// Per-channel z-score transform fitted on a training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub channels: Vec<String>,
    pub means: Vec<f64>,
    /// Sample standard deviations (n-1 denominator), all strictly positive.
    pub scales: Vec<f64>,
}

/// Mean and sample standard deviation of `values`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn fit_normalizer(frame: &TimeSeriesFrame, channels: &[&str]) -> Result<Normalizer> {
    let mut means = Vec::with_capacity(channels.len());
    let mut scales = Vec::with_capacity(channels.len());
    for &name in channels {
        let values = frame
            .channel(name)
            .map_err(|_| SbmError::UnknownChannel(name.to_string()))?;
        if values.len() < 2 {
            return Err(SbmError::TooShort {
                needed: 1,
                available: values.len(),
            });
        }
        let (mean, std) = mean_std(values);
        if !(std > 0.0) || std <= f64::EPSILON * mean.abs() {
            return Err(SbmError::ZeroVariance(name.to_string()));
        }
        means.push(mean);
        scales.push(std);
    }
    Ok(Normalizer {
        channels: channels.iter().map(|s| s.to_string()).collect(),
        means,
        scales,
    })
}

impl Normalizer {
    fn index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| SbmError::UnknownChannel(name.to_string()))
    }

    pub fn normalize(&self, name: &str, values: &[f64]) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        let (m, s) = (self.means[i], self.scales[i]);
        Ok(values.iter().map(|v| (v - m) / s).collect())
    }

    pub fn denormalize(&self, name: &str, values: &[f64]) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        let (m, s) = (self.means[i], self.scales[i]);
        Ok(values.iter().map(|v| v * s + m).collect())
    }

    /// Normalizes every fitted channel of `frame`; other channels pass through.
    pub fn apply(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        let channels = frame
            .channels()
            .iter()
            .map(|c| match self.index(&c.name) {
                Ok(_) => self
                    .normalize(&c.name, &c.values)
                    .map(|v| Channel::new(c.name.clone(), v)),
                Err(_) => Ok(c.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        frame.with_channels(channels)
    }
}
