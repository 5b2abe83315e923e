//! Principal components of a correlated channel group.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataio::TimeSeriesFrame;
use crate::error::{Result, SbmError};

/// Relative eigenvalue threshold below which a component counts as absent.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub channels: Vec<String>,
    pub means: Vec<f64>,
    /// One orthonormal loading vector per retained component.
    pub loadings: Vec<Vec<f64>>,
    /// Explained-variance ratio of every component, retained or not.
    pub evr: Vec<f64>,
}

pub fn pca_fit(frame: &TimeSeriesFrame, channels: &[&str], k: usize) -> Result<PcaModel> {
    let dim = channels.len();
    if k == 0 || k > dim {
        return Err(SbmError::InvalidSpec(format!(
            "component count {k} must be in 1..={dim}"
        )));
    }
    let n = frame.len();
    if n < dim + 1 {
        return Err(SbmError::TooShort {
            needed: dim,
            available: n,
        });
    }
    let cols = channels
        .iter()
        .map(|c| frame.channel(c))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let s: f64 = cols[i]
                .iter()
                .zip(cols[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum();
            cov[(i, j)] = s / (n as f64 - 1.0);
            cov[(j, i)] = cov[(i, j)];
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let top = values[0];
    let positive = values
        .iter()
        .filter(|&&v| v > RANK_TOLERANCE * top && v > 0.0)
        .count();
    if positive < k {
        return Err(SbmError::RankDeficient(format!(
            "covariance has {positive} positive eigenvalues, {k} components requested"
        )));
    }

    let loadings = order[..k]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();

    Ok(PcaModel {
        channels: channels.iter().map(|s| s.to_string()).collect(),
        means,
        loadings,
        evr: values.iter().map(|v| v / total).collect(),
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn components(&self) -> usize {
        self.loadings.len()
    }

    /// Scores `loadings^T (x - means)` for one row.
    pub fn project_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(SbmError::DimensionMismatch {
                expected: self.dim(),
                actual: row.len(),
            });
        }
        Ok(self
            .loadings
            .iter()
            .map(|l| {
                l.iter()
                    .zip(row.iter().zip(&self.means))
                    .map(|(w, (x, m))| w * (x - m))
                    .sum()
            })
            .collect())
    }

    /// Score sequences, one per component, for the model's channels in `frame`.
    pub fn project_frame(&self, frame: &TimeSeriesFrame) -> Result<Vec<Vec<f64>>> {
        let cols = self
            .channels
            .iter()
            .map(|c| frame.channel(c))
            .collect::<Result<Vec<_>>>()?;
        let mut scores = vec![Vec::with_capacity(frame.len()); self.components()];
        let mut row = vec![0.0; self.dim()];
        for t in 0..frame.len() {
            for (r, c) in row.iter_mut().zip(&cols) {
                *r = c[t];
            }
            for (s, v) in scores.iter_mut().zip(self.project_row(&row)?) {
                s.push(v);
            }
        }
        Ok(scores)
    }

    /// Maps scores back to channel space.
    pub fn reconstruct_row(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.components() {
            return Err(SbmError::DimensionMismatch {
                expected: self.components(),
                actual: scores.len(),
            });
        }
        let mut x = DVector::from_column_slice(&self.means);
        for (s, l) in scores.iter().zip(&self.loadings) {
            x += DVector::from_column_slice(l) * *s;
        }
        Ok(x.iter().copied().collect())
    }
}
