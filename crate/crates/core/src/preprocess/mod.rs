//! Preprocessing chain that turns a raw plant record into model-ready data.
//!
//! The six correlated setpoints are reduced to two principal-component
//! scores; those scores, the independent setpoint and the disturbance become
//! the four model inputs. Everything is z-scored with training-window
//! statistics, the inputs are low-pass filtered and the output is
//! Savitzky-Golay smoothed.

pub mod lowpass;
pub mod normalize;
pub mod pca;
pub mod savgol;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use lowpass::{lowpass_filter, Biquad, DEFAULT_CUTOFF_PER_HOUR};
pub use normalize::{fit_normalizer, mean_std, Normalizer};
pub use pca::{pca_fit, PcaModel};
pub use savgol::{savgol_coefficients, savgol_filter, savgol_weights_at, SavGolSpec};

use crate::dataio::{Channel, ChannelRoleMap, TimeSeriesFrame};
use crate::error::{Result, SbmError};

/// Channel names of a model-ready frame, inputs first, output last.
pub const SBM_CHANNELS: [&str; 5] = ["phi1", "phi2", "sp1", "temp", "power"];

/// Number of principal components kept from the correlated group.
pub const PCA_COMPONENTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub savgol: SavGolSpec,
    /// Low-pass cutoff for the inputs, cycles per hour.
    pub cutoff_per_hour: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            savgol: SavGolSpec::default(),
            cutoff_per_hour: DEFAULT_CUTOFF_PER_HOUR,
        }
    }
}

/// Projects and relabels the raw record into the five model channels,
/// before any scaling or filtering.
fn assemble(
    frame: &TimeSeriesFrame,
    roles: &ChannelRoleMap,
    pca: &PcaModel,
) -> Result<TimeSeriesFrame> {
    roles.validate_against(frame)?;
    if pca.components() < PCA_COMPONENTS {
        return Err(SbmError::DimensionMismatch {
            expected: PCA_COMPONENTS,
            actual: pca.components(),
        });
    }
    let mut scores = pca.project_frame(frame)?;
    scores.truncate(PCA_COMPONENTS);
    let mut it = scores.into_iter();
    let channels = vec![
        Channel::new(SBM_CHANNELS[0], it.next().unwrap()),
        Channel::new(SBM_CHANNELS[1], it.next().unwrap()),
        Channel::new(
            SBM_CHANNELS[2],
            frame.channel(&roles.independent_setpoint)?.to_vec(),
        ),
        Channel::new(SBM_CHANNELS[3], frame.channel(&roles.disturbance)?.to_vec()),
        Channel::new(SBM_CHANNELS[4], frame.channel(&roles.output)?.to_vec()),
    ];
    frame.with_channels(channels)
}

/// Builds the five-channel model frame `(phi1, phi2, sp1, temp, power)`.
///
/// Inputs are normalized then low-pass filtered; the output is normalized
/// then Savitzky-Golay filtered. The excluded setpoint is dropped.
pub fn build_sbm_dataset(
    frame: &TimeSeriesFrame,
    roles: &ChannelRoleMap,
    pca: &PcaModel,
    norm: &Normalizer,
    filters: &FilterSpec,
) -> Result<TimeSeriesFrame> {
    let raw = assemble(frame, roles, pca)?;
    let dt = raw.sample_interval_s();
    let mut channels = Vec::with_capacity(SBM_CHANNELS.len());
    for (i, name) in SBM_CHANNELS.iter().enumerate() {
        let z = norm.normalize(name, raw.channel_at(i))?;
        let filtered = if i + 1 < SBM_CHANNELS.len() {
            lowpass_filter(&z, dt, filters.cutoff_per_hour)?
        } else {
            savgol_filter(&z, filters.savgol)?
        };
        channels.push(Channel::new(*name, filtered));
    }
    raw.with_channels(channels)
}

/// Fitted preprocessing state, reusable on any frame with the same roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmPreprocessor {
    pub roles: ChannelRoleMap,
    pub pca: PcaModel,
    pub normalizer: Normalizer,
    pub filters: FilterSpec,
}

impl SbmPreprocessor {
    /// Fits PCA and normalization statistics on `train`.
    pub fn fit(
        train: &TimeSeriesFrame,
        roles: &ChannelRoleMap,
        filters: FilterSpec,
    ) -> Result<Self> {
        roles.validate_against(train)?;
        filters.savgol.validate()?;
        let group: Vec<&str> = roles
            .correlated_setpoints
            .iter()
            .map(String::as_str)
            .collect();
        let pca = pca_fit(train, &group, PCA_COMPONENTS)?;
        let raw = assemble(train, roles, &pca)?;
        let normalizer = fit_normalizer(&raw, &SBM_CHANNELS)?;
        Ok(Self {
            roles: roles.clone(),
            pca,
            normalizer,
            filters,
        })
    }

    pub fn apply(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        build_sbm_dataset(
            frame,
            &self.roles,
            &self.pca,
            &self.normalizer,
            &self.filters,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::read_json(path)
    }
}
