//! Scale-bridging models for demand-response scheduling.
//!
//! Low-order ARX models of a process output (compressor power) are
//! identified from historical setpoint and disturbance records, then kept
//! accurate online by a Kalman filter over the model coefficients.
//!
//! - [`dataio`]: uniformly sampled multichannel frames, CSV I/O, role maps.
//! - [`preprocess`]: normalization, PCA, low-pass and Savitzky-Golay filters.
//! - [`arx`]: regression, least-squares fitting, order selection, simulation.
//! - [`kalman`]: random-walk parameter filter and covariance monitoring.
//! - [`eval`]: moving-horizon MSE and the static-vs-adaptive experiment.
//! - [`synthplant`]: seeded synthetic plant records with ground truth.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod arx;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod kalman;
pub mod preprocess;
pub mod rng;
pub mod synthplant;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use arx::ArxModel;
pub use dataio::{ChannelRoleMap, TimeSeriesFrame};
pub use error::{Result, SbmError};
pub use kalman::{FilterTuning, ParameterFilter};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SbmError + '_ {
    move |source| SbmError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `value` as pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let r = BufReader::new(File::open(path).map_err(io_err(path))?);
    Ok(serde_json::from_reader(r)?)
}
