//! Uniformly sampled multichannel time series and their CSV form.
//!
//! The CSV layout is one header row, first column `t`, then one column per
//! channel. The `t` column holds either ISO-8601 timestamps or plain sample
//! indices; with indices the nominal interval comes from [`CsvOptions`].

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbmError};

/// Relative tolerance on the spacing between consecutive timestamps.
pub const SAMPLING_TOLERANCE: f64 = 0.01;

/// Default sampling interval, one minute.
pub const DEFAULT_INTERVAL_S: f64 = 60.0;

const ISO_FORMATS: [&str; 3] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
];

/// Time of the first sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeOrigin {
    /// Sample index of the first row.
    Index(i64),
    /// Wall-clock timestamp of the first row (UTC, no zone).
    Instant(NaiveDateTime),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// A validated, immutable multichannel record on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    start: TimeOrigin,
    interval_s: f64,
    channels: Vec<Channel>,
}

impl TimeSeriesFrame {
    /// Builds a frame, checking equal lengths, unique names, a positive
    /// interval and finite values.
    pub fn new(start: TimeOrigin, interval_s: f64, channels: Vec<Channel>) -> Result<Self> {
        if !(interval_s > 0.0 && interval_s.is_finite()) {
            return Err(SbmError::InvalidFrame(format!(
                "sample interval must be positive, got {interval_s}"
            )));
        }
        let Some(first) = channels.first() else {
            return Err(SbmError::InvalidFrame("frame has no channels".into()));
        };
        let len = first.values.len();
        if len == 0 {
            return Err(SbmError::EmptyFile);
        }
        let mut seen = HashSet::new();
        for ch in &channels {
            if !seen.insert(ch.name.as_str()) {
                return Err(SbmError::DuplicateChannel(ch.name.clone()));
            }
            if ch.values.len() != len {
                return Err(SbmError::InvalidFrame(format!(
                    "channel `{}` has {} samples, expected {len}",
                    ch.name,
                    ch.values.len()
                )));
            }
            if let Some(row) = ch.values.iter().position(|v| !v.is_finite()) {
                return Err(SbmError::NonFiniteValue {
                    row: row + 1,
                    channel: ch.name.clone(),
                });
            }
        }
        Ok(Self {
            start,
            interval_s,
            channels,
        })
    }

    /// Convenience constructor for index-based frames.
    pub fn from_columns<S: Into<String>>(
        interval_s: f64,
        columns: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self> {
        let channels = columns
            .into_iter()
            .map(|(n, v)| Channel::new(n, v))
            .collect();
        Self::new(TimeOrigin::Index(0), interval_s, channels)
    }

    pub fn len(&self) -> usize {
        self.channels[0].values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> TimeOrigin {
        self.start
    }

    pub fn sample_interval_s(&self) -> f64 {
        self.interval_s
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| SbmError::MissingChannel(name.to_string()))
    }

    pub fn channel_at(&self, idx: usize) -> &[f64] {
        &self.channels[idx].values
    }

    /// Number of samples spanning `seconds` at this frame's interval.
    pub fn samples_per(&self, seconds: f64) -> usize {
        (seconds / self.interval_s).round() as usize
    }

    /// Returns a sub-window; the start time advances by `start` intervals.
    pub fn slice_window(&self, start: usize, length: usize) -> Result<Self> {
        let end = start.checked_add(length);
        match end {
            Some(end) if length > 0 && end <= self.len() => {
                let channels = self
                    .channels
                    .iter()
                    .map(|c| Channel::new(c.name.clone(), c.values[start..end].to_vec()))
                    .collect();
                Ok(Self {
                    start: self.advance(start),
                    interval_s: self.interval_s,
                    channels,
                })
            }
            _ => Err(SbmError::OutOfRange {
                start,
                length,
                available: self.len(),
            }),
        }
    }

    /// A new frame with the same time axis and the given channels.
    pub fn with_channels(&self, channels: Vec<Channel>) -> Result<Self> {
        Self::new(self.start, self.interval_s, channels)
    }

    /// Keeps only the named channels, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let channels = names
            .iter()
            .map(|n| self.channel(n).map(|v| Channel::new(*n, v.to_vec())))
            .collect::<Result<Vec<_>>>()?;
        self.with_channels(channels)
    }

    fn advance(&self, samples: usize) -> TimeOrigin {
        match self.start {
            TimeOrigin::Index(i) => TimeOrigin::Index(i + samples as i64),
            TimeOrigin::Instant(t) => {
                let nanos = (self.interval_s * 1e9 * samples as f64).round() as i64;
                TimeOrigin::Instant(t + TimeDelta::nanoseconds(nanos))
            }
        }
    }

    fn time_label(&self, row: usize) -> String {
        match self.advance(row) {
            TimeOrigin::Index(i) => i.to_string(),
            TimeOrigin::Instant(t) => t.format("%Y-%m-%dT%H:%M:%S%.f").to_string(),
        }
    }
}

/// Assignment of frame channels to the roles of the process model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRoleMap {
    /// Modelled output (compressor power).
    pub output: String,
    /// The strongly correlated setpoint group replaced by principal components.
    pub correlated_setpoints: Vec<String>,
    /// Setpoint used directly as a model input.
    pub independent_setpoint: String,
    /// Setpoint dropped from the model.
    pub excluded_setpoint: String,
    /// Measured disturbance (ambient temperature).
    pub disturbance: String,
}

impl ChannelRoleMap {
    pub const CORRELATED_COUNT: usize = 6;

    fn all_names(&self) -> Vec<&str> {
        let mut v = vec![self.output.as_str()];
        v.extend(self.correlated_setpoints.iter().map(String::as_str));
        v.push(&self.independent_setpoint);
        v.push(&self.excluded_setpoint);
        v.push(&self.disturbance);
        v
    }

    /// Checks the map's own shape (group size, disjoint names).
    pub fn validate(&self) -> Result<()> {
        if self.correlated_setpoints.len() != Self::CORRELATED_COUNT {
            return Err(SbmError::InvalidRoles(format!(
                "expected {} correlated setpoints, got {}",
                Self::CORRELATED_COUNT,
                self.correlated_setpoints.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in self.all_names() {
            if !seen.insert(n) {
                return Err(SbmError::InvalidRoles(format!(
                    "channel `{n}` is assigned to more than one role"
                )));
            }
        }
        Ok(())
    }

    /// Checks the map and that every referenced channel exists in `frame`.
    pub fn validate_against(&self, frame: &TimeSeriesFrame) -> Result<()> {
        self.validate()?;
        for n in self.all_names() {
            frame.channel(n)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    /// Nominal interval in seconds. Required meaning for index columns
    /// (defaults to one minute); for timestamps it defaults to the first step.
    pub nominal_interval_s: Option<f64>,
}

pub fn load_csv(path: impl AsRef<Path>, roles: Option<&ChannelRoleMap>) -> Result<TimeSeriesFrame> {
    load_csv_with(path, roles, CsvOptions::default())
}

pub fn load_csv_with(
    path: impl AsRef<Path>,
    roles: Option<&ChannelRoleMap>,
    opts: CsvOptions,
) -> Result<TimeSeriesFrame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| SbmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, roles, opts)
}

enum Stamp {
    Index(f64),
    Instant(NaiveDateTime),
}

fn parse_stamp(raw: &str) -> Option<Stamp> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(Stamp::Index(v));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(Stamp::Instant(dt.naive_utc()));
    }
    ISO_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(Stamp::Instant)
}

/// Reads a frame from any CSV source.
pub fn read_csv<R: Read>(
    reader: R,
    roles: Option<&ChannelRoleMap>,
    opts: CsvOptions,
) -> Result<TimeSeriesFrame> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(SbmError::EmptyFile);
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut stamps = Vec::new();

    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != headers.len() {
            return Err(SbmError::Parse {
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let stamp = parse_stamp(&rec[0]).ok_or_else(|| SbmError::Parse {
            row,
            column: headers[0].to_string(),
            message: format!("unrecognised timestamp `{}`", &rec[0]),
        })?;
        stamps.push(stamp);
        for (j, col) in columns.iter_mut().enumerate() {
            let cell = &rec[j + 1];
            let value = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|e| SbmError::Parse {
                    row,
                    column: names[j].clone(),
                    message: e.to_string(),
                })?
            };
            if !value.is_finite() {
                return Err(SbmError::NonFiniteValue {
                    row,
                    channel: names[j].clone(),
                });
            }
            col.push(value);
        }
    }
    if stamps.is_empty() {
        return Err(SbmError::EmptyFile);
    }

    let (start, interval_s) = check_uniform(&stamps, opts)?;
    let channels = names
        .into_iter()
        .zip(columns)
        .map(|(n, v)| Channel::new(n, v))
        .collect();
    let frame = TimeSeriesFrame::new(start, interval_s, channels)?;
    if let Some(r) = roles {
        r.validate_against(&frame)?;
    }
    Ok(frame)
}

fn check_uniform(stamps: &[Stamp], opts: CsvOptions) -> Result<(TimeOrigin, f64)> {
    // Index columns are measured in samples; timestamps in seconds.
    let (start, offsets, unit_step, interval_s) = match &stamps[0] {
        Stamp::Index(i0) => {
            let mut offs = Vec::with_capacity(stamps.len());
            for (row, s) in stamps.iter().enumerate() {
                match s {
                    Stamp::Index(v) => offs.push(v - i0),
                    Stamp::Instant(_) => {
                        return Err(SbmError::Parse {
                            row: row + 1,
                            column: "t".into(),
                            message: "mixed index and timestamp values".into(),
                        })
                    }
                }
            }
            let interval = opts.nominal_interval_s.unwrap_or(DEFAULT_INTERVAL_S);
            (TimeOrigin::Index(i0.round() as i64), offs, 1.0, interval)
        }
        Stamp::Instant(t0) => {
            let mut offs = Vec::with_capacity(stamps.len());
            for (row, s) in stamps.iter().enumerate() {
                match s {
                    Stamp::Instant(t) => {
                        offs.push((*t - *t0).num_nanoseconds().unwrap_or(i64::MAX) as f64 / 1e9)
                    }
                    Stamp::Index(_) => {
                        return Err(SbmError::Parse {
                            row: row + 1,
                            column: "t".into(),
                            message: "mixed index and timestamp values".into(),
                        })
                    }
                }
            }
            let interval = match opts.nominal_interval_s {
                Some(v) => v,
                None if offs.len() > 1 => offs[1],
                None => DEFAULT_INTERVAL_S,
            };
            (TimeOrigin::Instant(*t0), offs, interval, interval)
        }
    };
    if !(unit_step > 0.0) {
        return Err(SbmError::NonUniformSampling {
            row: 2,
            step_s: unit_step,
            nominal_s: interval_s,
        });
    }
    for (k, w) in offsets.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - unit_step).abs() > SAMPLING_TOLERANCE * unit_step {
            return Err(SbmError::NonUniformSampling {
                row: k + 2,
                step_s: step * interval_s / unit_step,
                nominal_s: interval_s,
            });
        }
    }
    Ok((start, interval_s))
}

/// Writes the frame in the `t,<channels...>` layout. Values use the shortest
/// decimal form that parses back to the identical `f64`.
pub fn write_csv_to<W: Write>(frame: &TimeSeriesFrame, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend(frame.channels.iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..frame.len() {
        row.clear();
        row.push(frame.time_label(i));
        row.extend(frame.channels.iter().map(|c| c.values[i].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|source| SbmError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn write_csv(frame: &TimeSeriesFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| SbmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv_to(frame, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<TimeSeriesFrame> {
        read_csv(text.as_bytes(), None, CsvOptions::default())
    }

    #[test]
    fn loads_three_rows_at_sixty_seconds() {
        let f = read(
            "t,y,u\n2020-01-01T00:00:00,1,2\n2020-01-01T00:01:00,3,4\n2020-01-01T00:02:00,5,6\n",
        )
        .unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.sample_interval_s(), 60.0);
        assert_eq!(f.channel("u").unwrap(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn index_column_uses_nominal_interval() {
        let f = read("t,y\n0,1\n1,2\n2,3\n").unwrap();
        assert_eq!(f.sample_interval_s(), DEFAULT_INTERVAL_S);
        assert_eq!(f.start(), TimeOrigin::Index(0));
    }

    #[test]
    fn two_minute_gap_is_rejected() {
        let err =
            read("t,y\n2020-01-01T00:00:00,1\n2020-01-01T00:01:00,1\n2020-01-01T00:03:00,1\n")
                .unwrap_err();
        assert!(
            matches!(err, SbmError::NonUniformSampling { row: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn gap_detected_against_explicit_nominal() {
        let opts = CsvOptions {
            nominal_interval_s: Some(60.0),
        };
        let err = read_csv(
            "t,y\n2020-01-01T00:00:00,1\n2020-01-01T00:02:00,1\n".as_bytes(),
            None,
            opts,
        )
        .unwrap_err();
        assert!(matches!(err, SbmError::NonUniformSampling { .. }));
    }

    #[test]
    fn nan_reports_row_and_channel() {
        let err = read("t,y,u\n0,1,1\n1,1,1\n2,1,1\n3,1,1\n4,NaN,1\n").unwrap_err();
        match err {
            SbmError::NonFiniteValue { row, channel } => {
                assert_eq!(row, 5);
                assert_eq!(channel, "y");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_file() {
        assert!(matches!(read("t,y\n").unwrap_err(), SbmError::EmptyFile));
        assert!(matches!(read("t\n").unwrap_err(), SbmError::EmptyFile));
    }

    #[test]
    fn missing_role_channel() {
        let roles = ChannelRoleMap {
            output: "y".into(),
            correlated_setpoints: (1..=6).map(|i| format!("c{i}")).collect(),
            independent_setpoint: "s".into(),
            excluded_setpoint: "x".into(),
            disturbance: "T".into(),
        };
        let err =
            read_csv("t,y\n0,1\n".as_bytes(), Some(&roles), CsvOptions::default()).unwrap_err();
        assert!(matches!(err, SbmError::MissingChannel(_)));
    }

    #[test]
    fn role_map_shape_checks() {
        let mut roles = ChannelRoleMap {
            output: "y".into(),
            correlated_setpoints: (1..=6).map(|i| format!("c{i}")).collect(),
            independent_setpoint: "s".into(),
            excluded_setpoint: "x".into(),
            disturbance: "T".into(),
        };
        roles.validate().unwrap();
        roles.excluded_setpoint = "c1".into();
        assert!(matches!(roles.validate(), Err(SbmError::InvalidRoles(_))));
        roles.excluded_setpoint = "x".into();
        roles.correlated_setpoints.pop();
        assert!(matches!(roles.validate(), Err(SbmError::InvalidRoles(_))));
    }

    #[test]
    fn slice_identity_and_bounds() {
        let f = TimeSeriesFrame::from_columns(60.0, [("y", (0..100).map(f64::from).collect())])
            .unwrap();
        assert_eq!(f.slice_window(0, 100).unwrap(), f);
        assert!(matches!(
            f.slice_window(90, 20),
            Err(SbmError::OutOfRange { .. })
        ));
        let s = f.slice_window(10, 5).unwrap();
        assert_eq!(s.start(), TimeOrigin::Index(10));
        assert_eq!(s.channel("y").unwrap()[0], 10.0);
    }

    #[test]
    fn seven_day_window_length() {
        let n = 8 * 1440;
        let f = TimeSeriesFrame::from_columns(60.0, [("y", vec![0.0; n])]).unwrap();
        let w = f.slice_window(0, f.samples_per(7.0 * 86400.0)).unwrap();
        assert_eq!(w.len(), 10080);
    }

    #[test]
    fn slicing_advances_timestamp() {
        let t0 = NaiveDateTime::parse_from_str("2020-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
        let f = TimeSeriesFrame::new(
            TimeOrigin::Instant(t0),
            60.0,
            vec![Channel::new("y", vec![0.0; 10])],
        )
        .unwrap();
        let s = f.slice_window(5, 2).unwrap();
        assert_eq!(s.start(), TimeOrigin::Instant(t0 + TimeDelta::minutes(5)));
    }

    #[test]
    fn frame_invariants() {
        assert!(TimeSeriesFrame::from_columns(0.0, [("y", vec![1.0])]).is_err());
        assert!(matches!(
            TimeSeriesFrame::from_columns(60.0, [("y", vec![1.0]), ("y", vec![2.0])]),
            Err(SbmError::DuplicateChannel(_))
        ));
        assert!(
            TimeSeriesFrame::from_columns(60.0, [("y", vec![1.0]), ("u", vec![1.0, 2.0])]).is_err()
        );
        assert!(matches!(
            TimeSeriesFrame::from_columns(60.0, [("y", vec![1.0, f64::INFINITY])]),
            Err(SbmError::NonFiniteValue { row: 2, .. })
        ));
    }
}
