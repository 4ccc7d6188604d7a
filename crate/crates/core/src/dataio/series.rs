use std::io::Write;
use std::path::Path;

use crate::error::{FuzzyError, Result};

/// Header expected on event CSV files.
pub const EVENT_HEADER: [&str; 5] = ["timestamp", "rain1", "rain2", "rain3", "head"];

/// One storm event sampled on a uniform grid: three rain gauges (mm per
/// interval) and the outlet pressure head (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    interval: f64,
    timestamps: Vec<f64>,
    rain: [Vec<f64>; 3],
    head: Vec<f64>,
}

impl EventSeries {
    pub fn new(
        interval: f64,
        timestamps: Vec<f64>,
        rain: [Vec<f64>; 3],
        head: Vec<f64>,
    ) -> Result<Self> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(FuzzyError::invalid("interval", "must be positive"));
        }
        let n = timestamps.len();
        for (name, len) in [
            ("rain1", rain[0].len()),
            ("rain2", rain[1].len()),
            ("rain3", rain[2].len()),
            ("head", head.len()),
        ] {
            if len != n {
                return Err(FuzzyError::DegenerateSeries(format!(
                    "channel {name} has {len} values, expected {n}"
                )));
            }
        }
        let channels = [
            ("timestamp", &timestamps),
            ("rain1", &rain[0]),
            ("rain2", &rain[1]),
            ("rain3", &rain[2]),
            ("head", &head),
        ];
        for (name, values) in channels {
            if let Some(k) = values.iter().position(|v| !v.is_finite()) {
                return Err(FuzzyError::DegenerateSeries(format!(
                    "non-finite {name} at row {k}"
                )));
            }
        }
        for (j, channel) in rain.iter().enumerate() {
            if let Some(k) = channel.iter().position(|&v| v < 0.0) {
                return Err(FuzzyError::DegenerateSeries(format!(
                    "negative rainfall in rain{} at row {k}",
                    j + 1
                )));
            }
        }
        if let Some(k) = first_spacing_violation(&timestamps, interval) {
            return Err(FuzzyError::DegenerateSeries(format!(
                "timestamp spacing at row {k} is {} s, expected {interval} s",
                timestamps[k] - timestamps[k - 1]
            )));
        }
        Ok(Self {
            interval,
            timestamps,
            rain,
            head,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn rain(&self, station: usize) -> &[f64] {
        &self.rain[station]
    }

    pub fn rain_channels(&self) -> &[Vec<f64>; 3] {
        &self.rain
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    /// Sum of the three rain channels at every step.
    pub fn total_rain(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.rain.iter().map(|c| c[k]).sum())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(EVENT_HEADER)?;
        for k in 0..self.len() {
            w.write_record([
                self.timestamps[k].to_string(),
                self.rain[0][k].to_string(),
                self.rain[1][k].to_string(),
                self.rain[2][k].to_string(),
                self.head[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn first_spacing_violation(timestamps: &[f64], interval: f64) -> Option<usize> {
    let tol = 1e-9 * interval;
    (1..timestamps.len()).find(|&k| ((timestamps[k] - timestamps[k - 1]) - interval).abs() > tol)
}

/// Reads an event CSV with header `timestamp,rain1,rain2,rain3,head`.
/// Rows are 0-based sample indices in error messages.
pub fn load_event_csv(path: impl AsRef<Path>, interval: f64) -> Result<EventSeries> {
    let path = path.as_ref();
    let data_err = |reason: String| FuzzyError::Data {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != EVENT_HEADER {
        return Err(data_err(format!(
            "expected header `{}`, found `{}`",
            EVENT_HEADER.join(","),
            header.join(",")
        )));
    }

    let mut columns: [Vec<f64>; 5] = Default::default();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_err(format!("row {k}: {e}")))?;
        for (j, name) in EVENT_HEADER.iter().enumerate() {
            let field = record.get(j).unwrap_or("");
            if field.is_empty() {
                return Err(data_err(format!("row {k}: missing value in column {name}")));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| data_err(format!("row {k}: cannot parse {name} value `{field}`")))?;
            columns[j].push(v);
        }
    }
    let [timestamps, r1, r2, r3, head] = columns;
    EventSeries::new(interval, timestamps, [r1, r2, r3], head).map_err(|e| match e {
        FuzzyError::DegenerateSeries(reason) => data_err(reason),
        other => other,
    })
}
