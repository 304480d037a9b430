//! Wind-farm time series: schema, CSV ingestion, normalisation, model
//! input windows and a synthetic farm generator.

mod curve;
mod norm;
mod stats;
mod synth;
mod window;

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};

pub use curve::{power_curve, TurbineCurve};
pub use norm::{apply_norm, denorm_power, denorm_speed, fit_norm, Channel, NormStats, NormalizedSeries};
pub use stats::pearson;
pub use synth::{synth_windfarm, SynthParams};
pub use window::{build_windows, ChannelView, InputWindow, WindowSet, DEFAULT_HISTORY, DEFAULT_HORIZON};

/// Grid spacing of every series.
pub const RESOLUTION_MINUTES: i64 = 15;
/// Samples per day at 15-minute resolution.
pub const STEPS_PER_DAY: usize = 96;

/// Exact CSV header.
pub const CSV_HEADER: &str =
    "timestamp,power_mw,speed_ms,nwp_speed_ms,nwp_dir_deg,nwp_humidity_pct,nwp_pressure_hpa,nwp_temp_c";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: missing column `{column}`")]
    MissingColumn { row: usize, column: &'static str },
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("row {row}: timestamp {found} breaks the 15-minute grid (previous {previous})")]
    Gap { row: usize, previous: String, found: String },
    #[error("row {row}: {column} = {value} outside [{min}, {max}]")]
    Range {
        row: usize,
        column: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("empty series")]
    Empty,
    #[error("channel length mismatch: {0}")]
    Length(String),
    #[error("invalid turbine curve: {0}")]
    Curve(String),
    #[error("negative wind speed {0}")]
    NegativeSpeed(f64),
    #[error("empty normalisation range")]
    EmptyRange,
    #[error("range {start}..{end} is too short for any window (need {needed} samples, series has {len})")]
    TooShort {
        start: usize,
        end: usize,
        needed: usize,
        len: usize,
    },
    #[error("invalid window geometry: {0}")]
    Geometry(String),
    #[error("statistics: {0}")]
    Stats(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// The five numerical-weather-prediction channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NwpChannels {
    pub speed: Vec<f64>,
    pub direction: Vec<f64>,
    pub humidity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub temperature: Vec<f64>,
}

/// Aligned 15-minute series of one farm.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSeries {
    pub farm_id: String,
    pub capacity_mw: f64,
    pub timestamps: Vec<DateTime<Utc>>,
    pub power: Vec<f64>,
    pub speed: Vec<f64>,
    pub nwp: NwpChannels,
}

impl WindSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Checks every schema invariant; row numbers in errors are 1-based.
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.timestamps.len();
        let lens = [
            ("power", self.power.len()),
            ("speed", self.speed.len()),
            ("nwp_speed", self.nwp.speed.len()),
            ("nwp_dir", self.nwp.direction.len()),
            ("nwp_humidity", self.nwp.humidity.len()),
            ("nwp_pressure", self.nwp.pressure.len()),
            ("nwp_temp", self.nwp.temperature.len()),
        ];
        if let Some((name, len)) = lens.iter().find(|(_, l)| *l != n) {
            return Err(DataError::Length(format!("{name} has {len} values, timestamps {n}")));
        }
        let step = Duration::minutes(RESOLUTION_MINUTES);
        for i in 1..n {
            if self.timestamps[i] - self.timestamps[i - 1] != step {
                return Err(DataError::Gap {
                    row: i + 1,
                    previous: format_timestamp(&self.timestamps[i - 1]),
                    found: format_timestamp(&self.timestamps[i]),
                });
            }
        }
        for i in 0..n {
            check_range(i + 1, "power_mw", self.power[i], 0.0, self.capacity_mw)?;
            check_range(i + 1, "speed_ms", self.speed[i], 0.0, f64::INFINITY)?;
            check_range(i + 1, "nwp_speed_ms", self.nwp.speed[i], 0.0, f64::INFINITY)?;
            let d = self.nwp.direction[i];
            if !(0.0..360.0).contains(&d) {
                return Err(DataError::Range {
                    row: i + 1,
                    column: "nwp_dir_deg",
                    value: d,
                    min: 0.0,
                    max: 360.0,
                });
            }
        }
        Ok(())
    }

    /// Grid index of `ts`, if it lies on this series' grid.
    pub fn index_of(&self, ts: &DateTime<Utc>) -> Option<usize> {
        let first = self.timestamps.first()?;
        let mins = (*ts - *first).num_minutes();
        if mins < 0 || mins % RESOLUTION_MINUTES != 0 {
            return None;
        }
        let i = (mins / RESOLUTION_MINUTES) as usize;
        (i < self.len()).then_some(i)
    }
}

fn check_range(row: usize, column: &'static str, value: f64, min: f64, max: f64) -> Result<(), DataError> {
    if value.is_nan() || value < min || value > max {
        return Err(DataError::Range {
            row,
            column,
            value,
            min,
            max,
        });
    }
    Ok(())
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .ok()
        .map(|n| n.and_utc())
}

const COLUMNS: [&str; 8] = [
    "timestamp",
    "power_mw",
    "speed_ms",
    "nwp_speed_ms",
    "nwp_dir_deg",
    "nwp_humidity_pct",
    "nwp_pressure_hpa",
    "nwp_temp_c",
];

/// Parses CSV text; `capacity_mw` bounds the power column.
pub fn read_csv<R: Read>(reader: R, farm_id: &str, capacity_mw: f64) -> Result<WindSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != COLUMNS {
        return Err(DataError::Header {
            expected: CSV_HEADER.to_string(),
            found: found.join(","),
        });
    }
    let mut s = WindSeries {
        farm_id: farm_id.to_string(),
        capacity_mw,
        timestamps: Vec::new(),
        power: Vec::new(),
        speed: Vec::new(),
        nwp: NwpChannels::default(),
    };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::Csv(format!("row {row}: {e}")))?;
        let field = |c: usize| rec.get(c).ok_or(DataError::MissingColumn { row, column: COLUMNS[c] });
        let num = |c: usize| -> Result<f64, DataError> {
            let v = field(c)?;
            v.trim().parse::<f64>().map_err(|_| DataError::Parse {
                row,
                column: COLUMNS[c],
                value: v.to_string(),
            })
        };
        let ts_raw = field(0)?;
        let ts = parse_timestamp(ts_raw.trim()).ok_or_else(|| DataError::Parse {
            row,
            column: "timestamp",
            value: ts_raw.to_string(),
        })?;
        s.timestamps.push(ts);
        s.power.push(num(1)?);
        s.speed.push(num(2)?);
        s.nwp.speed.push(num(3)?);
        s.nwp.direction.push(num(4)?);
        s.nwp.humidity.push(num(5)?);
        s.nwp.pressure.push(num(6)?);
        s.nwp.temperature.push(num(7)?);
    }
    if s.is_empty() {
        return Err(DataError::Empty);
    }
    s.validate()?;
    Ok(s)
}

/// Reads and validates a farm CSV. The farm id is the file stem.
pub fn ingest_csv(path: &Path, capacity_mw: f64) -> Result<WindSeries, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let farm_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(std::io::BufReader::new(file), &farm_id, capacity_mw)
}

/// Writes the canonical CSV form: exact header, shortest round-trip floats.
pub fn write_csv<W: Write>(series: &WindSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for i in 0..series.len() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_timestamp(&series.timestamps[i]),
            series.power[i],
            series.speed[i],
            series.nwp.speed[i],
            series.nwp.direction[i],
            series.nwp.humidity[i],
            series.nwp.pressure[i],
            series.nwp.temperature[i],
        )?;
    }
    out.flush()
}

pub fn write_csv_file(series: &WindSeries, path: &Path) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_csv(series, std::io::BufWriter::new(file)).map_err(io_err)
}
