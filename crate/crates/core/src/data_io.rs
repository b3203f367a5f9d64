//! Time-series ingestion, synthetic inputs, seasonal grouping and trace export.
//!
//! Timestamps are integer UTC epoch seconds throughout.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dispatch::DispatchRecord;

pub const SIGNAL_HEADER: [&str; 2] = ["timestamp", "r"];
pub const IRRADIANCE_HEADER: [&str; 2] = ["timestamp", "ghi_wm2"];
/// Longest series a reader or resampler will materialize, gap fill included.
pub const MAX_SERIES_LEN: usize = 20_000_000;
pub const TRACE_HEADER: [&str; 11] = [
    "k",
    "t",
    "r",
    "p_hes",
    "p0",
    "dp_req",
    "p_pv",
    "p_cl",
    "p_batt",
    "p_curtailed",
    "soc",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: timestamp {ts} does not increase on {prev}")]
    NonMonotone { line: u64, ts: i64, prev: i64 },
    #[error("line {line}: gap of {gap} s is not a multiple of the {cadence} s cadence")]
    Cadence { line: u64, gap: i64, cadence: i64 },
    #[error("series is empty")]
    Empty,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl DataError {
    fn io(path: &Path, source: io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Uniformly sampled series. Gaps in the source are filled by holding the
/// previous value; `gaps` lists the indices of filled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub start: i64,
    pub cadence: i64,
    pub values: Vec<f64>,
    pub gaps: Vec<usize>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> i64 {
        self.start + i as i64 * self.cadence
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len()).map(|i| self.timestamp(i))
    }
}

pub type SignalSeries = Series;
pub type IrradianceSeries = Series;

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let found = rdr.headers().map_err(|e| DataError::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found != expected {
        return Err(DataError::Header {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

/// Parses `timestamp,value` rows, applying `check` to each value.
fn read_pairs<R: Read>(
    input: R,
    header: &[&str],
    check: impl Fn(f64) -> Result<(), String>,
) -> Result<Series, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut rdr, header)?;
    let mut rows: Vec<(u64, i64, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |msg: String| DataError::Parse { line, msg };
        if rec.len() != 2 {
            return Err(parse_err(format!("expected 2 fields, found {}", rec.len())));
        }
        let ts: i64 = rec[0]
            .parse()
            .map_err(|_| parse_err(format!("timestamp `{}` is not an integer", &rec[0])))?;
        let v: f64 = rec[1]
            .parse()
            .map_err(|_| parse_err(format!("value `{}` is not a number", &rec[1])))?;
        if !v.is_finite() {
            return Err(parse_err(format!("value `{}` is not finite", &rec[1])));
        }
        check(v).map_err(parse_err)?;
        if let Some(&(_, prev, _)) = rows.last() {
            if ts <= prev {
                return Err(DataError::NonMonotone { line, ts, prev });
            }
        }
        rows.push((line, ts, v));
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let mut cadence = i64::MAX;
    for w in rows.windows(2) {
        let gap = w[1].1.checked_sub(w[0].1).ok_or_else(|| DataError::Parse {
            line: w[1].0,
            msg: format!("timestamp step from {} to {} overflows", w[0].1, w[1].1),
        })?;
        cadence = cadence.min(gap);
    }
    if rows.len() == 1 {
        cadence = 1;
    }
    let mut values = Vec::with_capacity(rows.len());
    let mut gaps = Vec::new();
    for (i, &(line, ts, v)) in rows.iter().enumerate() {
        if i > 0 {
            let (_, prev_ts, prev_v) = rows[i - 1];
            let gap = ts - prev_ts;
            if gap % cadence != 0 {
                return Err(DataError::Cadence { line, gap, cadence });
            }
            let missing = (gap / cadence - 1) as u64;
            if values.len() as u64 + missing >= MAX_SERIES_LEN as u64 {
                return Err(DataError::Parse {
                    line,
                    msg: format!("gap of {gap} s would grow the series past {MAX_SERIES_LEN} samples"),
                });
            }
            for _ in 1..gap / cadence {
                gaps.push(values.len());
                values.push(prev_v);
            }
        }
        values.push(v);
    }
    if !gaps.is_empty() {
        log::warn!("{} missing samples filled by holding the previous value", gaps.len());
    }
    Ok(Series {
        start: rows[0].1,
        cadence,
        values,
        gaps,
    })
}

pub fn parse_signal<R: Read>(input: R) -> Result<SignalSeries, DataError> {
    read_pairs(input, &SIGNAL_HEADER, |v| {
        if v.abs() <= 1.0 {
            Ok(())
        } else {
            Err(format!("signal value {v} outside [-1, 1]"))
        }
    })
}

pub fn parse_irradiance<R: Read>(input: R) -> Result<IrradianceSeries, DataError> {
    read_pairs(input, &IRRADIANCE_HEADER, |v| {
        if v >= 0.0 {
            Ok(())
        } else {
            Err(format!("negative irradiance {v}"))
        }
    })
}

pub fn read_signal_csv(path: &Path) -> Result<SignalSeries, DataError> {
    let f = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_signal(f)
}

pub fn read_irradiance_csv(path: &Path) -> Result<IrradianceSeries, DataError> {
    let f = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_irradiance(f)
}

/// Zero-order hold onto a finer cadence that divides the source cadence.
pub fn resample_hold(series: &Series, cadence: i64) -> Result<Series, DataError> {
    if cadence <= 0 || series.cadence % cadence != 0 {
        return Err(DataError::Invalid(format!(
            "target cadence {cadence} s must divide source cadence {} s",
            series.cadence
        )));
    }
    let factor = (series.cadence / cadence) as usize;
    if series.len().saturating_mul(factor) > MAX_SERIES_LEN {
        return Err(DataError::Invalid(format!(
            "resampling {} samples by {factor} exceeds {MAX_SERIES_LEN} samples",
            series.len()
        )));
    }
    Ok(Series {
        start: series.start,
        cadence,
        values: series
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, factor))
            .collect(),
        gaps: series.gaps.iter().flat_map(|&g| g * factor..(g + 1) * factor).collect(),
    })
}

/// Mean-reverting random walk reflected at ±1, then shifted to zero mean
/// over each `window` samples and rescaled to stay within ±1.
///
/// `bias` adds a constant offset after centring, for runs that should
/// drift the battery.
pub fn synth_signal(seed: u64, n_steps: usize, window: usize, bias: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.08).expect("valid normal");
    let reversion = 0.02;
    let mut x: f64 = rng.random_range(-0.5..0.5);
    let mut raw = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let step: f64 = noise.sample(&mut rng);
        x += -reversion * x + step.clamp(-0.25, 0.25);
        if x > 1.0 {
            x = 2.0 - x;
        } else if x < -1.0 {
            x = -2.0 - x;
        }
        raw.push(x);
    }
    let window = window.max(1);
    for chunk in raw.chunks_mut(window) {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        chunk.iter_mut().for_each(|v| *v -= mean);
        let peak = chunk.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if peak > 1.0 {
            chunk.iter_mut().for_each(|v| *v /= peak);
        }
    }
    if bias != 0.0 {
        raw.iter_mut().for_each(|v| *v = (*v + bias).clamp(-1.0, 1.0));
    }
    raw
}

pub fn synth_signal_series(
    seed: u64,
    n_steps: usize,
    window: usize,
    bias: f64,
    start: i64,
    cadence: i64,
) -> SignalSeries {
    Series {
        start,
        cadence,
        values: synth_signal(seed, n_steps, window, bias),
        gaps: Vec::new(),
    }
}

/// Clear-sky bell between 06:00 and 18:00 UTC with seeded cloud dips that
/// vary by day and season.
pub fn synth_irradiance(seed: u64, start: i64, cadence: i64, n_steps: usize) -> IrradianceSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_steps);
    let mut day = i64::MIN;
    let mut clear: f64 = 1.0;
    let mut cloud: f64 = 1.0;
    for i in 0..n_steps {
        let ts = start + i as i64 * cadence;
        let d = ts.div_euclid(86_400);
        if d != day {
            day = d;
            clear = rng.random_range(0.3..1.0);
        }
        let hour = ts.rem_euclid(86_400) as f64 / 3600.0;
        let doy = (d.rem_euclid(365)) as f64;
        let seasonal = 0.75 + 0.25 * (2.0 * std::f64::consts::PI * (doy - 172.0) / 365.0).cos();
        let sun = if (6.0..18.0).contains(&hour) {
            (std::f64::consts::PI * (hour - 6.0) / 12.0).sin()
        } else {
            0.0
        };
        // Cloud cover wanders slowly around the day's clearness.
        cloud += 0.05 * (clear - cloud) + rng.random_range(-0.03..0.03);
        cloud = cloud.clamp(0.05, 1.0);
        values.push(1000.0 * seasonal * sun * cloud);
    }
    Series {
        start,
        cadence,
        values,
        gaps: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Autumn,
}

impl Season {
    pub fn of_month(month: u32) -> Season {
        match month {
            12 | 1 | 2 => Season::Winter,
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            _ => Season::Autumn,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Autumn => "autumn",
        }
    }
}

/// Season and UTC hour of an epoch timestamp.
pub fn season_hour(ts: i64) -> Result<(Season, u32), DataError> {
    let dt =
        DateTime::from_timestamp(ts, 0).ok_or_else(|| DataError::Invalid(format!("timestamp {ts} out of range")))?;
    Ok((Season::of_month(dt.month()), dt.hour()))
}

/// Groups samples by (season, hour).
pub fn group_by_season_hour(series: &Series) -> Result<BTreeMap<(Season, u32), Vec<f64>>, DataError> {
    let mut groups: BTreeMap<(Season, u32), Vec<f64>> = BTreeMap::new();
    for (i, &v) in series.values.iter().enumerate() {
        groups.entry(season_hour(series.timestamp(i))?).or_default().push(v);
    }
    Ok(groups)
}

fn create(path: &Path) -> Result<BufWriter<File>, DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| DataError::io(path, e))
}

/// Writes a trace; floats use the shortest representation that parses
/// back to the same value.
pub fn write_trace<W: Write>(records: &[DispatchRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.t.to_string(),
            r.r.to_string(),
            r.p_hes.to_string(),
            r.p0.to_string(),
            r.dp_req.to_string(),
            r.p_pv.to_string(),
            r.p_cl.to_string(),
            r.p_batt.to_string(),
            r.p_curtailed.to_string(),
            r.soc_after.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `header` then `rows` as CSV, creating parent directories.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), DataError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |e: csv::Error| DataError::io(path, io::Error::other(e));
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn export_trace(records: &[DispatchRecord], path: &Path) -> Result<(), DataError> {
    let f = create(path)?;
    write_trace(records, f).map_err(|e| DataError::io(path, io::Error::other(e)))
}

pub fn parse_trace<R: Read>(input: R) -> Result<Vec<DispatchRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(&mut rdr, &TRACE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != TRACE_HEADER.len() {
            return Err(DataError::Parse {
                line,
                msg: format!("expected {} fields, found {}", TRACE_HEADER.len(), rec.len()),
            });
        }
        let num = |i: usize| -> Result<f64, DataError> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::Parse {
                    line,
                    msg: format!("{} `{}` is not a finite number", TRACE_HEADER[i], &rec[i]),
                })
        };
        let step = rec[0].parse::<usize>().map_err(|_| DataError::Parse {
            line,
            msg: format!("k `{}` is not a step index", &rec[0]),
        })?;
        out.push(DispatchRecord {
            step,
            t: num(1)?,
            r: num(2)?,
            p_hes: num(3)?,
            p0: num(4)?,
            dp_req: num(5)?,
            p_pv: num(6)?,
            p_cl: num(7)?,
            p_batt: num(8)?,
            p_curtailed: num(9)?,
            soc_after: num(10)?,
        });
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<DispatchRecord>, DataError> {
    let f = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_trace(f)
}

/// Scalar entry of a flat report.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportValue {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl std::fmt::Display for ReportValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReportValue::Num(v) if v.is_finite() => {
                // Keep a decimal point so the value reads back as a float.
                let s = v.to_string();
                if s.contains(['.', 'e', 'E']) {
                    f.write_str(&s)
                } else {
                    write!(f, "{s}.0")
                }
            }
            ReportValue::Num(v) => write!(f, "\"{v}\""),
            ReportValue::Int(v) => write!(f, "{v}"),
            ReportValue::Bool(v) => write!(f, "{v}"),
            ReportValue::Text(s) => write!(f, "{s:?}"),
        }
    }
}

/// Ordered `key = value` document with dotted keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, ReportValue)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.entries.push((key.to_string(), ReportValue::Num(v)));
        self
    }

    pub fn int(&mut self, key: &str, v: i64) -> &mut Self {
        self.entries.push((key.to_string(), ReportValue::Int(v)));
        self
    }

    pub fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.entries.push((key.to_string(), ReportValue::Bool(v)));
        self
    }

    pub fn text(&mut self, key: &str, v: &str) -> &mut Self {
        self.entries.push((key.to_string(), ReportValue::Text(v.to_string())));
        self
    }

    pub fn get(&self, key: &str) -> Option<&ReportValue> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn entries(&self) -> &[(String, ReportValue)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn export_report(report: &Report, path: &Path) -> Result<(), DataError> {
    let mut f = create(path)?;
    f.write_all(report.render().as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| DataError::io(path, e))
}
