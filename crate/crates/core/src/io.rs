//! Plot-ready trace files: CSV with `#` comment lines, or JSON records.
//!
//! Floats are written with 17 significant digits so that a write/read cycle
//! reproduces every value bit for bit, and identical inputs give identical
//! bytes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{RateScanRow, RecoveryTrace};
use crate::error::{Error, Result};
use crate::spectrum::{HoleSnapshot, SpectrumGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Format {
    #[default]
    Csv,
    JsonRecords,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonRecords => "json-records",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonRecords => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json-records" => Ok(Format::JsonRecords),
            other => Err(Error::input(format!(
                "unknown format `{other}`; expected `csv` or `json-records`"
            ))),
        }
    }
}

/// Column layouts shared by every reader and writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schema {
    SpectrumMap,
    Spectrum,
    HoleEvolution,
    Recovery,
    RateScan,
    FieldRates,
    TemperatureRates,
    Linewidths,
    LineAreas,
}

impl Schema {
    pub const ALL: [Schema; 9] = [
        Schema::SpectrumMap,
        Schema::Spectrum,
        Schema::HoleEvolution,
        Schema::Recovery,
        Schema::RateScan,
        Schema::FieldRates,
        Schema::TemperatureRates,
        Schema::Linewidths,
        Schema::LineAreas,
    ];

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Schema::SpectrumMap => &["field_T", "frequency_Hz", "amplitude"],
            Schema::Spectrum => &["frequency_Hz", "amplitude"],
            Schema::HoleEvolution => &["detuning_Hz", "amplitude", "time_s"],
            Schema::Recovery => &["time_s", "amplitude"],
            Schema::RateScan => &["B_T", "T_K", "Ts_K", "R_ff_Hz", "R_d_Hz", "R_total_Hz"],
            Schema::FieldRates => &["B_T", "R_Hz"],
            Schema::TemperatureRates => &["T_K", "R_Hz"],
            Schema::Linewidths => &["B_T", "fwhm_Hz"],
            Schema::LineAreas => &["B_T", "area"],
        }
    }

    fn from_header(header: &[String]) -> Result<Schema> {
        Schema::ALL
            .into_iter()
            .find(|s| s.columns().iter().eq(header.iter()))
            .ok_or_else(|| Error::Parse {
                context: "trace header".into(),
                message: format!("unrecognized columns `{}`", header.join(",")),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub schema: Schema,
    /// Provenance lines, written after a `# ` prefix.
    pub comments: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceFile {
    pub fn new(schema: Schema) -> Self {
        TraceFile {
            schema,
            comments: vec![],
            rows: vec![],
        }
    }

    pub fn with_comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .schema
            .columns()
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::input(format!("no column `{name}` in {:?}", self.schema)))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    fn check(&self) -> Result<()> {
        let width = self.schema.columns().len();
        match self.rows.iter().position(|r| r.len() != width) {
            Some(i) => Err(Error::input(format!(
                "row {i} has {} values, schema {:?} needs {width}",
                self.rows[i].len(),
                self.schema
            ))),
            None => Ok(()),
        }
    }
}

/// `{:.16e}` keeps 17 significant digits, enough to round-trip any f64.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render(trace: &TraceFile, format: Format) -> Result<String> {
    trace.check()?;
    match format {
        Format::Csv => Ok(render_csv(trace)),
        Format::JsonRecords => render_json(trace),
    }
}

fn render_csv(trace: &TraceFile) -> String {
    let mut out = String::new();
    for c in &trace.comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let _ = writeln!(out, "{}", trace.schema.columns().join(","));
    for row in &trace.rows {
        let cells: Vec<String> = row.iter().map(|&v| float(v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

// Written by hand rather than through serde_json so the number format is
// the same as in CSV.
fn render_json(trace: &TraceFile) -> Result<String> {
    let cols = trace.schema.columns();
    let mut out = String::from("[");
    for (i, row) in trace.rows.iter().enumerate() {
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "row {i} holds {v}, which JSON cannot represent"
            )));
        }
        out.push_str(if i == 0 { "\n  {" } else { ",\n  {" });
        for (j, (c, &v)) in cols.iter().zip(row).enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "\"{c}\": {}", float(v));
        }
        out.push('}');
    }
    out.push_str(if trace.rows.is_empty() {
        "]\n"
    } else {
        "\n]\n"
    });
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<TraceFile> {
    let mut comments = vec![];
    let mut body = String::with_capacity(text.len());
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
        } else if !line.trim().is_empty() {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let schema = Schema::from_header(&header)?;
    let mut rows = vec![];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = record
            .iter()
            .map(|cell| {
                // f64::from_str always uses `.`, independent of locale.
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    context: format!("data row {}", i + 1),
                    message: format!("`{cell}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let trace = TraceFile {
        schema,
        comments,
        rows,
    };
    trace.check()?;
    Ok(trace)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        context: "csv".into(),
        message: e.to_string(),
    }
}

pub fn parse_json_records(text: &str, schema: Schema) -> Result<TraceFile> {
    let records: Vec<serde_json::Map<String, serde_json::Value>> = serde_json::from_str(text)
        .map_err(|e| Error::Parse {
            context: "json records".into(),
            message: e.to_string(),
        })?;
    let cols = schema.columns();
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != cols.len() {
            return Err(Error::Parse {
                context: format!("record {i}"),
                message: format!("expected keys {}", cols.join(", ")),
            });
        }
        let row = cols
            .iter()
            .map(|c| {
                rec.get(*c)
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| Error::Parse {
                        context: format!("record {i}"),
                        message: format!("missing numeric `{c}`"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(TraceFile {
        schema,
        comments: vec![],
        rows,
    })
}

pub fn write_trace(path: &Path, trace: &TraceFile, format: Format) -> Result<()> {
    let text = render(trace, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a CSV trace (schema from its header), or a JSON-records file
/// (`.json`) whose schema must be given.
pub fn read_trace(path: &Path, json_schema: Option<Schema>) -> Result<TraceFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    match (is_json, json_schema) {
        (false, _) => parse_csv(&text),
        (true, Some(schema)) => parse_json_records(&text, schema),
        (true, None) => Err(Error::input(format!(
            "{}: JSON records carry no header; a schema is required",
            path.display()
        ))),
    }
}

pub fn spectrum_trace(grid: &SpectrumGrid) -> TraceFile {
    let mut t = TraceFile::new(if grid.field_axis.len() == 1 {
        Schema::Spectrum
    } else {
        Schema::SpectrumMap
    });
    for (i, &b) in grid.field_axis.iter().enumerate() {
        for (j, &f) in grid.frequency_axis.iter().enumerate() {
            let a = grid.amplitude[(i, j)];
            t.rows.push(if grid.field_axis.len() == 1 {
                vec![f, a]
            } else {
                vec![b, f, a]
            });
        }
    }
    t
}

pub fn recovery_trace(trace: &RecoveryTrace) -> TraceFile {
    let mut t = TraceFile::new(Schema::Recovery);
    t.rows = trace
        .times
        .iter()
        .zip(&trace.hole_amplitude)
        .map(|(&t, &a)| vec![t, a])
        .collect();
    t
}

pub fn trace_from_file(file: &TraceFile) -> Result<RecoveryTrace> {
    RecoveryTrace::new(file.column("time_s")?, file.column("amplitude")?)
}

/// Hole snapshots as (detuning, depth, time) triples.
pub fn hole_trace(detuning: &[f64], snapshots: &[HoleSnapshot]) -> TraceFile {
    let mut t = TraceFile::new(Schema::HoleEvolution);
    for s in snapshots {
        for (&d, &a) in detuning.iter().zip(&s.depth) {
            t.rows.push(vec![d, a, s.time]);
        }
    }
    t
}

pub fn rate_scan_trace(rows: &[RateScanRow]) -> TraceFile {
    let mut t = TraceFile::new(Schema::RateScan);
    t.rows = rows
        .iter()
        .map(|r| {
            vec![
                r.field,
                r.cryostat_temperature,
                r.rates.spin_temperature,
                r.rates.flip_flop,
                r.rates.direct,
                r.rates.total,
            ]
        })
        .collect();
    t
}
