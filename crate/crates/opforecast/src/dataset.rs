//! Comma-separated production datasets with one header row of column aliases.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use opforecast_core::record::{Field, ProductionRecord};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// Columns in file order.
pub const COLUMNS: [&str; 27] = [
    "n", "date", "start", "shift", "pr.ord", "ics", "rcs", "TU", "DU", "TgU", "nstops", "OT", "SBT", "LT", "DT",
    "OpT", "PLT", "NOpT", "QLT", "VT", "lo", "av", "pf", "qu", "oee", "hum", "temp",
];

const IDENTIFIERS: [&str; 5] = ["n", "date", "start", "shift", "pr.ord"];
const OPTIONAL: [&str; 2] = ["hum", "temp"];

/// Header name to use for a canonical column, when the file differs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMapping(pub BTreeMap<String, String>);

impl ColumnMapping {
    fn header_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.0.get(canonical).map(String::as_str).unwrap_or(canonical)
    }

    pub fn validate(&self) -> Result<()> {
        match self.0.keys().find(|k| !COLUMNS.contains(&k.as_str())) {
            Some(k) => Err(AppError::Config(format!("column mapping for unknown column `{}`", k))),
            None => Ok(()),
        }
    }
}

/// Which columns must be present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// Every column except humidity and temperature.
    Full,
    /// Identifiers plus the listed numeric fields; used for next-period rows
    /// whose outcomes are not known yet.
    Covariates,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<ProductionRecord>,
    pub row_errors: Vec<RowError>,
}

pub fn blank_record() -> ProductionRecord {
    ProductionRecord {
        n: 0,
        date: NaiveDate::MIN,
        start: NaiveTime::MIN,
        shift: String::new(),
        pr_ord: 0,
        ics: 0.0,
        rcs: 0.0,
        tu: 0,
        du: 0,
        tgu: 0.0,
        nstops: 0,
        ot: 0.0,
        sbt: 0.0,
        lt: 0.0,
        dt: 0.0,
        opt: 0.0,
        plt: 0.0,
        nopt: 0.0,
        qlt: 0.0,
        vt: 0.0,
        lo: 0.0,
        av: 0.0,
        pf: 0.0,
        qu: 0.0,
        oee: 0.0,
        hum: 0.0,
        temp: 0.0,
    }
}

fn parse_int(s: &str) -> std::result::Result<i64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(format!("`{}` is not an integer", s)),
    }
}

fn parse_float(s: &str) -> std::result::Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{}` is not a number", s.trim())),
    }
}

fn parse_time(s: &str) -> std::result::Result<NaiveTime, String> {
    let s = s.trim();
    NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .map_err(|_| format!("`{}` is not a time of day", s))
}

fn set_field(r: &mut ProductionRecord, f: Field, raw: &str) -> std::result::Result<(), String> {
    match f {
        Field::Tu => r.tu = parse_int(raw)?,
        Field::Du => r.du = parse_int(raw)?,
        Field::Nstops => r.nstops = parse_int(raw)?,
        _ => {
            let v = parse_float(raw)?;
            match f {
                Field::Ics => r.ics = v,
                Field::Rcs => r.rcs = v,
                Field::Tgu => r.tgu = v,
                Field::Ot => r.ot = v,
                Field::Sbt => r.sbt = v,
                Field::Lt => r.lt = v,
                Field::Dt => r.dt = v,
                Field::OpT => r.opt = v,
                Field::Plt => r.plt = v,
                Field::NOpT => r.nopt = v,
                Field::Qlt => r.qlt = v,
                Field::Vt => r.vt = v,
                Field::Lo => r.lo = v,
                Field::Av => r.av = v,
                Field::Pf => r.pf = v,
                Field::Qu => r.qu = v,
                Field::Oee => r.oee = v,
                Field::Hum => r.hum = v,
                Field::Temp => r.temp = v,
                Field::Tu | Field::Du | Field::Nstops => unreachable!(),
            }
        }
    }
    Ok(())
}

fn set_column(r: &mut ProductionRecord, canonical: &str, raw: &str) -> std::result::Result<(), String> {
    match canonical {
        "n" => r.n = parse_int(raw)?,
        "date" => {
            r.date = NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
                .map_err(|_| format!("`{}` is not an ISO date", raw.trim()))?
        }
        "start" => r.start = parse_time(raw)?,
        "shift" => {
            let s = raw.trim();
            if s.is_empty() {
                return Err("empty shift label".into());
            }
            r.shift = s.to_string();
        }
        "pr.ord" => r.pr_ord = parse_int(raw)?,
        other => {
            let f: Field = other.parse().map_err(|e: opforecast_core::Error| e.to_string())?;
            set_field(r, f, raw)?
        }
    }
    Ok(())
}

/// Reads records in file order. Malformed rows are skipped and reported.
pub fn parse_dataset<R: Read>(source: R, mapping: &ColumnMapping, schema: Schema, needed: &[Field]) -> Result<Dataset> {
    mapping.validate()?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let mut positions: Vec<(&str, usize)> = Vec::new();
    let mut missing = Vec::new();
    for canonical in COLUMNS {
        let header = mapping.header_for(canonical);
        match headers.iter().position(|h| h == header) {
            Some(i) => positions.push((canonical, i)),
            None => {
                let required = match schema {
                    Schema::Full => !OPTIONAL.contains(&canonical),
                    Schema::Covariates => {
                        IDENTIFIERS.contains(&canonical) || needed.iter().any(|f| f.alias() == canonical)
                    }
                };
                if required {
                    missing.push(header.to_string());
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(opforecast_core::Error::Schema(format!("missing column(s): {}", missing.join(", "))).into());
    }
    let mut records = Vec::new();
    let mut row_errors = Vec::new();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                row_errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let mut record = blank_record();
        let outcome = positions.iter().try_for_each(|(canonical, i)| {
            let raw = row.get(*i).unwrap_or("");
            set_column(&mut record, canonical, raw).map_err(|e| format!("column {}: {}", canonical, e))
        });
        match outcome {
            Ok(()) => records.push(record),
            Err(message) => row_errors.push(RowError { line, message }),
        }
    }
    for e in &row_errors {
        log::warn!("line {}: {}", e.line, e.message);
    }
    Ok(Dataset { records, row_errors })
}

pub fn read_dataset(path: &Path, mapping: &ColumnMapping) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_dataset(file, mapping, Schema::Full, &[])
}

pub fn write_dataset<W: Write>(sink: W, records: &[ProductionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    for r in records {
        let mut row = vec![
            r.n.to_string(),
            r.date.format("%Y-%m-%d").to_string(),
            r.start.format("%H:%M:%S").to_string(),
            r.shift.clone(),
            r.pr_ord.to_string(),
        ];
        row.extend(COLUMNS[5..].iter().map(|c| {
            let f: Field = c.parse().expect("numeric column");
            match f {
                Field::Tu => r.tu.to_string(),
                Field::Du => r.du.to_string(),
                Field::Nstops => r.nstops.to_string(),
                _ => r.get(f).to_string(),
            }
        }));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| AppError::io("<output>", e))?;
    Ok(())
}
