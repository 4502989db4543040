//! Report documents: long-format CSV, JSON and the response summary table.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use opforecast_core::evaluation::{MetricsCell, MetricsReport, ResponseSummary};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const REPORT_HEADER: [&str; 7] = ["model", "fold", "shift_type", "response", "metric", "value", "count"];
pub const METRICS: [&str; 4] = ["mae", "rmse", "covg", "halfwidth"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(AppError::Config(format!("unknown report format `{}`", s))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LongRow {
    model: String,
    fold: String,
    shift_type: String,
    response: String,
    metric: String,
    value: f64,
    count: u64,
}

fn metric_value(cell: &MetricsCell, metric: &str) -> f64 {
    match metric {
        "mae" => cell.mae,
        "rmse" => cell.rmse,
        "covg" => cell.covg,
        _ => cell.half_width,
    }
}

pub fn write_report<W: Write>(sink: W, report: &MetricsReport, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            // header written by hand so an empty report still has one
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
            w.write_record(REPORT_HEADER)?;
            for cell in report.cells.iter().filter(|c| c.count > 0) {
                for metric in METRICS {
                    w.serialize(LongRow {
                        model: cell.model.clone(),
                        fold: cell.fold.clone(),
                        shift_type: cell.shift_type.clone(),
                        response: cell.response.clone(),
                        metric: metric.to_string(),
                        value: metric_value(cell, metric),
                        count: cell.count,
                    })?;
                }
            }
            w.flush().map_err(|e| AppError::io("<report>", e))?;
        }
        ReportFormat::Json => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, report)?;
            sink.write_all(b"\n").map_err(|e| AppError::io("<report>", e))?;
        }
    }
    Ok(())
}

/// Reads a long-format CSV report back into cells, in file order.
pub fn parse_report_csv<R: Read>(source: R) -> Result<Vec<MetricsCell>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut order: Vec<(String, String, String, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String, String, String), MetricsCell> = BTreeMap::new();
    for row in reader.deserialize::<LongRow>() {
        let row = row?;
        let key = (row.model.clone(), row.fold.clone(), row.shift_type.clone(), row.response.clone());
        let cell = cells.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            MetricsCell {
                model: row.model,
                fold: row.fold,
                shift_type: row.shift_type,
                response: row.response,
                mae: f64::NAN,
                rmse: f64::NAN,
                covg: f64::NAN,
                half_width: f64::NAN,
                count: row.count,
            }
        });
        match row.metric.as_str() {
            "mae" => cell.mae = row.value,
            "rmse" => cell.rmse = row.value,
            "covg" => cell.covg = row.value,
            "halfwidth" => cell.half_width = row.value,
            other => return Err(AppError::Config(format!("unknown metric `{}` in report", other))),
        }
    }
    Ok(order.into_iter().map(|k| cells.remove(&k).expect("cell for key")).collect())
}

pub fn write_summary<W: Write>(sink: W, summary: &[ResponseSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["variable", "min", "Q1", "median", "mean", "Q3", "max"])?;
    for s in summary {
        w.write_record([
            s.variable.clone(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.mean.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.flush().map_err(|e| AppError::io("<summary>", e))?;
    Ok(())
}
