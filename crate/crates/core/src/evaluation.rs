//! Leave-one-week-out evaluation of the main model and its benchmarks.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::benchmarks::{fit_varx, univariate_configs, PersistenceModel, VarxSeries};
use crate::clustering::AutoKSettings;
use crate::error::{Error, ErrorKind, Result};
use crate::features::{build_features_after, MAX_LAGS};
use crate::iohmm::{IoHmmModel, ModelConfig};
use crate::metrics::{mean, quantile, CellMetrics, MetricAccumulator};
use crate::record::{Field, ProductionRecord};
use crate::sequence::check_chronological;

/// ISO-8601 week of `date`, e.g. `2022-W41`.
pub fn week_key(date: NaiveDate) -> String {
    let w = date.iso_week();
    format!("{}-W{:02}", w.year(), w.week())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub week_keys: Vec<String>,
    pub held_out: String,
}

/// Records of one fold. `history` is everything before the test week.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData<'a> {
    pub train: Vec<&'a [ProductionRecord]>,
    pub history: &'a [ProductionRecord],
    pub test: &'a [ProductionRecord],
}

/// One fold per ISO week present in `records`.
pub fn week_folds(records: &[ProductionRecord]) -> Result<Vec<FoldSpec>> {
    check_chronological(records)?;
    let mut keys: Vec<String> = Vec::new();
    for r in records {
        let k = week_key(r.date);
        if keys.last() != Some(&k) {
            keys.push(k);
        }
    }
    if keys.len() < 2 {
        return Err(Error::Degenerate(format!("{} ISO week(s) in the data, need at least 2", keys.len())));
    }
    Ok(keys
        .iter()
        .map(|h| FoldSpec { week_keys: keys.clone(), held_out: h.clone() })
        .collect())
}

impl FoldSpec {
    pub fn split<'a>(&self, records: &'a [ProductionRecord]) -> Result<FoldData<'a>> {
        let start = records
            .iter()
            .position(|r| week_key(r.date) == self.held_out)
            .ok_or_else(|| Error::Input(format!("week {} not present", self.held_out)))?;
        let end = start + records[start..].iter().take_while(|r| week_key(r.date) == self.held_out).count();
        let train = [&records[..start], &records[end..]].into_iter().filter(|r| !r.is_empty()).collect();
        Ok(FoldData { train, history: &records[..start], test: &records[start..end] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelSpec {
    Persistence,
    NoLags,
    Varx(usize),
    IoHmm(usize),
    IoHmmUni(usize),
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Persistence => f.write_str("persistence"),
            ModelSpec::NoLags => f.write_str("no-lags"),
            ModelSpec::Varx(q) => write!(f, "varx-q{}", q),
            ModelSpec::IoHmm(q) => write!(f, "iohmm-q{}", q),
            ModelSpec::IoHmmUni(q) => write!(f, "iohmm-uni-q{}", q),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lag = |rest: &str, lo: usize| -> Result<usize> {
            match rest.parse::<usize>() {
                Ok(q) if (lo..=MAX_LAGS).contains(&q) => Ok(q),
                _ => Err(Error::Config(format!("invalid lag order in model `{}`", s))),
            }
        };
        match s {
            "persistence" => Ok(ModelSpec::Persistence),
            "no-lags" => Ok(ModelSpec::NoLags),
            _ => {
                if let Some(r) = s.strip_prefix("varx-q") {
                    Ok(ModelSpec::Varx(lag(r, 1)?))
                } else if let Some(r) = s.strip_prefix("iohmm-uni-q") {
                    Ok(ModelSpec::IoHmmUni(lag(r, 0)?))
                } else if let Some(r) = s.strip_prefix("iohmm-q") {
                    Ok(ModelSpec::IoHmm(lag(r, 0)?))
                } else {
                    Err(Error::Config(format!("unknown model `{}`", s)))
                }
            }
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Persistence, no-lags, VARX(1..5), the main model with 0..5 lags and its
/// univariate counterparts with 1..5 lags.
pub fn default_model_specs() -> Vec<ModelSpec> {
    let mut specs = alloc::vec![ModelSpec::Persistence, ModelSpec::NoLags];
    specs.extend((1..=MAX_LAGS).map(ModelSpec::Varx));
    specs.extend((0..=MAX_LAGS).map(ModelSpec::IoHmm));
    specs.extend((1..=MAX_LAGS).map(ModelSpec::IoHmmUni));
    specs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Base configuration; each model spec overrides the lag order.
    pub model: ModelConfig,
    pub clustering: AutoKSettings,
}

/// One point forecast of one response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Position of the forecast period in the full record list.
    pub index: usize,
    /// Position of the response in the base configuration.
    pub response: usize,
    pub y: f64,
    pub y_hat: f64,
    pub sd: f64,
}

fn with_lags(config: &ModelConfig, q: usize) -> ModelConfig {
    let mut c = config.clone();
    c.features.q = q;
    c
}

fn iohmm_predictions(
    fold: &FoldData<'_>,
    config: &ModelConfig,
    clustering: &AutoKSettings,
    response_map: &[usize],
) -> Result<Vec<Prediction>> {
    let mut model = IoHmmModel::fit(&fold.train, config, clustering)?;
    let steps = model.run_online(fold.history, fold.test)?;
    let offset = fold.history.len();
    let mut out = Vec::new();
    for step in steps {
        let Some(f) = step.forecast.filter(|f| !f.zero_knowledge) else { continue };
        let sd = f.forecast.sd();
        for (j, target) in response_map.iter().enumerate() {
            out.push(Prediction {
                index: offset + step.index,
                response: *target,
                y: step.y[j],
                y_hat: f.forecast.y_hat[j],
                sd: sd[j],
            });
        }
    }
    Ok(out)
}

/// Trains `spec` on the fold's training weeks and forecasts its test week.
/// The main model keeps learning through the test week; benchmarks stay frozen.
pub fn forecast_fold(
    records: &[ProductionRecord],
    fold: &FoldSpec,
    spec: ModelSpec,
    settings: &EvalSettings,
) -> Result<Vec<Prediction>> {
    let data = fold.split(records)?;
    let base = &settings.model;
    let m = base.features.m();
    let all: Vec<usize> = (0..m).collect();
    let offset = data.history.len();
    match spec {
        ModelSpec::Persistence => {
            let runs: Vec<Vec<Vec<f64>>> =
                data.train.iter().map(|r| r.iter().map(|x| base.features.responses_of(x)).collect()).collect();
            let model = PersistenceModel::fit(&runs)?;
            let sd: Vec<f64> = model.sigma.diagonal().iter().map(|v| libm::sqrt(*v)).collect();
            let mut out = Vec::new();
            for (i, r) in data.test.iter().enumerate() {
                let g = offset + i;
                if g == 0 {
                    continue;
                }
                let prev = base.features.responses_of(&records[g - 1]);
                let (y_hat, _) = model.forecast(Some(&prev))?;
                let y = base.features.responses_of(r);
                out.extend((0..m).map(|j| Prediction { index: g, response: j, y: y[j], y_hat: y_hat[j], sd: sd[j] }));
            }
            Ok(out)
        }
        ModelSpec::Varx(q) => {
            let series = data
                .train
                .iter()
                .map(|r| VarxSeries::from_records(r, base))
                .collect::<Result<Vec<_>>>()?;
            let model = fit_varx(&series, q)?;
            let sd: Vec<f64> = model.sigma_eta.diagonal().iter().map(|v| libm::sqrt(v.max(0.0))).collect();
            let rows = build_features_after(data.history, data.test, &base.features.without_lags())?;
            let mut out = Vec::new();
            for row in rows {
                let g = offset + row.index;
                if g < q {
                    continue;
                }
                let lags: Vec<Vec<f64>> = (1..=q).map(|j| base.features.responses_of(&records[g - j])).collect();
                let (y_hat, _) = model.predict(&lags, &row.w)?;
                out.extend((0..m).map(|j| Prediction { index: g, response: j, y: row.y[j], y_hat: y_hat[j], sd: sd[j] }));
            }
            Ok(out)
        }
        ModelSpec::NoLags => iohmm_predictions(&data, &with_lags(base, 0), &settings.clustering, &all),
        ModelSpec::IoHmm(q) => iohmm_predictions(&data, &with_lags(base, q), &settings.clustering, &all),
        ModelSpec::IoHmmUni(q) => {
            let mut out = Vec::new();
            for (j, c) in univariate_configs(&with_lags(base, q)).iter().enumerate() {
                out.extend(iohmm_predictions(&data, c, &settings.clustering, &[j])?);
            }
            out.sort_by_key(|p| (p.index, p.response));
            Ok(out)
        }
    }
}

/// Metrics of one (model, fold, shift type, response) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsCell {
    pub model: String,
    pub fold: String,
    pub shift_type: String,
    pub response: String,
    pub mae: f64,
    pub rmse: f64,
    pub covg: f64,
    pub half_width: f64,
    pub count: u64,
}

/// Groups predictions by shift code and response.
pub fn aggregate(
    model: &str,
    fold: &str,
    predictions: &[Prediction],
    records: &[ProductionRecord],
    responses: &[Field],
) -> Vec<MetricsCell> {
    let mut groups: BTreeMap<(String, usize), MetricAccumulator> = BTreeMap::new();
    for p in predictions {
        let key = (records[p.index].shift_code().to_string(), p.response);
        groups.entry(key).or_default().push(p.y, p.y_hat, p.sd);
    }
    groups
        .into_iter()
        .filter_map(|((shift, j), acc)| {
            let CellMetrics { mae, rmse, covg, half_width, count } = acc.finish()?;
            Some(MetricsCell {
                model: model.to_string(),
                fold: fold.to_string(),
                shift_type: shift,
                response: responses[j].alias().to_string(),
                mae,
                rmse,
                covg,
                half_width,
                count,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cells: Vec<MetricsCell>,
    pub warnings: Vec<String>,
}

/// Outcome of one (fold, model) evaluation job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub spec: ModelSpec,
    pub fold: String,
    pub predictions: Result<Vec<Prediction>>,
}

pub fn run_job(records: &[ProductionRecord], fold: &FoldSpec, spec: ModelSpec, settings: &EvalSettings) -> JobResult {
    JobResult { spec, fold: fold.held_out.clone(), predictions: forecast_fold(records, fold, spec, settings) }
}

impl MetricsReport {
    /// Merges job results in sorted key order. Data and numeric failures
    /// drop the affected cells with a warning; validation errors abort.
    pub fn assemble(jobs: Vec<JobResult>, records: &[ProductionRecord], responses: &[Field]) -> Result<Self> {
        let mut report = MetricsReport::default();
        let mut jobs = jobs;
        jobs.sort_by(|a, b| (a.spec.to_string(), &a.fold).cmp(&(b.spec.to_string(), &b.fold)));
        for job in jobs {
            let id = job.spec.to_string();
            match job.predictions {
                Ok(p) if p.is_empty() => {
                    report.warnings.push(format!("{} fold {}: no test forecasts, cells omitted", id, job.fold));
                }
                Ok(p) => report.cells.extend(aggregate(&id, &job.fold, &p, records, responses)),
                Err(e) if e.kind() == ErrorKind::Validation => return Err(e),
                Err(e) => report.warnings.push(format!("{} fold {}: {}, cells omitted", id, job.fold, e)),
            }
        }
        for w in &report.warnings {
            log::warn!("{}", w);
        }
        Ok(report)
    }
}

/// Sequential leave-one-week-out evaluation over `specs`.
pub fn leave_one_week_out(
    records: &[ProductionRecord],
    specs: &[ModelSpec],
    settings: &EvalSettings,
) -> Result<MetricsReport> {
    settings.model.validate()?;
    let folds = week_folds(records)?;
    let jobs = folds
        .iter()
        .flat_map(|f| specs.iter().map(move |s| (f, *s)))
        .map(|(f, s)| run_job(records, f, s, settings))
        .collect();
    MetricsReport::assemble(jobs, records, &settings.model.features.responses)
}

/// Sample mean and quartiles of one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSummary {
    pub variable: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn response_summary(records: &[ProductionRecord], responses: &[Field]) -> Result<Vec<ResponseSummary>> {
    responses
        .iter()
        .map(|f| {
            let v: Vec<f64> = records.iter().map(|r| r.get(*f)).collect();
            Ok(ResponseSummary {
                variable: f.alias().to_string(),
                min: quantile(&v, 0.0)?,
                q1: quantile(&v, 0.25)?,
                median: quantile(&v, 0.5)?,
                mean: mean(&v)?,
                q3: quantile(&v, 0.75)?,
                max: quantile(&v, 1.0)?,
            })
        })
        .collect()
}
