//! Command-line front end.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use opforecast_core::evaluation::{response_summary, run_job, week_folds, MetricsReport};
use opforecast_core::features::FeatureConfig;
use opforecast_core::iohmm::{IoHmmModel, StepForecast};
use opforecast_core::record::{Field, ProductionRecord};
use opforecast_core::sequence::check_chronological;
use opforecast_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{parse_dataset, read_dataset, write_dataset, Dataset, Schema};
use crate::error::{AppError, Result};
use crate::report::{write_report, write_summary, ReportFormat};
use crate::snapshot;
use crate::synthetic::SyntheticSpec;

#[derive(Debug, Parser)]
#[command(name = "opforecast", version, about = "Online forecasting of operational times")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a model from a dataset and write a snapshot.
    Fit(Common),
    /// Forecast the next period from a snapshot.
    Forecast(ForecastArgs),
    /// Leave-one-week-out evaluation of the configured models.
    Evaluate(Common),
    /// Write a synthetic dataset from a generator spec (given with --config).
    Simulate(SimulateArgs),
    /// Describe a snapshot or a dataset.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output file (fit) or directory (evaluate).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for K-means restarts.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Forgetting factor of the discrete-state model.
    #[arg(long)]
    pub lambda_u: Option<f64>,
    /// Forgetting factor of the continuous model.
    #[arg(long)]
    pub lambda_v: Option<f64>,
    /// Lag order of the responses.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Goodness-of-fit target for choosing the number of states.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Largest number of states tried.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Comma-separated model ids, e.g. `persistence,iohmm-q1`.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Snapshot written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the covariates of the next period (one row).
    #[arg(long)]
    pub data: PathBuf,
    /// TOML run configuration, used for its column mapping.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Forecast document path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML generator spec; defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed, overriding the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of periods, overriding the spec.
    #[arg(long)]
    pub periods: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Snapshot to describe.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub model: Option<PathBuf>,
    /// Dataset CSV to describe.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML run configuration, used for its column mapping.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    /// File configuration with flag overrides applied, validated.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.data {
            c.data = Some(v.clone());
        }
        if let Some(v) = &self.out {
            c.out = Some(v.clone());
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.lambda_u {
            c.lambda_u = v;
        }
        if let Some(v) = self.lambda_v {
            c.lambda_v = v;
        }
        if let Some(v) = self.lags {
            c.lags = v;
        }
        if let Some(v) = self.threshold {
            c.threshold = v;
        }
        if let Some(v) = self.kmax {
            c.k_max = v;
        }
        if let Some(v) = &self.models {
            c.models = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let c = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    c.validate()?;
    Ok(c)
}

/// Reads, orders and checks the training data.
pub fn load_records(config: &RunConfig) -> Result<Vec<ProductionRecord>> {
    let Dataset { records, row_errors } = read_dataset(config.data_path()?, &config.columns)?;
    if !row_errors.is_empty() {
        log::warn!("{} malformed row(s) skipped", row_errors.len());
    }
    check_chronological(&records)?;
    for r in &records {
        r.check_consistency().map_err(|e| {
            log::error!("record n={}: {}", r.n, e);
            AppError::Core(e)
        })?;
    }
    Ok(records)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| AppError::io(path, e))
}

/// Learns a model over the whole dataset as one run.
pub fn fit_model(config: &RunConfig, records: &[ProductionRecord]) -> Result<IoHmmModel> {
    let model_config = config.model_config(records)?;
    Ok(IoHmmModel::fit(&[records], &model_config, &config.clustering())?)
}

fn print_fit_summary(model: &IoHmmModel, out: &Path) {
    let c = model.clusters();
    let gof = c.gof.map_or("n/a".to_string(), |g| format!("{:.4}", g));
    println!("snapshot: {}", out.display());
    println!("states: {}  gof: {}  patterns: {}  learned: {}", c.k(), gof, model.params().len(), model.n_learned());
    for (s, p) in model.params() {
        println!("pattern {}: gamma_u {} gamma_v {}", s, p.state_u.gamma(), p.state_v.gamma());
    }
}

fn cmd_fit(args: &Common) -> Result<()> {
    let config = args.resolve()?;
    let records = load_records(&config)?;
    let model = fit_model(&config, &records)?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    snapshot::save(&model, &out)?;
    print_fit_summary(&model, &out);
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ResponseForecast {
    pub response: String,
    pub y_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub sd: f64,
    /// Weight of the covariate model.
    pub weight: f64,
}

#[derive(Debug, Serialize)]
pub struct ForecastDocument {
    pub pattern: String,
    pub prev_state: usize,
    pub zero_knowledge: bool,
    pub responses: Vec<ResponseForecast>,
    pub covariance: Vec<Vec<f64>>,
}

impl ForecastDocument {
    pub fn new(step: &StepForecast, features: &FeatureConfig) -> Self {
        let f = &step.forecast;
        let sd = f.sd();
        let responses = features
            .responses
            .iter()
            .enumerate()
            .map(|(j, r)| ResponseForecast {
                response: r.alias().to_string(),
                y_hat: f.y_hat[j],
                lower: f.intervals[j][0],
                upper: f.intervals[j][1],
                sd: sd[j],
                weight: f.weights[j],
            })
            .collect();
        let m = f.y_hat.len();
        ForecastDocument {
            pattern: step.pattern.as_str().to_string(),
            prev_state: step.prev_state,
            zero_knowledge: step.zero_knowledge,
            responses,
            covariance: (0..m).map(|i| f.sigma_hat.row(i).to_vec()).collect(),
        }
    }
}

/// Fields the next-period file must carry for `features`.
fn needed_fields(features: &FeatureConfig) -> Vec<Field> {
    use opforecast_core::features::Covariate;
    features
        .z_spec
        .iter()
        .chain(&features.w_spec)
        .filter_map(|c| match c {
            Covariate::Field(f) => Some(*f),
            _ => None,
        })
        .collect()
}

pub fn forecast_document(model: &mut IoHmmModel, next: &ProductionRecord) -> Result<ForecastDocument> {
    let step = model.forecast_next(next)?;
    Ok(ForecastDocument::new(&step, &model.config().features))
}

fn cmd_forecast(args: &ForecastArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let mut model = snapshot::load(&args.model)?;
    let file = File::open(&args.data).map_err(|e| AppError::io(&args.data, e))?;
    let needed = needed_fields(&model.config().features);
    let Dataset { records, row_errors } = parse_dataset(file, &config.columns, Schema::Covariates, &needed)?;
    if let Some(e) = row_errors.first() {
        return Err(Error::Input(format!("line {}: {}", e.line, e.message)).into());
    }
    if records.len() != 1 {
        return Err(Error::Input(format!("expected one next-period row, got {}", records.len())).into());
    }
    let doc = forecast_document(&mut model, &records[0])?;
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match &args.out {
        Some(p) => fs::write(p, text).map_err(|e| AppError::io(p, e)),
        None => emit(&text),
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(AppError::io("<stdout>", e)),
        _ => Ok(()),
    }
}

/// Runs every (fold, model) job and merges the results in key order.
pub fn evaluate(config: &RunConfig, records: &[ProductionRecord]) -> Result<MetricsReport> {
    let settings = config.eval_settings(records)?;
    let specs = config.model_specs()?;
    let folds = week_folds(records)?;
    let jobs: Vec<_> = folds.iter().flat_map(|f| specs.iter().map(move |s| (f, *s))).collect();
    let results = if config.parallel {
        jobs.par_iter().map(|(f, s)| run_job(records, f, *s, &settings)).collect()
    } else {
        jobs.iter().map(|(f, s)| run_job(records, f, *s, &settings)).collect()
    };
    Ok(MetricsReport::assemble(results, records, &settings.model.features.responses)?)
}

fn cmd_evaluate(args: &Common) -> Result<()> {
    let config = args.resolve()?;
    let records = load_records(&config)?;
    let report = evaluate(&config, &records)?;
    let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("report"));
    fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
    write_report(create(&dir.join("report.csv"))?, &report, ReportFormat::Csv)?;
    write_report(create(&dir.join("report.json"))?, &report, ReportFormat::Json)?;
    let responses = config.model_config(&records)?.features.responses;
    write_summary(create(&dir.join("summary.csv"))?, &response_summary(&records, &responses)?)?;
    println!("{} cells, {} warnings written to {}", report.cells.len(), report.warnings.len(), dir.display());
    Ok(())
}

pub fn simulation_spec(args: &SimulateArgs) -> Result<SyntheticSpec> {
    let mut spec = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| AppError::io(p, e))?;
            toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {}", p.display(), e)))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(n) = args.periods {
        spec.periods = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let data = simulation_spec(args)?.generate()?;
    write_dataset(create(&args.out)?, &data.records)?;
    println!("{} periods written to {}", data.records.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct PatternSummary {
    pattern: String,
    gamma_u: f64,
    gamma_v: f64,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    coefficients_u: Vec<Vec<f64>>,
    coefficients_v: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    states: usize,
    gof: Option<f64>,
    centroids: Vec<Vec<f64>>,
    counts: Vec<u64>,
    n_learned: u64,
    last_state: Option<usize>,
    patterns: Vec<PatternSummary>,
}

fn rows(m: &opforecast_core::Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn model_summary(model: &IoHmmModel) -> Result<ModelSummary> {
    let d = model.dirichlet();
    let patterns = model
        .params()
        .iter()
        .map(|(s, p)| {
            let transition =
                (0..model.states()).map(|k| d.transition_probabilities(s, k)).collect::<std::result::Result<_, _>>()?;
            Ok(PatternSummary {
                pattern: s.as_str().to_string(),
                gamma_u: p.state_u.gamma(),
                gamma_v: p.state_v.gamma(),
                initial: d.initial_probabilities(s),
                transition,
                coefficients_u: rows(p.state_u.coefficients()),
                coefficients_v: rows(p.state_v.coefficients()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c = model.clusters();
    Ok(ModelSummary {
        states: c.k(),
        gof: c.gof,
        centroids: c.centroids_original(),
        counts: c.counts.clone(),
        n_learned: model.n_learned(),
        last_state: model.last_state(),
        patterns,
    })
}

#[derive(Debug, Serialize)]
struct DataSummary {
    records: usize,
    row_errors: usize,
    weeks: Vec<String>,
    shift_codes: Vec<String>,
    responses: Vec<opforecast_core::evaluation::ResponseSummary>,
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let text = if let Some(p) = &args.model {
        serde_json::to_string_pretty(&model_summary(&snapshot::load(p)?)?)?
    } else {
        let mut config = load_config(args.config.as_deref())?;
        config.data = args.data.clone();
        let Dataset { records, row_errors } = read_dataset(config.data_path()?, &config.columns)?;
        let responses = config.model_config(&records)?.features.responses;
        let mut weeks: Vec<String> =
            records.iter().map(|r| opforecast_core::evaluation::week_key(r.date)).collect();
        weeks.dedup();
        serde_json::to_string_pretty(&DataSummary {
            records: records.len(),
            row_errors: row_errors.len(),
            weeks,
            shift_codes: opforecast_core::features::shift_codes(&records),
            responses: if records.is_empty() { Vec::new() } else { response_summary(&records, &responses)? },
        })?
    };
    emit(&(text + "\n"))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}
