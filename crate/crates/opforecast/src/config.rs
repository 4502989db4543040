//! Run configuration: a TOML file whose values can be overridden by flags.

use std::fs;
use std::path::{Path, PathBuf};

use opforecast_core::clustering::AutoKSettings;
use opforecast_core::evaluation::{default_model_specs, EvalSettings, ModelSpec};
use opforecast_core::features::{shift_codes, Covariate, FeatureConfig, MAX_LAGS};
use opforecast_core::iohmm::{ModelConfig, DEFAULT_LAMBDA_U, DEFAULT_LAMBDA_V};
use opforecast_core::record::{Field, ProductionRecord};
use serde::{Deserialize, Serialize};

use crate::dataset::ColumnMapping;
use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub columns: ColumnMapping,
    pub lags: usize,
    pub responses: Vec<String>,
    pub classification: Vec<String>,
    /// Numeric columns appended to the continuous covariates.
    pub extra_covariates: Vec<String>,
    pub lambda_u: f64,
    pub lambda_v: f64,
    pub threshold: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub zero_knowledge: bool,
    /// Model ids for evaluation; empty means the full default list.
    pub models: Vec<String>,
    /// Evaluate folds and models on a thread pool.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let k = AutoKSettings::default();
        RunConfig {
            data: None,
            out: None,
            seed: 0,
            columns: ColumnMapping::default(),
            lags: 1,
            responses: vec!["OpT".into(), "NOpT".into()],
            classification: ["av", "pf", "oee", "OT", "rcs", "TU"].map(String::from).to_vec(),
            extra_covariates: Vec::new(),
            lambda_u: DEFAULT_LAMBDA_U,
            lambda_v: DEFAULT_LAMBDA_V,
            threshold: k.threshold,
            k_min: k.k_min,
            k_max: k.k_max,
            restarts: k.restarts,
            zero_knowledge: false,
            models: Vec::new(),
            parallel: true,
        }
    }
}

fn fields(names: &[String]) -> Result<Vec<Field>> {
    names
        .iter()
        .map(|n| n.parse::<Field>().map_err(|_| AppError::Config(format!("unknown column `{}`", n))))
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {}", path.display(), e)))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("lambda_u", self.lambda_u), ("lambda_v", self.lambda_v)] {
            if !(l > 0.0 && l <= 1.0) {
                return Err(AppError::Config(format!("{} = {} outside (0, 1]", name, l)));
            }
        }
        if self.lags > MAX_LAGS {
            return Err(AppError::Config(format!("lags = {} outside 0..={}", self.lags, MAX_LAGS)));
        }
        self.clustering().validate()?;
        if self.responses.is_empty() || self.classification.is_empty() {
            return Err(AppError::Config("responses and classification must not be empty".into()));
        }
        fields(&self.responses)?;
        fields(&self.classification)?;
        fields(&self.extra_covariates)?;
        self.model_specs()?;
        self.columns.validate()
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| AppError::Config("no dataset given (--data or `data`)".into()))
    }

    pub fn clustering(&self) -> AutoKSettings {
        AutoKSettings {
            threshold: self.threshold,
            k_min: self.k_min,
            k_max: self.k_max,
            restarts: self.restarts,
            seed: self.seed,
            ..AutoKSettings::default()
        }
    }

    /// Standard feature layout for the shift codes present in `records`,
    /// with the configured responses and classification variables.
    pub fn model_config(&self, records: &[ProductionRecord]) -> Result<ModelConfig> {
        let mut features = FeatureConfig::standard(&shift_codes(records), self.lags);
        features.responses = fields(&self.responses)?;
        features.t_spec = fields(&self.classification)?;
        features.w_spec.extend(fields(&self.extra_covariates)?.into_iter().map(Covariate::Field));
        let config = ModelConfig {
            features,
            lambda_u: self.lambda_u,
            lambda_v: self.lambda_v,
            zero_knowledge: self.zero_knowledge,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn eval_settings(&self, records: &[ProductionRecord]) -> Result<EvalSettings> {
        Ok(EvalSettings { model: self.model_config(records)?, clustering: self.clustering() })
    }

    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        if self.models.is_empty() {
            return Ok(default_model_specs());
        }
        let mut specs = self.models.iter().map(|m| m.parse::<ModelSpec>()).collect::<std::result::Result<Vec<_>, _>>()?;
        specs.sort();
        specs.dedup();
        Ok(specs)
    }
}
