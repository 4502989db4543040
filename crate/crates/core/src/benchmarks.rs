//! Reference forecasters: persistence, VARX(q) fitted by least squares, and
//! the no-lags and univariate variants of the main model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clustering::AutoKSettings;
use crate::error::{Error, Result};
use crate::features::build_features;
use crate::iohmm::{IoHmmModel, ModelConfig};
use crate::linalg::{least_squares, Matrix};
use crate::record::ProductionRecord;

/// Repeats the last observation.
pub fn persistence_forecast(y_prev: Option<&[f64]>) -> Result<Vec<f64>> {
    y_prev
        .map(|y| y.to_vec())
        .ok_or_else(|| Error::ForecastUnavailable("persistence needs one prior observation".into()))
}

/// Persistence with a static interval: the covariance of first differences
/// over the training runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceModel {
    pub sigma: Matrix,
}

impl PersistenceModel {
    pub fn fit(runs: &[Vec<Vec<f64>>]) -> Result<Self> {
        let m = runs.iter().flat_map(|r| r.first()).map(|y| y.len()).next().unwrap_or(0);
        let diffs: Vec<Vec<f64>> = runs
            .iter()
            .flat_map(|r| r.windows(2))
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
        if m == 0 || diffs.is_empty() {
            return Err(Error::InsufficientHistory { needed: 2, got: runs.iter().map(|r| r.len()).sum() });
        }
        let mut sigma = Matrix::zeros(m, m);
        for d in &diffs {
            for i in 0..m {
                for j in 0..m {
                    sigma[(i, j)] += d[i] * d[j];
                }
            }
        }
        Ok(PersistenceModel { sigma: sigma.scale(1.0 / diffs.len() as f64) })
    }

    pub fn forecast(&self, y_prev: Option<&[f64]>) -> Result<(Vec<f64>, Matrix)> {
        Ok((persistence_forecast(y_prev)?, self.sigma.clone()))
    }
}

/// Chronological responses `y` with their exogenous vectors `g`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarxSeries {
    pub y: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
}

impl VarxSeries {
    /// Responses and the continuous covariates without lags.
    pub fn from_records(records: &[ProductionRecord], config: &ModelConfig) -> Result<Self> {
        let rows = build_features(records, &config.features.without_lags())?;
        Ok(VarxSeries {
            y: rows.iter().map(|r| r.y.clone()).collect(),
            g: rows.into_iter().map(|r| r.w).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// `y_n = phi0 + sum_j phi_j y_{n-j} + beta g_n + eta_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarxModel {
    pub q: usize,
    pub phi0: Vec<f64>,
    /// `phi[j - 1][(i, k)]` is the effect of lag `j` of response `k` on response `i`.
    pub phi: Vec<Matrix>,
    /// `m x |g|`.
    pub beta: Matrix,
    pub sigma_eta: Matrix,
}

fn column_name(j: usize, q: usize, m: usize) -> String {
    match j {
        0 => "intercept".into(),
        j if j <= q * m => format!("y{}.lag{}", (j - 1) % m + 1, (j - 1) / m + 1),
        j => format!("g{}", j - q * m),
    }
}

/// Design row `[1, y_{n-1}, ..., y_{n-q}, g_n]`.
fn design_row(lags: &[&[f64]], g: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 + lags.iter().map(|l| l.len()).sum::<usize>() + g.len());
    row.push(1.0);
    for l in lags {
        row.extend_from_slice(l);
    }
    row.extend_from_slice(g);
    row
}

/// Per-equation least squares over every series. The first `q` periods of
/// each series only supply lags.
pub fn fit_varx(series: &[VarxSeries], q: usize) -> Result<VarxModel> {
    let first = series
        .iter()
        .find(|s| !s.is_empty())
        .ok_or_else(|| Error::InsufficientHistory { needed: q + 1, got: 0 })?;
    let m = first.y[0].len();
    let r = first.g[0].len();
    let p = 1 + q * m + r;
    let mut x_rows = Vec::new();
    let mut y_rows = Vec::new();
    for s in series {
        if s.y.len() != s.g.len() {
            return Err(Error::Dimension(format!("{} responses with {} covariate rows", s.y.len(), s.g.len())));
        }
        for n in q..s.len() {
            if s.y[n].len() != m || s.g[n].len() != r {
                return Err(Error::Dimension(format!("VARX row {} has |y|={} |g|={}", n, s.y[n].len(), s.g[n].len())));
            }
            let lags: Vec<&[f64]> = (1..=q).map(|j| s.y[n - j].as_slice()).collect();
            x_rows.push(design_row(&lags, &s.g[n]));
            y_rows.push(s.y[n].clone());
        }
    }
    let n_eff = x_rows.len();
    if n_eff <= p {
        return Err(Error::InsufficientHistory { needed: p + 1 + q, got: n_eff + q });
    }
    let x = Matrix::from_rows(&x_rows)?;
    let y = Matrix::from_rows(&y_rows)?;
    let fit = least_squares(&x, &y).map_err(|cols| {
        let names: Vec<String> = cols.iter().map(|c| column_name(*c, q, m)).collect();
        Error::Singular(format!("collinear VARX design columns: {}", names.join(", ")))
    })?;
    let b = &fit.coefficients;
    let block = |start: usize, width: usize| {
        let mut out = Matrix::zeros(m, width);
        for i in 0..m {
            for k in 0..width {
                out[(i, k)] = b[(start + k, i)];
            }
        }
        out
    };
    let e = &fit.residuals;
    let mut sigma_eta = e.transpose().matmul(e)?.scale(1.0 / (n_eff - p) as f64);
    sigma_eta.symmetrize();
    Ok(VarxModel {
        q,
        phi0: b.row(0).to_vec(),
        phi: (0..q).map(|j| block(1 + j * m, m)).collect(),
        beta: block(1 + q * m, r),
        sigma_eta,
    })
}

impl VarxModel {
    pub fn responses(&self) -> usize {
        self.phi0.len()
    }

    /// `lags[0]` is the most recent response vector.
    pub fn predict(&self, lags: &[Vec<f64>], g: &[f64]) -> Result<(Vec<f64>, Matrix)> {
        let m = self.responses();
        if lags.len() != self.q {
            return Err(Error::Dimension(format!("VARX({}) needs {} lag vectors, got {}", self.q, self.q, lags.len())));
        }
        if g.len() != self.beta.cols() || lags.iter().any(|l| l.len() != m) {
            return Err(Error::Dimension("VARX input dimensions".into()));
        }
        let mut y = self.phi0.clone();
        for (phi, lag) in self.phi.iter().zip(lags) {
            for (yi, v) in y.iter_mut().zip(phi.mul_vec(lag)?) {
                *yi += v;
            }
        }
        for (yi, v) in y.iter_mut().zip(self.beta.mul_vec(g)?) {
            *yi += v;
        }
        Ok((y, self.sigma_eta.clone()))
    }
}

pub fn no_lags_variant(config: &ModelConfig) -> ModelConfig {
    ModelConfig { features: config.features.without_lags(), ..config.clone() }
}

/// One single-response configuration per response, sharing every covariate.
pub fn univariate_configs(config: &ModelConfig) -> Vec<ModelConfig> {
    config
        .features
        .responses
        .iter()
        .map(|f| {
            let mut c = config.clone();
            c.features.responses = alloc::vec![*f];
            c
        })
        .collect()
}

pub fn univariate_suite(
    runs: &[&[ProductionRecord]],
    config: &ModelConfig,
    clustering: &AutoKSettings,
) -> Result<Vec<IoHmmModel>> {
    univariate_configs(config).iter().map(|c| IoHmmModel::fit(runs, c, clustering)).collect()
}
