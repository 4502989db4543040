//! The input-output hidden Markov model.
//!
//! For every discrete covariate pattern `s` the model keeps two recursive
//! estimators of the responses: a covariate model on `u = [1, w]` and a
//! state model on `v`, the Dirichlet expectation of the next hidden state.
//! Their forecasts are merged per response with minimum-variance weights.
//!
//! Learning one period (`learn_step`):
//!
//! 1. `s <- z`, `b <- a(s)` on a sequence start, else `alpha(s)_k`.
//! 2. update the covariate model with `(u, y)` and the state model with
//!    `(b / sum(b), y)`.
//! 3. increment the pseudo-count of the observed state.
//!
//! Forecasting the next period (`forecast_step`) first assigns the latest
//! closed period to its nearest centroid and moves that centroid, then
//! combines the two conditional means.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clustering::{fit_auto_k, AutoKSettings, ClusterModel};
use crate::dirichlet::{DirichletTable, PatternKey, StateContext};
use crate::error::{Error, Result};
use crate::estimator::AdaptiveState;
use crate::features::{build_features, build_features_after, FeatureConfig, FeatureVectors};
use crate::linalg::Matrix;
use crate::metrics::Z95;
use crate::record::ProductionRecord;

pub const DEFAULT_LAMBDA_U: f64 = 0.99;
pub const DEFAULT_LAMBDA_V: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub features: FeatureConfig,
    pub lambda_u: f64,
    pub lambda_v: f64,
    /// Forecast unseen patterns as zero with a flag instead of failing.
    #[serde(default)]
    pub zero_knowledge: bool,
}

impl ModelConfig {
    pub fn new(features: FeatureConfig) -> Self {
        ModelConfig { features, lambda_u: DEFAULT_LAMBDA_U, lambda_v: DEFAULT_LAMBDA_V, zero_knowledge: false }
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        for (name, l) in [("lambda_u", self.lambda_u), ("lambda_v", self.lambda_v)] {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::Config(format!("{} = {} outside (0, 1]", name, l)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternParams {
    pub state_u: AdaptiveState,
    pub state_v: AdaptiveState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedForecast {
    pub y_hat: Vec<f64>,
    pub sigma_hat: Matrix,
    /// Weight of the covariate model per response.
    pub weights: Vec<f64>,
    pub intervals: Vec<[f64; 2]>,
    /// Component forecasts `u H_u` and `v H_v`.
    pub mean_u: Vec<f64>,
    pub mean_v: Vec<f64>,
}

impl CombinedForecast {
    /// Marginal standard deviations.
    pub fn sd(&self) -> Vec<f64> {
        self.sigma_hat.diagonal().iter().map(|v| libm::sqrt(v.max(0.0))).collect()
    }

    fn zero(m: usize) -> Self {
        CombinedForecast {
            y_hat: vec![0.0; m],
            sigma_hat: Matrix::zeros(m, m),
            weights: vec![0.5; m],
            intervals: vec![[0.0, 0.0]; m],
            mean_u: vec![0.0; m],
            mean_v: vec![0.0; m],
        }
    }
}

/// A forecast together with the model context that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepForecast {
    pub forecast: CombinedForecast,
    pub pattern: PatternKey,
    /// State assigned to the latest closed period.
    pub prev_state: usize,
    /// The pattern was never trained; the forecast is a zero placeholder.
    pub zero_knowledge: bool,
}

/// Minimum-variance weights `sigma2_v / (sigma2_u + sigma2_v)` per response,
/// 1/2 where both variances vanish.
pub fn combination_weights(sigma_u: &Matrix, sigma_v: &Matrix) -> Result<Vec<f64>> {
    if sigma_u.shape() != sigma_v.shape() || sigma_u.rows() != sigma_u.cols() {
        return Err(Error::Dimension(format!(
            "covariances of shape {:?} and {:?}",
            sigma_u.shape(),
            sigma_v.shape()
        )));
    }
    sigma_u
        .diagonal()
        .into_iter()
        .zip(sigma_v.diagonal())
        .map(|(su, sv)| {
            if !(su >= 0.0 && sv >= 0.0) {
                return Err(Error::NotPsd(su.min(sv)));
            }
            Ok(if su + sv == 0.0 { 0.5 } else { sv / (su + sv) })
        })
        .collect()
}

/// `y = u H_u D + v H_v (I - D)`, `Sigma = D Sigma_u D + (I - D) Sigma_v (I - D)`.
pub fn combine(u: &[f64], v: &[f64], state_u: &AdaptiveState, state_v: &AdaptiveState) -> Result<CombinedForecast> {
    if !state_u.is_trained() && !state_v.is_trained() {
        return Err(Error::ForecastUnavailable("both estimators are untrained".into()));
    }
    if state_u.responses() != state_v.responses() {
        return Err(Error::Dimension("component models disagree on the response count".into()));
    }
    let su = state_u.checked_covariance()?;
    let sv = state_v.checked_covariance()?;
    let d = combination_weights(&su, &sv)?;
    let mean_u = state_u.predict_mean(u)?;
    let mean_v = state_v.predict_mean(v)?;
    let m = d.len();
    let y_hat: Vec<f64> = (0..m).map(|j| d[j] * mean_u[j] + (1.0 - d[j]) * mean_v[j]).collect();
    let mut sigma_hat = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            sigma_hat[(i, j)] = d[i] * d[j] * su[(i, j)] + (1.0 - d[i]) * (1.0 - d[j]) * sv[(i, j)];
        }
    }
    let intervals = (0..m)
        .map(|j| {
            let half = Z95 * libm::sqrt(sigma_hat[(j, j)].max(0.0));
            [y_hat[j] - half, y_hat[j] + half]
        })
        .collect();
    Ok(CombinedForecast { y_hat, sigma_hat, weights: d, intervals, mean_u, mean_v })
}

/// One forecastable period of an online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineStep {
    /// Position of the period in the stream.
    pub index: usize,
    /// `None` when the pattern had no trained estimators.
    pub forecast: Option<StepForecast>,
    pub y: Vec<f64>,
    pub prev_state: usize,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoHmmModel {
    config: ModelConfig,
    dirichlet: DirichletTable,
    clusters: ClusterModel,
    params: BTreeMap<PatternKey, PatternParams>,
    last_state: Option<usize>,
    last_forecast: Option<CombinedForecast>,
    /// Most recent records, the lag and classification source for the next forecast.
    context: Vec<ProductionRecord>,
    n_learned: u64,
}

impl IoHmmModel {
    pub fn new(config: ModelConfig, clusters: ClusterModel) -> Result<Self> {
        config.validate()?;
        if clusters.dim() != config.features.t_spec.len() {
            return Err(Error::Dimension(format!(
                "cluster model of dimension {} for {} classification variables",
                clusters.dim(),
                config.features.t_spec.len()
            )));
        }
        let dirichlet = DirichletTable::new(clusters.k(), config.features.d())?;
        Ok(IoHmmModel {
            config,
            dirichlet,
            clusters,
            params: BTreeMap::new(),
            last_state: None,
            last_forecast: None,
            context: Vec::new(),
            n_learned: 0,
        })
    }

    /// Fits the clusters on every training record, labels the records and
    /// learns each run in order. Runs are contiguous stretches of data; each
    /// has its own lag warm-up.
    pub fn fit(runs: &[&[ProductionRecord]], config: &ModelConfig, clustering: &AutoKSettings) -> Result<Self> {
        config.validate()?;
        let q = config.features.q;
        if !runs.iter().any(|r| r.len() > q) {
            let got = runs.iter().map(|r| r.len()).max().unwrap_or(0);
            return Err(Error::InsufficientHistory { needed: q + 1, got });
        }
        let points: Vec<Vec<f64>> = runs
            .iter()
            .flat_map(|r| r.iter())
            .map(|r| config.features.classification_of(r))
            .collect();
        let clusters = fit_auto_k(&points, clustering)?;
        Self::fit_with_clusters(runs, config, clusters)
    }

    pub fn fit_with_clusters(runs: &[&[ProductionRecord]], config: &ModelConfig, clusters: ClusterModel) -> Result<Self> {
        let mut model = IoHmmModel::new(config.clone(), clusters)?;
        for run in runs {
            model.learn_run(run)?;
        }
        Ok(model)
    }

    fn learn_run(&mut self, run: &[ProductionRecord]) -> Result<()> {
        if run.len() <= self.config.features.q {
            log::debug!("skipping a training run of {} records", run.len());
            return Ok(());
        }
        let labels = run
            .iter()
            .map(|r| self.clusters.assign(&self.config.features.classification_of(r)))
            .collect::<Result<Vec<usize>>>()?;
        let rows = build_features(run, &self.config.features)?;
        for row in &rows {
            let prev = row.index.checked_sub(1).map(|i| labels[i]);
            let context = state_context(row, prev)?;
            self.learn_step(row, context, labels[row.index])?;
        }
        self.set_context(&[], run);
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn dirichlet(&self) -> &DirichletTable {
        &self.dirichlet
    }

    pub fn clusters(&self) -> &ClusterModel {
        &self.clusters
    }

    pub fn params(&self) -> &BTreeMap<PatternKey, PatternParams> {
        &self.params
    }

    pub fn last_state(&self) -> Option<usize> {
        self.last_state
    }

    pub fn last_forecast(&self) -> Option<&CombinedForecast> {
        self.last_forecast.as_ref()
    }

    pub fn context(&self) -> &[ProductionRecord] {
        &self.context
    }

    pub fn n_learned(&self) -> u64 {
        self.n_learned
    }

    pub fn states(&self) -> usize {
        self.clusters.k()
    }

    fn check_row(&self, row: &FeatureVectors) -> Result<()> {
        let f = &self.config.features;
        if row.z.len() != f.d() || row.w.len() != f.w_len() || row.y.len() != f.m() {
            return Err(Error::Dimension(format!(
                "feature row with |z|={} |w|={} |y|={}, model expects {} {} {}",
                row.z.len(),
                row.w.len(),
                row.y.len(),
                f.d(),
                f.w_len(),
                f.m()
            )));
        }
        Ok(())
    }

    fn fresh_params(&self) -> Result<PatternParams> {
        let m = self.config.features.m();
        Ok(PatternParams {
            state_u: AdaptiveState::new(self.config.features.u_len(), m, self.config.lambda_u)?,
            state_v: AdaptiveState::new(self.states(), m, self.config.lambda_v)?,
        })
    }

    /// One learning step for the period described by `row`, which was in
    /// state `state` and followed `context`.
    pub fn learn_step(&mut self, row: &FeatureVectors, context: StateContext, state: usize) -> Result<()> {
        self.check_row(row)?;
        if state >= self.states() {
            return Err(Error::StateIndex { index: state, states: self.states() });
        }
        let s = PatternKey::from_bits(&row.z);
        let v = self.dirichlet.expected_state_vector(&s, context)?;
        let u = row.u();
        if !self.params.contains_key(&s) {
            let fresh = self.fresh_params()?;
            self.params.insert(s.clone(), fresh);
        }
        let p = self.params.get_mut(&s).expect("inserted above");
        p.state_u.update(&u, &row.y)?;
        p.state_v.update(&v, &row.y)?;
        self.dirichlet.observe(&s, context, state)?;
        self.last_state = Some(state);
        self.n_learned += 1;
        Ok(())
    }

    /// Assigns the latest closed period to its nearest centroid and moves
    /// that centroid towards it.
    pub fn assign_and_update(&mut self, t_prev: &[f64]) -> Result<usize> {
        let k = self.clusters.assign(t_prev)?;
        self.clusters.update_centroid(k, t_prev)?;
        Ok(k)
    }

    /// Forecast of `next` given that the latest closed period was in state `prev_state`.
    pub fn forecast_from_state(&mut self, prev_state: usize, next: &FeatureVectors) -> Result<StepForecast> {
        let f = &self.config.features;
        if next.z.len() != f.d() || next.w.len() != f.w_len() {
            return Err(Error::Dimension(format!("forecast row with |z|={} |w|={}", next.z.len(), next.w.len())));
        }
        if prev_state >= self.states() {
            return Err(Error::StateIndex { index: prev_state, states: self.states() });
        }
        let s = PatternKey::from_bits(&next.z);
        let context = if next.begins_sequence() { StateContext::BeginsSequence } else { StateContext::Previous(prev_state) };
        let v = self.dirichlet.expected_state_vector(&s, context)?;
        let trained = self.params.get(&s).filter(|p| p.state_u.is_trained() || p.state_v.is_trained());
        let (forecast, zero_knowledge) = match trained {
            Some(p) => (combine(&next.u(), &v, &p.state_u, &p.state_v)?, false),
            None if self.config.zero_knowledge => (CombinedForecast::zero(f.m()), true),
            None => return Err(Error::ForecastUnavailable(format!("pattern `{}` has never been observed", s))),
        };
        self.last_forecast = Some(forecast.clone());
        Ok(StepForecast { forecast, pattern: s, prev_state, zero_knowledge })
    }

    /// Assign, update the centroid, then forecast.
    pub fn forecast_step(&mut self, t_prev: &[f64], next: &FeatureVectors) -> Result<StepForecast> {
        let k = self.assign_and_update(t_prev)?;
        self.forecast_from_state(k, next)
    }

    /// Forecast of one upcoming period using the stored context as history.
    /// Response columns of `next` are ignored.
    pub fn forecast_next(&mut self, next: &ProductionRecord) -> Result<StepForecast> {
        let q = self.config.features.q;
        let last = match self.context.last() {
            Some(r) if self.context.len() >= q => r,
            _ => return Err(Error::InsufficientHistory { needed: q.max(1), got: self.context.len() }),
        };
        let t_prev = self.config.features.classification_of(last);
        let rows = build_features_after(&self.context, core::slice::from_ref(next), &self.config.features)?;
        self.forecast_step(&t_prev, &rows[0])
    }

    /// Forecasts and learns every period of `stream` in turn, with `history`
    /// as the preceding records. Without history the first period with
    /// enough lags is used for learning only.
    pub fn run_online(&mut self, history: &[ProductionRecord], stream: &[ProductionRecord]) -> Result<Vec<OnlineStep>> {
        let rows = build_features_after(history, stream, &self.config.features)?;
        let record = |global: usize| -> &ProductionRecord {
            if global < history.len() {
                &history[global]
            } else {
                &stream[global - history.len()]
            }
        };
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let global = history.len() + row.index;
            let prev_t = global.checked_sub(1).map(|g| self.config.features.classification_of(record(g)));
            let learn_only = history.is_empty() && i == 0;
            let (forecast, prev_state) = match prev_t {
                Some(t) if !learn_only => {
                    let k = self.assign_and_update(&t)?;
                    match self.forecast_from_state(k, row) {
                        Ok(f) => (Some(f), Some(k)),
                        Err(Error::ForecastUnavailable(_)) => (None, Some(k)),
                        Err(e) => return Err(e),
                    }
                }
                Some(t) => (None, Some(self.clusters.assign(&t)?)),
                None => (None, None),
            };
            let state = self.clusters.assign(&row.t)?;
            self.learn_step(row, state_context(row, prev_state)?, state)?;
            if !learn_only {
                out.push(OnlineStep {
                    index: row.index,
                    forecast,
                    y: row.y.clone(),
                    prev_state: prev_state.expect("forecast rows have a predecessor"),
                    state,
                });
            }
        }
        self.set_context(history, stream);
        Ok(out)
    }

    fn set_context(&mut self, history: &[ProductionRecord], stream: &[ProductionRecord]) {
        let keep = self.config.features.q.max(1);
        let mut tail: Vec<ProductionRecord> = history.iter().chain(stream).rev().take(keep).cloned().collect();
        tail.reverse();
        self.context = tail;
    }

    /// Structural checks for a deserialised model.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.dirichlet.validate()?;
        self.clusters.validate()?;
        let f = &self.config.features;
        let k = self.clusters.k();
        if self.dirichlet.states() != k || self.dirichlet.pattern_len() != f.d() || self.clusters.dim() != f.t_spec.len() {
            return Err(Error::Dimension("tables, clusters and feature configuration disagree".into()));
        }
        for (s, p) in &self.params {
            p.state_u.validate()?;
            p.state_v.validate()?;
            if s.len() != f.d()
                || p.state_u.predictors() != f.u_len()
                || p.state_v.predictors() != k
                || p.state_u.responses() != f.m()
                || p.state_v.responses() != f.m()
            {
                return Err(Error::Dimension(format!("estimators for pattern `{}`", s)));
            }
        }
        if self.last_state.is_some_and(|s| s >= k) {
            return Err(Error::StateIndex { index: self.last_state.unwrap_or(0), states: k });
        }
        Ok(())
    }
}

/// Sequence start when the row begins a shift, else the previous state.
pub fn state_context(row: &FeatureVectors, prev_state: Option<usize>) -> Result<StateContext> {
    if row.begins_sequence() {
        return Ok(StateContext::BeginsSequence);
    }
    prev_state
        .map(StateContext::Previous)
        .ok_or(Error::InsufficientHistory { needed: 1, got: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{oee_band, OeeBand, Standardizer};
    use crate::features::Covariate;
    use crate::record::Field;
    use crate::sequence::fixtures::same_shift;
    use alloc::string::ToString;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Scalar state with `H = 0` and `Sigma = sigma2`: one update on `u = 0`.
    fn scalar_state(sigma2: f64) -> AdaptiveState {
        let mut s = AdaptiveState::new(1, 1, 1.0).unwrap();
        s.update(&[0.0], &[libm::sqrt(sigma2)]).unwrap();
        s
    }

    #[test]
    fn weights_examples() {
        let w = |a: f64, b: f64| combination_weights(&Matrix::diag(&[a]), &Matrix::diag(&[b])).unwrap()[0];
        assert_eq!(w(2.0, 2.0), 0.5);
        assert_eq!(w(1.0, 0.0), 0.0);
        assert_eq!(w(1.0, 3.0), 0.75);
        assert_eq!(w(0.0, 0.0), 0.5);
        assert!(combination_weights(&Matrix::diag(&[-1.0]), &Matrix::diag(&[1.0])).is_err());
    }

    #[test]
    fn scalar_combination_variance() {
        let su = scalar_state(1.0);
        let sv = scalar_state(3.0);
        assert_abs_diff_eq!(su.covariance()[(0, 0)], 1.0, epsilon = 1e-12);
        let c = combine(&[1.0], &[1.0], &su, &sv).unwrap();
        assert_abs_diff_eq!(c.weights[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(c.sigma_hat[(0, 0)], 0.75, epsilon = 1e-12);
        let best = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .min_by(|a, b| {
                let f = |d: f64| d * d + (1.0 - d) * (1.0 - d) * 3.0;
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert_abs_diff_eq!(best, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn untrained_pair_is_unavailable() {
        let s = AdaptiveState::new(1, 1, 1.0).unwrap();
        assert!(matches!(combine(&[1.0], &[1.0], &s, &s), Err(Error::ForecastUnavailable(_))));
    }

    #[test]
    fn interval_half_width() {
        let su = scalar_state(1.0);
        let sv = scalar_state(3.0);
        let c = combine(&[1.0], &[1.0], &su, &sv).unwrap();
        let half = (c.intervals[0][1] - c.intervals[0][0]) / 2.0;
        assert_abs_diff_eq!(half, 1.96 * 0.75f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.sd()[0], 0.75f64.sqrt(), epsilon = 1e-12);
    }

    fn identity_clusters(centroids: &[f64]) -> ClusterModel {
        let c: Vec<Vec<f64>> = centroids.iter().map(|v| vec![*v]).collect();
        ClusterModel::from_centroids(&c, Standardizer::identity(1)).unwrap()
    }

    fn single_config(q: usize) -> ModelConfig {
        ModelConfig::new(FeatureConfig {
            q,
            responses: vec![Field::OpT],
            z_spec: vec![Covariate::ShiftCode("M".into())],
            w_spec: vec![],
            t_spec: vec![Field::Oee],
        })
    }

    #[test]
    fn first_learning_step() {
        let rows = same_shift(1);
        let cfg = single_config(0);
        let mut m = IoHmmModel::new(cfg.clone(), identity_clusters(&[0.0, 1.0])).unwrap();
        let fv = build_features(&rows, &cfg.features).unwrap();
        m.learn_step(&fv[0], StateContext::BeginsSequence, 1).unwrap();
        let s = PatternKey::from_bits(&fv[0].z);
        assert_eq!(m.dirichlet().counts(&s).initial, vec![0.5, 1.5]);
        assert_eq!(m.dirichlet().counts(&s).transitions.row(1), &[0.5, 0.5]);
        // The state model saw the pre-observation expectation [1/2, 1/2].
        let p = &m.params()[&s];
        let h = p.state_v.coefficients();
        assert_abs_diff_eq!(h[(0, 0)], h[(1, 0)], epsilon = 1e-15);
        assert_eq!(p.state_u.gamma(), 1.0);
    }

    #[test]
    fn patterns_update_disjoint_estimators() {
        let mut rows = same_shift(2);
        rows[1].shift = "Mo A".into();
        let cfg = single_config(0);
        let mut m = IoHmmModel::new(cfg.clone(), identity_clusters(&[0.0, 1.0])).unwrap();
        let fv = build_features(&rows, &cfg.features).unwrap();
        m.learn_step(&fv[0], StateContext::BeginsSequence, 0).unwrap();
        m.learn_step(&fv[1], StateContext::BeginsSequence, 0).unwrap();
        assert_eq!(m.params().len(), 2);
        assert!(m.params().values().all(|p| p.state_u.n_updates() == 1));
    }

    /// Periods of one shift following `y_n = 2 + 0.5 y_{n-1}` from `y_0 = 0`.
    fn ar_stream(n: usize) -> Vec<ProductionRecord> {
        let mut rows = same_shift(1);
        let proto = rows.remove(0);
        let mut y = 0.0;
        (0..n)
            .map(|i| {
                let mut r = proto.clone();
                r.n = i as i64;
                let minutes = 10 * i as i64;
                r.date = proto.date + chrono::Duration::days(minutes / 1440);
                r.start = chrono::NaiveTime::from_hms_opt(0, 0, 0).unwrap() + chrono::Duration::minutes(minutes % 1440);
                r.opt = y;
                y = 2.0 + 0.5 * y;
                r
            })
            .collect()
    }

    #[test]
    fn autoregressive_fixed_point() {
        let mut cfg = single_config(1);
        cfg.lambda_u = 1.0;
        cfg.lambda_v = 1.0;
        let rows = ar_stream(500);
        let mut m = IoHmmModel::new(cfg, identity_clusters(&[0.67, 1000.0])).unwrap();
        let steps = m.run_online(&[], &rows).unwrap();
        assert_eq!(steps.len(), 500 - 1 - 1);
        let last = steps.last().unwrap().forecast.as_ref().unwrap();
        assert!((last.forecast.y_hat[0] - 4.0).abs() < 0.05, "{:?}", last.forecast.y_hat);
        assert!(steps.iter().all(|s| s.state == 0));
    }

    #[test]
    fn online_output_counts_forecastable_periods() {
        for q in 0..4 {
            let rows = same_shift(12);
            let mut m = IoHmmModel::new(single_config(q), identity_clusters(&[0.0, 1.0])).unwrap();
            assert_eq!(m.run_online(&[], &rows).unwrap().len(), 12 - q - 1);
        }
    }

    #[test]
    fn constant_stream_converges() {
        let mut rows = same_shift(60);
        for r in &mut rows {
            r.opt = 7.0;
        }
        let mut m = IoHmmModel::new(single_config(1), identity_clusters(&[0.0, 1.0])).unwrap();
        let steps = m.run_online(&[], &rows).unwrap();
        let tail: Vec<f64> = steps[40..]
            .iter()
            .map(|s| (s.forecast.as_ref().unwrap().forecast.y_hat[0] - 7.0).abs())
            .collect();
        assert!(tail.iter().all(|e| *e < 0.05), "{:?}", tail);
    }

    #[test]
    fn states_follow_oee_bands() {
        let levels = [0.95, 0.72, 0.5, 0.2];
        let mut rows = same_shift(40);
        for (i, r) in rows.iter_mut().enumerate() {
            r.oee = levels[(i / 3) % 4];
        }
        let mids = [0.925, 0.725, 0.5, 0.2];
        let mut m = IoHmmModel::new(single_config(0), identity_clusters(&mids)).unwrap();
        let steps = m.run_online(&[], &rows).unwrap();
        let band_index = |b: OeeBand| b as usize;
        for s in &steps {
            assert_eq!(s.state, band_index(oee_band(rows[s.index].oee).unwrap()));
        }
    }

    #[test]
    fn unseen_pattern() {
        let rows = same_shift(3);
        let cfg = single_config(0);
        let fv = build_features(&rows, &cfg.features).unwrap();
        let mut m = IoHmmModel::new(cfg.clone(), identity_clusters(&[0.0, 1.0])).unwrap();
        assert!(matches!(m.forecast_step(&[0.5], &fv[0]), Err(Error::ForecastUnavailable(_))));
        let mut zk = cfg;
        zk.zero_knowledge = true;
        let mut m = IoHmmModel::new(zk, identity_clusters(&[0.0, 1.0])).unwrap();
        let f = m.forecast_step(&[0.5], &fv[0]).unwrap();
        assert!(f.zero_knowledge);
        assert_eq!(f.forecast.y_hat, vec![0.0]);
    }

    #[test]
    fn forecast_branch_uses_initial_vector_on_shift_start() {
        let cfg = single_config(0);
        let rows = same_shift(4);
        let mut m = IoHmmModel::new(cfg.clone(), identity_clusters(&[0.0, 1.0])).unwrap();
        m.run_online(&[], &rows).unwrap();
        let s = PatternKey::from_bits(&[true]);
        let counts = m.dirichlet().counts(&s);
        assert_eq!(counts.initial.iter().sum::<f64>(), 2.0);
        assert_eq!(counts.transitions.as_slice().iter().sum::<f64>(), 2.0 + 3.0);
    }

    #[test]
    fn forecast_next_matches_forecast_step() {
        let rows = same_shift(20);
        let cfg = single_config(2);
        let mut a = IoHmmModel::fit_with_clusters(&[&rows[..19]], &cfg, identity_clusters(&[0.0, 1.0])).unwrap();
        let mut b = a.clone();
        let via_context = a.forecast_next(&rows[19]).unwrap();
        let fv = build_features_after(&rows[..19], &rows[19..], &cfg.features).unwrap();
        let direct = b.forecast_step(&cfg.features.classification_of(&rows[18]), &fv[0]).unwrap();
        assert_eq!(via_context, direct);
    }

    #[test]
    fn validate_catches_dimension_tampering() {
        let rows = same_shift(10);
        let cfg = single_config(1);
        let m = IoHmmModel::fit_with_clusters(&[&rows], &cfg, identity_clusters(&[0.0, 1.0])).unwrap();
        assert!(m.validate().is_ok());
        let mut bad = m.clone();
        bad.config.features.q = 2;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn weight_minimises_variance(su in 0.0f64..10.0, sv in 0.0f64..10.0) {
            let d = combination_weights(&Matrix::diag(&[su]), &Matrix::diag(&[sv])).unwrap()[0];
            let f = |d: f64| d * d * su + (1.0 - d) * (1.0 - d) * sv;
            for i in 0..=1000 {
                let g = i as f64 / 1000.0;
                prop_assert!(f(d) <= f(g) + 1e-12);
            }
        }

        #[test]
        fn combined_mean_lies_between_components(
            ys in proptest::collection::vec(-5.0f64..5.0, 2..20),
            oee in proptest::collection::vec(0.0f64..1.0, 20),
        ) {
            let mut rows = same_shift(ys.len());
            for (i, r) in rows.iter_mut().enumerate() {
                r.opt = ys[i];
                r.oee = oee[i];
            }
            let mut m = IoHmmModel::new(single_config(0), identity_clusters(&[0.25, 0.75])).unwrap();
            for s in m.run_online(&[], &rows).unwrap() {
                let f = s.forecast.unwrap().forecast;
                let (lo, hi) = (f.mean_u[0].min(f.mean_v[0]), f.mean_u[0].max(f.mean_v[0]));
                prop_assert!(f.y_hat[0] >= lo - 1e-12 && f.y_hat[0] <= hi + 1e-12);
                prop_assert!((0.0..=1.0).contains(&f.weights[0]));
            }
        }
    }

    #[test]
    fn pattern_isolation_under_permutation() {
        // Alternate shifts, each record its own sequence start; permuting the
        // second pattern's responses leaves the first pattern's forecasts alone.
        let mut rows = same_shift(24);
        for (i, r) in rows.iter_mut().enumerate() {
            r.shift = if i % 2 == 0 { "Mo M".to_string() } else { "Mo A".to_string() };
            r.opt = (i * 7 % 5) as f64;
        }
        let mut permuted = rows.clone();
        let odd: Vec<f64> = rows.iter().skip(1).step_by(2).map(|r| r.opt).rev().collect();
        for (r, v) in permuted.iter_mut().skip(1).step_by(2).zip(odd) {
            r.opt = v;
        }
        let run = |data: &[ProductionRecord]| {
            let mut m = IoHmmModel::new(single_config(0), identity_clusters(&[0.0, 1.0])).unwrap();
            m.run_online(&[], data).unwrap()
        };
        let a = run(&rows);
        let b = run(&permuted);
        for (x, y) in a.iter().zip(&b) {
            if rows[x.index].shift == "Mo M" {
                assert_eq!(x.forecast, y.forecast);
            }
        }
    }
}
