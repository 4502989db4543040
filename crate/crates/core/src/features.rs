//! Covariate, classification and response vectors built from records.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Field, ProductionRecord};
use crate::sequence::{boundary_flags, BoundaryFlags};

/// Largest lag order accepted by [`FeatureConfig::validate`].
pub const MAX_LAGS: usize = 5;

/// One covariate definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    /// Dummy: 1 when the shift code equals the given value.
    ShiftCode(String),
    /// Dummy: 1 when the weekday token of the shift label equals the value.
    Weekday(String),
    /// A numeric record column taken as is.
    Field(Field),
    /// 1 on the first observation of a shift.
    BeginsShift,
    /// 1 on the first observation of a production order.
    BeginsOrder,
}

impl Covariate {
    pub fn is_binary(&self) -> bool {
        !matches!(self, Covariate::Field(_))
    }

    fn evaluate(&self, r: &ProductionRecord, flags: BoundaryFlags) -> f64 {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        match self {
            Covariate::ShiftCode(c) => b(r.shift_code() == c),
            Covariate::Weekday(d) => b(r.shift.split_whitespace().next() == Some(d.as_str())),
            Covariate::Field(f) => r.get(*f),
            Covariate::BeginsShift => b(flags.begins_shift),
            Covariate::BeginsOrder => b(flags.begins_order),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Number of lagged response vectors appended to `w`.
    pub q: usize,
    pub responses: Vec<Field>,
    /// Binary covariates forming the discrete pattern `z`.
    pub z_spec: Vec<Covariate>,
    /// Covariates of the continuous part, before the lag block.
    pub w_spec: Vec<Covariate>,
    /// Classification variables used to label operating modes.
    pub t_spec: Vec<Field>,
}

impl FeatureConfig {
    /// Two operating-time responses, shift dummies in the discrete part,
    /// dummies (one level dropped), ideal speed and boundary indicators in the
    /// continuous part, and six efficiency variables for classification.
    pub fn standard(shift_codes: &[String], q: usize) -> Self {
        let dummies = || shift_codes.iter().map(|c| Covariate::ShiftCode(c.clone()));
        let mut w_spec: Vec<Covariate> = dummies().skip(1).collect();
        w_spec.extend([Covariate::Field(Field::Ics), Covariate::BeginsShift, Covariate::BeginsOrder]);
        FeatureConfig {
            q,
            responses: alloc::vec![Field::OpT, Field::NOpT],
            z_spec: dummies().collect(),
            w_spec,
            t_spec: alloc::vec![Field::Av, Field::Pf, Field::Oee, Field::Ot, Field::Rcs, Field::Tu],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q > MAX_LAGS {
            return Err(Error::Config(format!("lag order {} exceeds {}", self.q, MAX_LAGS)));
        }
        if self.responses.is_empty() {
            return Err(Error::Config("at least one response is required".to_string()));
        }
        if let Some(c) = self.z_spec.iter().find(|c| !c.is_binary()) {
            return Err(Error::Config(format!("discrete covariate {:?} is not binary", c)));
        }
        if self.t_spec.is_empty() {
            return Err(Error::Config("at least one classification variable is required".to_string()));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.responses.len()
    }

    pub fn d(&self) -> usize {
        self.z_spec.len()
    }

    /// Length of `w`: base covariates plus `q * m` lagged responses.
    pub fn w_len(&self) -> usize {
        self.w_spec.len() + self.q * self.m()
    }

    /// Predictor count of the covariate-driven estimator (`[1, w]`).
    pub fn u_len(&self) -> usize {
        1 + self.w_len()
    }

    /// Same configuration with the lag block removed.
    pub fn without_lags(&self) -> Self {
        FeatureConfig { q: 0, ..self.clone() }
    }

    pub fn responses_of(&self, r: &ProductionRecord) -> Vec<f64> {
        self.responses.iter().map(|f| r.get(*f)).collect()
    }

    pub fn classification_of(&self, r: &ProductionRecord) -> Vec<f64> {
        self.t_spec.iter().map(|f| r.get(*f)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVectors {
    /// Position of the source record in the stream passed to the builder.
    pub index: usize,
    pub flags: BoundaryFlags,
    pub z: Vec<bool>,
    pub w: Vec<f64>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl FeatureVectors {
    pub fn begins_sequence(&self) -> bool {
        self.flags.begins_shift
    }

    /// `[1, w]`.
    pub fn u(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(1 + self.w.len());
        u.push(1.0);
        u.extend_from_slice(&self.w);
        u
    }
}

/// Builds feature vectors for a standalone record stream. The first `q`
/// records only serve as lag sources.
pub fn build_features(records: &[ProductionRecord], config: &FeatureConfig) -> Result<Vec<FeatureVectors>> {
    config.validate()?;
    if records.len() < config.q + 1 {
        return Err(Error::InsufficientHistory { needed: config.q + 1, got: records.len() });
    }
    build_features_after(&[], records, config)
}

/// Builds feature vectors for `records`, treating `history` as the
/// chronologically preceding records. Lags reach back into `history`, and
/// the boundary flags of the first record compare against its last entry.
/// Records without `q` predecessors produce no vectors.
pub fn build_features_after(
    history: &[ProductionRecord],
    records: &[ProductionRecord],
    config: &FeatureConfig,
) -> Result<Vec<FeatureVectors>> {
    config.validate()?;
    let flags = boundary_flags(records, history.last())?;
    let q = config.q;
    let lag_source = |global: usize| -> &ProductionRecord {
        if global < history.len() {
            &history[global]
        } else {
            &records[global - history.len()]
        }
    };
    let mut out = Vec::with_capacity(records.len());
    for (i, (r, f)) in records.iter().zip(flags).enumerate() {
        let global = history.len() + i;
        if global < q {
            continue;
        }
        let z = config.z_spec.iter().map(|c| c.evaluate(r, f) != 0.0).collect();
        let mut w: Vec<f64> = config.w_spec.iter().map(|c| c.evaluate(r, f)).collect();
        for lag in 1..=q {
            w.extend(config.responses_of(lag_source(global - lag)));
        }
        out.push(FeatureVectors {
            index: i,
            flags: f,
            z,
            w,
            t: config.classification_of(r),
            y: config.responses_of(r),
        });
    }
    Ok(out)
}

/// Distinct shift codes in order of first appearance.
pub fn shift_codes(records: &[ProductionRecord]) -> Vec<String> {
    let mut codes: Vec<String> = Vec::new();
    for r in records {
        if !codes.iter().any(|c| c == r.shift_code()) {
            codes.push(r.shift_code().to_string());
        }
    }
    codes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::fixtures::{same_shift, table_rows};
    use alloc::vec;

    fn config(q: usize) -> FeatureConfig {
        FeatureConfig::standard(&["M".to_string(), "A".to_string(), "N".to_string()], q)
    }

    #[test]
    fn no_lags_gives_every_record_a_vector() {
        let rows = same_shift(4);
        let fv = build_features(&rows, &config(0)).unwrap();
        assert_eq!(fv.len(), 4);
        assert!(fv.iter().all(|f| f.w.len() == config(0).w_spec.len()));
    }

    #[test]
    fn lag_block_is_lag_major() {
        let rows = same_shift(5);
        let cfg = config(2);
        let fv = build_features(&rows, &cfg).unwrap();
        assert_eq!(fv.len(), 3);
        let base = cfg.w_spec.len();
        for f in &fv {
            let n = f.index;
            let lags = &f.w[base..];
            assert_eq!(lags.len(), 4);
            assert_eq!(lags, &[rows[n - 1].opt, rows[n - 1].nopt, rows[n - 2].opt, rows[n - 2].nopt]);
        }
        assert_eq!(fv[0].index, 2);
    }

    #[test]
    fn begins_shift_indicator_is_set() {
        let rows = table_rows();
        let cfg = config(0);
        let fv = build_features(&rows, &cfg).unwrap();
        let pos = cfg.w_spec.iter().position(|c| *c == Covariate::BeginsShift).unwrap();
        assert_eq!(fv[1].w[pos], 1.0);
        assert!(fv[1].begins_sequence());
    }

    #[test]
    fn shift_dummies_encode_pattern() {
        let rows = table_rows();
        let fv = build_features(&rows, &config(0)).unwrap();
        assert_eq!(fv[0].z, vec![true, false, false]);
        assert_eq!(fv[1].z, vec![false, true, false]);
        // One level dropped in the continuous part.
        assert_eq!(&fv[1].w[..2], &[1.0, 0.0]);
    }

    #[test]
    fn lags_cross_shift_boundaries() {
        let rows = table_rows();
        let fv = build_features(&rows, &config(1)).unwrap();
        assert_eq!(fv.len(), 1);
        assert_eq!(&fv[0].w[fv[0].w.len() - 2..], &[6.98, 6.93]);
    }

    #[test]
    fn too_short_stream_is_rejected() {
        let rows = same_shift(2);
        assert_eq!(
            build_features(&rows, &config(2)).unwrap_err(),
            Error::InsufficientHistory { needed: 3, got: 2 }
        );
    }

    #[test]
    fn history_supplies_lags() {
        let rows = same_shift(4);
        let cfg = config(2);
        let fv = build_features_after(&rows[..2], &rows[2..], &cfg).unwrap();
        assert_eq!(fv.len(), 2);
        let all = build_features(&rows, &cfg).unwrap();
        assert_eq!(fv[0].w, all[0].w);
        assert_eq!(fv[1].w, all[1].w);
    }

    #[test]
    fn oversized_lag_order_is_invalid() {
        assert!(config(6).validate().is_err());
    }
}
