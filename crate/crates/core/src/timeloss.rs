//! Time-loss algebra and effectiveness indices.
//!
//! Production times are obtained by successively subtracting the four loss
//! categories from the opening time:
//!
//! ```text
//! OT  - SBT = LT    (loading time)
//! LT  - DT  = OpT   (operating time)
//! OpT - PLT = NOpT  (net operating time)
//! NOpT - QLT = VT   (valuable time)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::ProductionRecord;

/// Absolute tolerance, in minutes, for datasets stored with two decimals.
pub const DURATION_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductionTimes {
    pub lt: f64,
    pub opt: f64,
    pub nopt: f64,
    pub vt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indices {
    pub lo: f64,
    pub av: f64,
    pub pf: f64,
    pub qu: f64,
    pub oee: f64,
    /// Set when at least one ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

pub fn derive_time_variables(ot: f64, sbt: f64, dt: f64, plt: f64, qlt: f64) -> Result<ProductionTimes> {
    for (name, v) in [("OT", ot), ("SBT", sbt), ("DT", dt), ("PLT", plt), ("QLT", qlt)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
        if v < -DURATION_TOLERANCE {
            return Err(Error::Consistency { stage: name, value: v });
        }
    }
    let lt = stage("LT", ot - sbt)?;
    let opt = stage("OpT", lt - dt)?;
    let nopt = stage("NOpT", opt - plt)?;
    let vt = stage("VT", nopt - qlt)?;
    Ok(ProductionTimes { lt, opt, nopt, vt })
}

fn stage(name: &'static str, value: f64) -> Result<f64> {
    if value < -DURATION_TOLERANCE {
        Err(Error::Consistency { stage: name, value })
    } else {
        Ok(value.max(0.0))
    }
}

pub fn compute_indices(ot: f64, lt: f64, opt: f64, nopt: f64, vt: f64) -> Indices {
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else {
            degenerate = true;
            0.0
        }
    };
    let lo = ratio(lt, ot);
    let av = ratio(opt, lt);
    let pf = ratio(nopt, opt);
    let qu = ratio(vt, nopt);
    Indices { lo, av, pf, qu, oee: av * pf * qu, degenerate }
}

impl ProductionRecord {
    pub fn derived_times(&self) -> Result<ProductionTimes> {
        derive_time_variables(self.ot, self.sbt, self.dt, self.plt, self.qlt)
    }

    pub fn derived_indices(&self) -> Result<Indices> {
        let t = self.derived_times()?;
        Ok(compute_indices(self.ot, t.lt, t.opt, t.nopt, t.vt))
    }

    /// Checks the stored production times against the loss algebra.
    pub fn check_consistency(&self) -> Result<()> {
        let t = self.derived_times()?;
        for (name, stored, derived) in [
            ("LT", self.lt, t.lt),
            ("OpT", self.opt, t.opt),
            ("NOpT", self.nopt, t.nopt),
            ("VT", self.vt, t.vt),
        ] {
            if (stored - derived).abs() > DURATION_TOLERANCE + 1e-9 {
                return Err(Error::Consistency { stage: name, value: stored - derived });
            }
        }
        if self.du > self.tu {
            return Err(Error::Consistency { stage: "DU", value: (self.tu - self.du) as f64 });
        }
        for (name, rate) in [
            ("lo", self.lo),
            ("av", self.av),
            ("pf", self.pf),
            ("qu", self.qu),
            ("oee", self.oee),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Consistency { stage: name, value: rate });
            }
        }
        Ok(())
    }

    /// Target units recomputed from operating time and ideal speed.
    pub fn recomputed_target_units(&self) -> f64 {
        self.opt * self.ics
    }
}

/// Fills LT, OpT, NOpT, VT and the five indices from the raw losses.
pub fn complete_record(record: &mut ProductionRecord) -> Result<Indices> {
    let t = record.derived_times()?;
    record.lt = t.lt;
    record.opt = t.opt;
    record.nopt = t.nopt;
    record.vt = t.vt;
    let idx = compute_indices(record.ot, t.lt, t.opt, t.nopt, t.vt);
    record.lo = idx.lo;
    record.av = idx.av;
    record.pf = idx.pf;
    record.qu = idx.qu;
    record.oee = idx.oee;
    Ok(idx)
}
