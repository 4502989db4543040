//! Production records and the named numeric fields they expose.

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One observation period as captured on the shop floor.
///
/// Durations are in minutes, speeds in units per minute, rates in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionRecord {
    pub n: i64,
    pub date: NaiveDate,
    pub start: NaiveTime,
    /// Weekday plus shift code, e.g. `"Mo M"`.
    pub shift: String,
    pub pr_ord: i64,
    pub ics: f64,
    pub rcs: f64,
    pub tu: i64,
    pub du: i64,
    pub tgu: f64,
    pub nstops: i64,
    pub ot: f64,
    pub sbt: f64,
    pub lt: f64,
    pub dt: f64,
    pub opt: f64,
    pub plt: f64,
    pub nopt: f64,
    pub qlt: f64,
    pub vt: f64,
    pub lo: f64,
    pub av: f64,
    pub pf: f64,
    pub qu: f64,
    pub oee: f64,
    pub hum: f64,
    pub temp: f64,
}

impl ProductionRecord {
    /// Shift code component of the shift label (`"Mo M"` → `"M"`).
    pub fn shift_code(&self) -> &str {
        shift_code(&self.shift)
    }

    pub fn get(&self, field: Field) -> f64 {
        match field {
            Field::Ics => self.ics,
            Field::Rcs => self.rcs,
            Field::Tu => self.tu as f64,
            Field::Du => self.du as f64,
            Field::Tgu => self.tgu,
            Field::Nstops => self.nstops as f64,
            Field::Ot => self.ot,
            Field::Sbt => self.sbt,
            Field::Lt => self.lt,
            Field::Dt => self.dt,
            Field::OpT => self.opt,
            Field::Plt => self.plt,
            Field::NOpT => self.nopt,
            Field::Qlt => self.qlt,
            Field::Vt => self.vt,
            Field::Lo => self.lo,
            Field::Av => self.av,
            Field::Pf => self.pf,
            Field::Qu => self.qu,
            Field::Oee => self.oee,
            Field::Hum => self.hum,
            Field::Temp => self.temp,
        }
    }

    /// Chronological sort key.
    pub fn timestamp(&self) -> (NaiveDate, NaiveTime) {
        (self.date, self.start)
    }
}

/// Everything after the last whitespace of a shift label.
pub fn shift_code(label: &str) -> &str {
    label.trim().rsplit(char::is_whitespace).next().unwrap_or("")
}

/// Numeric columns that can act as responses, covariates or classification
/// variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Field {
    Ics,
    Rcs,
    Tu,
    Du,
    Tgu,
    Nstops,
    Ot,
    Sbt,
    Lt,
    Dt,
    OpT,
    Plt,
    NOpT,
    Qlt,
    Vt,
    Lo,
    Av,
    Pf,
    Qu,
    Oee,
    Hum,
    Temp,
}

impl Field {
    pub const ALL: [Field; 22] = [
        Field::Ics,
        Field::Rcs,
        Field::Tu,
        Field::Du,
        Field::Tgu,
        Field::Nstops,
        Field::Ot,
        Field::Sbt,
        Field::Lt,
        Field::Dt,
        Field::OpT,
        Field::Plt,
        Field::NOpT,
        Field::Qlt,
        Field::Vt,
        Field::Lo,
        Field::Av,
        Field::Pf,
        Field::Qu,
        Field::Oee,
        Field::Hum,
        Field::Temp,
    ];

    /// Column alias used in dataset headers.
    pub fn alias(self) -> &'static str {
        match self {
            Field::Ics => "ics",
            Field::Rcs => "rcs",
            Field::Tu => "TU",
            Field::Du => "DU",
            Field::Tgu => "TgU",
            Field::Nstops => "nstops",
            Field::Ot => "OT",
            Field::Sbt => "SBT",
            Field::Lt => "LT",
            Field::Dt => "DT",
            Field::OpT => "OpT",
            Field::Plt => "PLT",
            Field::NOpT => "NOpT",
            Field::Qlt => "QLT",
            Field::Vt => "VT",
            Field::Lo => "lo",
            Field::Av => "av",
            Field::Pf => "pf",
            Field::Qu => "qu",
            Field::Oee => "oee",
            Field::Hum => "hum",
            Field::Temp => "temp",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.alias())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL
            .iter()
            .copied()
            .find(|f| f.alias() == s)
            .ok_or_else(|| Error::Config(format!("unknown field `{}`", s)))
    }
}
