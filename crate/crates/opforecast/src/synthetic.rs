//! Synthetic production data from a hidden Markov chain over shift-structured periods.
//!
//! Each period is in one of K hidden states. The first period of a shift
//! draws its state from `initial`, later periods from the row of
//! `transition` for the previous state. Both responses (operating time and
//! net operating time) are
//!
//! ```text
//! state mean + shift offset + ics effect * ics + shift-start effect + x + noise
//! ```
//!
//! where `x` is a vector AR(1) process that runs across shifts and the noise
//! is white Gaussian with the given correlation.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use opforecast_core::record::ProductionRecord;
use opforecast_core::timeloss::compute_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::blank_record;
use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub code: String,
    pub start_hour: u32,
    pub hours: u32,
    /// Added to both responses during this shift.
    #[serde(default)]
    pub offset: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub periods: usize,
    /// Opening time of every period, in minutes.
    pub period_minutes: u32,
    pub shifts: Vec<ShiftSpec>,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    /// Per-state means of [OpT, NOpT].
    pub state_means: Vec<[f64; 2]>,
    /// Ideal cycle speeds; every new order draws one uniformly.
    pub ics_levels: Vec<f64>,
    pub ics_effect: [f64; 2],
    pub shift_start_effect: [f64; 2],
    /// Probability that a period starts a new production order.
    pub order_change_prob: f64,
    pub ar: f64,
    pub ar_sd: [f64; 2],
    pub noise_sd: [f64; 2],
    pub noise_corr: f64,
    pub defect_rate: f64,
    /// Expected unplanned stops per minute of downtime.
    pub stop_rate: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(2022, 10, 3).expect("valid date"),
            periods: 4 * 7 * 144,
            period_minutes: 10,
            shifts: vec![
                ShiftSpec { code: "M".into(), start_hour: 6, hours: 8, offset: [0.3, 0.2] },
                ShiftSpec { code: "A".into(), start_hour: 14, hours: 8, offset: [0.0, 0.0] },
                ShiftSpec { code: "N".into(), start_hour: 22, hours: 8, offset: [-0.4, -0.3] },
            ],
            initial: vec![0.7, 0.3],
            transition: vec![vec![0.95, 0.05], vec![0.15, 0.85]],
            state_means: vec![[8.6, 7.9], [4.5, 3.8]],
            ics_levels: vec![1.6, 1.88, 2.2],
            ics_effect: [0.0, -0.5],
            shift_start_effect: [-1.0, -1.0],
            order_change_prob: 0.02,
            ar: 0.0,
            ar_sd: [0.0, 0.0],
            noise_sd: [0.5, 0.5],
            noise_corr: 0.6,
            defect_rate: 0.05,
            stop_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub records: Vec<ProductionRecord>,
    /// Hidden state of every record.
    pub states: Vec<usize>,
}

fn weekday_label(w: Weekday) -> &'static str {
    match w {
        Weekday::Mon => "Mo",
        Weekday::Tue => "Tu",
        Weekday::Wed => "We",
        Weekday::Thu => "Th",
        Weekday::Fri => "Fr",
        Weekday::Sat => "Sa",
        Weekday::Sun => "Su",
    }
}

fn check_distribution(name: &str, p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(AppError::Config(format!("{} has {} entries for {} states", name, p.len(), k)));
    }
    if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(AppError::Config(format!("{} is not a probability vector: {:?}", name, p)));
    }
    Ok(())
}

fn draw(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.state_means.len();
        if k < 2 {
            return Err(AppError::Config("at least two states are required".into()));
        }
        check_distribution("initial", &self.initial, k)?;
        if self.transition.len() != k {
            return Err(AppError::Config(format!("transition has {} rows for {} states", self.transition.len(), k)));
        }
        for (i, row) in self.transition.iter().enumerate() {
            check_distribution(&format!("transition row {}", i), row, k)?;
        }
        if self.shifts.is_empty() || self.period_minutes == 0 {
            return Err(AppError::Config("need at least one shift and a positive period length".into()));
        }
        let mut covered = 0;
        for s in &self.shifts {
            if s.code.is_empty() || s.code.contains(char::is_whitespace) || s.start_hour > 23 || s.hours == 0 {
                return Err(AppError::Config(format!("invalid shift {:?}", s)));
            }
            if (s.hours * 60) % self.period_minutes != 0 {
                return Err(AppError::Config(format!("shift {} is not a whole number of periods", s.code)));
            }
            covered += s.hours;
        }
        let mut sorted: Vec<&ShiftSpec> = self.shifts.iter().collect();
        sorted.sort_by_key(|s| s.start_hour);
        let overlap = sorted.windows(2).any(|w| w[0].start_hour + w[0].hours > w[1].start_hour)
            || sorted[sorted.len() - 1].start_hour + sorted[sorted.len() - 1].hours > sorted[0].start_hour + 24;
        if covered > 24 || overlap {
            return Err(AppError::Config("shifts overlap".into()));
        }
        if self.ics_levels.is_empty() || self.ics_levels.iter().any(|v| !(*v > 0.0)) {
            return Err(AppError::Config("ics levels must be positive".into()));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.order_change_prob) || !unit(self.defect_rate) || !(-1.0..=1.0).contains(&self.noise_corr) {
            return Err(AppError::Config("probabilities and correlations must lie in [0, 1] / [-1, 1]".into()));
        }
        if !(self.ar.abs() < 1.0) {
            return Err(AppError::Config(format!("AR coefficient {} is not stationary", self.ar)));
        }
        let finite = self.state_means.iter().flatten().chain(&self.ics_effect).chain(&self.shift_start_effect);
        if finite.chain(&self.ar_sd).chain(&self.noise_sd).any(|v| !v.is_finite())
            || self.ar_sd.iter().chain(&self.noise_sd).any(|v| *v < 0.0)
            || self.stop_rate < 0.0
        {
            return Err(AppError::Config("effects must be finite and standard deviations non-negative".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticData> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let ot = self.period_minutes as f64;
        let mut shifts = self.shifts.clone();
        shifts.sort_by_key(|s| s.start_hour);

        let mut records = Vec::with_capacity(self.periods);
        let mut states = Vec::with_capacity(self.periods);
        let mut state = 0;
        let mut x = [0.0; 2];
        let mut order = 100;
        let mut ics = self.ics_levels[rng.random_range(0..self.ics_levels.len())];
        let mut day = self.start_date;
        let corr = (1.0 - self.noise_corr * self.noise_corr).sqrt();
        'days: loop {
            for shift in &shifts {
                let first = NaiveDateTime::new(day, NaiveTime::from_hms_opt(shift.start_hour, 0, 0).expect("hour < 24"));
                let label = format!("{} {}", weekday_label(day.weekday()), shift.code);
                let count = shift.hours * 60 / self.period_minutes;
                for i in 0..count {
                    if records.len() == self.periods {
                        break 'days;
                    }
                    state = if i == 0 { draw(&mut rng, &self.initial) } else { draw(&mut rng, &self.transition[state]) };
                    if !records.is_empty() && rng.random::<f64>() < self.order_change_prob {
                        order += 1;
                        ics = self.ics_levels[rng.random_range(0..self.ics_levels.len())];
                    }
                    let e0: f64 = rng.sample(StandardNormal);
                    let e1: f64 = rng.sample(StandardNormal);
                    let noise = [e0, self.noise_corr * e0 + corr * e1];
                    let mut y = [0.0; 2];
                    for j in 0..2 {
                        let eta: f64 = rng.sample(StandardNormal);
                        x[j] = self.ar * x[j] + self.ar_sd[j] * eta;
                        let start = if i == 0 { self.shift_start_effect[j] } else { 0.0 };
                        y[j] = self.state_means[state][j]
                            + shift.offset[j]
                            + self.ics_effect[j] * ics
                            + start
                            + x[j]
                            + self.noise_sd[j] * noise[j];
                    }
                    let at = first + Duration::minutes((i * self.period_minutes) as i64);
                    let mut r = blank_record();
                    r.n = records.len() as i64 + 1;
                    r.date = at.date();
                    r.start = at.time();
                    r.shift = label.clone();
                    r.pr_ord = order;
                    r.ics = ics;
                    r.ot = ot;
                    r.lt = ot;
                    r.opt = y[0].clamp(0.0, r.lt);
                    r.nopt = y[1].clamp(0.0, r.opt);
                    self.fill_derived(&mut r, &mut rng)?;
                    records.push(r);
                    states.push(state);
                }
            }
            day = day.succ_opt().ok_or_else(|| AppError::Config("date overflow".into()))?;
        }
        Ok(SyntheticData { records, states })
    }

    /// Losses, counts, speeds and indices from OT, LT, OpT, NOpT and ics.
    fn fill_derived(&self, r: &mut ProductionRecord, rng: &mut ChaCha8Rng) -> Result<()> {
        r.sbt = r.ot - r.lt;
        r.dt = r.lt - r.opt;
        r.plt = r.opt - r.nopt;
        r.tu = (r.ics * r.nopt).round() as i64;
        r.du = if r.tu > 0 && self.defect_rate > 0.0 {
            let b = Binomial::new(r.tu as u64, self.defect_rate).map_err(|e| AppError::Config(e.to_string()))?;
            b.sample(rng) as i64
        } else {
            0
        };
        r.qlt = (r.du as f64 / r.ics).min(r.nopt);
        r.vt = r.nopt - r.qlt;
        r.tgu = r.opt * r.ics;
        r.rcs = if r.lt > 0.0 { r.tu as f64 / r.lt } else { 0.0 };
        let mean_stops = r.dt * self.stop_rate;
        r.nstops = if mean_stops > 0.0 {
            let p = Poisson::new(mean_stops).map_err(|e| AppError::Config(e.to_string()))?;
            (p.sample(rng) as i64).max(1)
        } else {
            0
        };
        let h: f64 = rng.sample(StandardNormal);
        let t: f64 = rng.sample(StandardNormal);
        r.hum = 60.0 + 3.0 * h;
        r.temp = 24.0 + t;
        let idx = compute_indices(r.ot, r.lt, r.opt, r.nopt, r.vt);
        r.lo = idx.lo;
        r.av = idx.av;
        r.pf = idx.pf;
        r.qu = idx.qu;
        r.oee = idx.oee;
        Ok(())
    }
}
