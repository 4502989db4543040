//! Point and interval accuracy measures.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Normal quantile used for the 95% marginal intervals.
pub const Z95: f64 = 1.96;

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::Dimension(format!("{} observations vs {} forecasts", y.len(), y_hat.len())));
    }
    if y.is_empty() {
        return Err(Error::Input("metrics need at least one forecast".into()));
    }
    Ok(())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let total: f64 = y.iter().zip(y_hat).map(|(a, b)| libm::fabs(a - b)).sum();
    Ok(total / y.len() as f64)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let total: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(total / y.len() as f64))
}

/// Fraction of `y` inside `y_hat ± 1.96 sd`.
pub fn coverage(y: &[f64], y_hat: &[f64], sd: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    if sd.len() != y.len() {
        return Err(Error::Dimension(format!("{} standard deviations for {} forecasts", sd.len(), y.len())));
    }
    if let Some(s) = sd.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::Input(format!("negative or missing standard deviation {}", s)));
    }
    let hits = y
        .iter()
        .zip(y_hat)
        .zip(sd)
        .filter(|((a, b), s)| libm::fabs(*a - *b) <= Z95 * **s)
        .count();
    Ok(hits as f64 / y.len() as f64)
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`).
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Input("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Input(format!("probability {} outside [0, 1]", p)));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Input("mean of an empty sample".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Accumulates all four cell statistics in one pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricAccumulator {
    count: u64,
    abs_sum: f64,
    sq_sum: f64,
    hits: u64,
    half_width_sum: f64,
}

/// Summary of one group of forecasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub covg: f64,
    pub half_width: f64,
    pub count: u64,
}

impl MetricAccumulator {
    pub fn push(&mut self, y: f64, y_hat: f64, sd: f64) {
        let e = y - y_hat;
        self.count += 1;
        self.abs_sum += libm::fabs(e);
        self.sq_sum += e * e;
        if libm::fabs(e) <= Z95 * sd {
            self.hits += 1;
        }
        self.half_width_sum += Z95 * sd;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> Option<CellMetrics> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        Some(CellMetrics {
            mae: self.abs_sum / n,
            rmse: libm::sqrt(self.sq_sum / n),
            covg: self.hits as f64 / n,
            half_width: self.half_width_sum / n,
            count: self.count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_examples() {
        assert_eq!(mae(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[0.0, 4.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert_abs_diff_eq!(rmse(&[0.0, 4.0], &[0.0, 0.0]).unwrap(), 8f64.sqrt(), epsilon = 1e-15);
        assert_eq!(mae(&[3.0], &[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn coverage_edge_cases() {
        assert_eq!(coverage(&[1.0, 2.0], &[1.0, 2.0], &[0.0, 5.0]).unwrap(), 1.0);
        assert_eq!(coverage(&[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(coverage(&[1.0], &[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn mismatched_or_empty_inputs() {
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn standard_normal_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
            })
            .collect();
        let c = coverage(&y, &vec![0.0; n], &vec![1.0; n]).unwrap();
        assert!((c - 0.95).abs() < 0.005, "coverage {}", c);
    }

    #[test]
    fn type7_quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&v, 1.0).unwrap(), 4.0);
        assert_eq!(quantile(&v, 0.5).unwrap(), 2.5);
        assert_abs_diff_eq!(quantile(&v, 0.25).unwrap(), 1.75, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..200)) {
            let (y, f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(rmse(&y, &f).unwrap() + 1e-9 >= mae(&y, &f).unwrap());
        }

        #[test]
        fn wider_intervals_never_lose_coverage(
            rows in proptest::collection::vec((-10f64..10.0, -10f64..10.0, 0f64..5.0), 1..100),
            c in 1.0f64..5.0,
        ) {
            let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let f: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let s: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let wide: Vec<f64> = s.iter().map(|v| v * c).collect();
            prop_assert!(coverage(&y, &f, &wide).unwrap() >= coverage(&y, &f, &s).unwrap());
        }

        #[test]
        fn accumulator_matches_functions(rows in proptest::collection::vec((-10f64..10.0, -10f64..10.0, 0f64..5.0), 1..100)) {
            let mut acc = MetricAccumulator::default();
            for r in &rows {
                acc.push(r.0, r.1, r.2);
            }
            let cell = acc.finish().unwrap();
            let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let f: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let s: Vec<f64> = rows.iter().map(|r| r.2).collect();
            prop_assert!((cell.mae - mae(&y, &f).unwrap()).abs() < 1e-12);
            prop_assert!((cell.rmse - rmse(&y, &f).unwrap()).abs() < 1e-12);
            prop_assert_eq!(cell.covg, coverage(&y, &f, &s).unwrap());
        }
    }
}
