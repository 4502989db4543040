use std::collections::BTreeMap;

use opforecast::config::RunConfig;
use opforecast::synthetic::{ShiftSpec, SyntheticSpec};
use opforecast_core::evaluation::{leave_one_week_out, week_folds, ModelSpec};
use opforecast_core::iohmm::IoHmmModel;
use opforecast_core::metrics::mae;

#[test]
fn transition_frequencies_match_the_generator() {
    let spec = SyntheticSpec {
        periods: 10_080,
        shifts: vec![ShiftSpec { code: "D".into(), start_hour: 0, hours: 24, offset: [0.0, 0.0] }],
        transition: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        ..SyntheticSpec::default()
    };
    let data = spec.generate().unwrap();
    let mut counts = [[0.0f64; 2]; 2];
    for i in 1..data.records.len() {
        if data.records[i].shift == data.records[i - 1].shift {
            counts[data.states[i - 1]][data.states[i]] += 1.0;
        }
    }
    let total: f64 = counts.iter().flatten().sum();
    assert!(total >= 10_000.0, "{} transitions", total);
    for (row, expected) in counts.iter().zip(&spec.transition) {
        let n: f64 = row.iter().sum();
        for (c, p) in row.iter().zip(expected) {
            assert!((c / n - p).abs() <= 0.02, "{} vs {}", c / n, p);
        }
    }
}

#[test]
fn zero_noise_forecast_error_vanishes() {
    let spec = SyntheticSpec {
        periods: 6000,
        seed: 2,
        state_means: vec![[6.0, 5.0], [6.0, 5.0]],
        ics_effect: [1.0, 0.8],
        order_change_prob: 0.1,
        noise_sd: [0.0, 0.0],
        ..SyntheticSpec::default()
    };
    let records = spec.generate().unwrap().records;
    let config = RunConfig::default();
    let model_config = config.model_config(&records).unwrap();
    let (train, test) = records.split_at(1000);
    let mut model = IoHmmModel::fit(&[train], &model_config, &config.clustering()).unwrap();
    let steps = model.run_online(train, test).unwrap();
    let window_mae = |window: &[opforecast_core::iohmm::OnlineStep], j: usize| {
        let (y, f): (Vec<f64>, Vec<f64>) =
            window.iter().filter_map(|s| s.forecast.as_ref().map(|f| (s.y[j], f.forecast.y_hat[j]))).unzip();
        assert_eq!(y.len(), window.len());
        mae(&y, &f).unwrap()
    };
    for j in 0..2 {
        let early = window_mae(&steps[..500], j);
        let late = window_mae(&steps[steps.len() - 500..], j);
        assert!(late < 1e-6 && late < early * 1e-3, "response {} MAE {} then {}", j, early, late);
    }
}

#[test]
fn four_weeks_give_four_disjoint_folds() {
    let records = SyntheticSpec { periods: 4 * 7 * 144 - 36, ..SyntheticSpec::default() }.generate().unwrap().records;
    let folds = week_folds(&records).unwrap();
    assert_eq!(folds.len(), 4);
    for fold in &folds {
        let data = fold.split(&records).unwrap();
        let test_n: Vec<i64> = data.test.iter().map(|r| r.n).collect();
        for run in &data.train {
            assert!(run.iter().all(|r| !test_n.contains(&r.n)));
        }
        assert_eq!(data.train.iter().map(|r| r.len()).sum::<usize>() + data.test.len(), records.len());
    }
}

#[test]
fn persistence_cells_match_a_single_pass() {
    let records = SyntheticSpec { periods: 3 * 7 * 144 - 36, seed: 8, ..SyntheticSpec::default() }.generate().unwrap().records;
    let config = RunConfig { models: vec!["persistence".into()], parallel: false, ..RunConfig::default() };
    let settings = config.eval_settings(&records).unwrap();
    let report = leave_one_week_out(&records, &[ModelSpec::Persistence], &settings).unwrap();

    let mut direct: BTreeMap<(String, String, String), (f64, u64)> = BTreeMap::new();
    for fold in week_folds(&records).unwrap() {
        let data = fold.split(&records).unwrap();
        let offset = data.history.len();
        for (i, r) in data.test.iter().enumerate() {
            let g = offset + i;
            if g == 0 {
                continue;
            }
            for (name, now, before) in [("OpT", r.opt, records[g - 1].opt), ("NOpT", r.nopt, records[g - 1].nopt)] {
                let e = direct.entry((fold.held_out.clone(), r.shift_code().to_string(), name.to_string())).or_default();
                e.0 += (now - before).abs();
                e.1 += 1;
            }
        }
    }
    assert_eq!(report.cells.len(), direct.len());
    for c in &report.cells {
        let (sum, n) = direct[&(c.fold.clone(), c.shift_type.clone(), c.response.clone())];
        assert_eq!(c.count, n);
        assert!((c.mae - sum / n as f64).abs() < 1e-12);
        assert!(c.rmse >= c.mae);
    }
}
