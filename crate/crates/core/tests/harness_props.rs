//! Reproducibility, report formats and the power-log expansion.

use bgw_core::functionals::power_log_remainder;
use bgw_core::harness::{self, ExperimentConfig, Mode, PowerToll, CSV_HEADER};
use bgw_core::offspring::OffspringModel;
use bgw_core::rng;
use bgw_core::sampler::{default_budget, sample_conditioned_counted};
use bgw_core::stats::Summary;
use bgw_core::theory::{mass_only_moment, MassToll};
use rayon::prelude::*;

fn csv(config: &ExperimentConfig) -> String {
    let report = harness::run(config).unwrap();
    let mut out = Vec::new();
    report.write_csv(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let mut configs = Vec::new();
    let mut c = ExperimentConfig::new(OffspringModel::catalan(), Mode::Moment);
    c.sizes = vec![101, 1001];
    c.replicates = 300;
    c.tolls = vec![PowerToll::new(1.0, 0.0), PowerToll::new(0.5, 1.0)];
    configs.push(c);
    let mut c = ExperimentConfig::new(OffspringModel::stable_power(1.5, 0.5).unwrap(), Mode::HeightMoments);
    c.sizes = vec![100, 1000];
    c.replicates = 300;
    configs.push(c);
    let mut c = ExperimentConfig::new(OffspringModel::catalan(), Mode::Continuum);
    c.sizes = vec![500];
    c.replicates = 100;
    c.levels = 200;
    configs.push(c);
    let mut c = ExperimentConfig::new(OffspringModel::geometric(), Mode::TailProfile);
    c.sizes = vec![300];
    c.replicates = 400;
    configs.push(c);
    for mut c in configs {
        c.master_seed = 77;
        c.workers = 1;
        let one = csv(&c);
        c.workers = 3;
        assert_eq!(one, csv(&c), "{:?}", c.mode);
        assert_eq!(one, csv(&c));
        c.master_seed = 78;
        assert_ne!(one, csv(&c));
    }
}

#[test]
fn csv_and_json_share_columns() {
    let mut c = ExperimentConfig::new(OffspringModel::catalan(), Mode::Moment);
    c.sizes = vec![51];
    c.replicates = 20;
    let report = harness::run(&c).unwrap();
    let mut out = Vec::new();
    report.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields.len(), CSV_HEADER.split(',').count());
    let mut out = Vec::new();
    report.write_json(&mut out).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let obj = json.as_array().unwrap()[0].as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
    let mut header: Vec<&str> = CSV_HEADER.split(',').collect();
    keys.sort_unstable();
    header.sort_unstable();
    assert_eq!(keys, header);
}

#[test]
fn exit_codes() {
    // zero toll: nothing to fail
    let mut c = ExperimentConfig::new(OffspringModel::catalan(), Mode::Moment);
    c.sizes = vec![11];
    c.replicates = 2;
    c.tolls = vec![PowerToll::zero()];
    let r = harness::run(&c).unwrap();
    assert_eq!((r.rows[0].estimate, r.rows[0].stderr, r.exit_code()), (0.0, 0.0, 0));
    // an impossible tolerance fails the local-limit verdict
    let mut c = ExperimentConfig::new(OffspringModel::catalan(), Mode::Llt);
    c.sizes = vec![101];
    c.thresholds.tolerance = 1e-9;
    assert_eq!(harness::run(&c).unwrap().exit_code(), 2);
    // a budget of one attempt drops most replicates
    let mut c = ExperimentConfig::new(OffspringModel::catalan(), Mode::Moment);
    c.sizes = vec![10_001];
    c.replicates = 50;
    c.budget = Some(1);
    let r = harness::run(&c).unwrap();
    assert!(r.invalid && r.rows[0].drops > 0);
    assert_eq!(r.exit_code(), 3);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut c = ExperimentConfig::new(OffspringModel::catalan(), Mode::Moment);
    c.sizes = vec![100];
    assert!(harness::run(&c).is_err());
    c.sizes = vec![101];
    c.replicates = 1;
    assert!(harness::run(&c).is_err());
    let mut c = ExperimentConfig::new(OffspringModel::stable_power(1.5, 0.5).unwrap(), Mode::Continuum);
    c.sizes = vec![100];
    assert!(harness::run(&c).is_err());
    let mut c = ExperimentConfig::new(OffspringModel::catalan(), Mode::Continuum);
    c.sizes = vec![100];
    c.tolls = vec![PowerToll::new(0.4, 0.0)];
    assert!(harness::run(&c).is_err());
}

#[test]
fn power_log_expansion() {
    let model = OffspringModel::catalan();
    let (n, alpha, r) = (10_001u64, 0.5, 80_000u64);
    let kappa = model.kappa();
    // the default budget fails about once in e^10 trees; this loop keeps every tree
    let budget = Some(10 * default_budget(&model, n));
    let rem: Vec<f64> = (0..r)
        .into_par_iter()
        .map(|j| {
            let (t, _) = sample_conditioned_counted(&model, n, &mut rng::stream(41, 0, j), budget).unwrap();
            power_log_remainder(&t, &model, alpha, true)
        })
        .collect();
    let s = Summary::of(&rem);
    let power = mass_only_moment(2.0, kappa, &MassToll::Power(alpha)).unwrap();
    let log = mass_only_moment(2.0, kappa, &MassToll::PowerLog(alpha)).unwrap();
    let d = s.mean - (n as f64).ln() * power;
    let rel = (d + log).abs() / log;
    assert!(rel <= 0.05, "{d} ± {} vs {} (relative error {rel})", s.stderr, -log);
}

#[test]
fn tree_values_share_streams_with_the_moment_run() {
    let mut c = ExperimentConfig::new(OffspringModel::geometric(), Mode::Moment);
    c.sizes = vec![60, 90];
    c.replicates = 40;
    c.tolls = vec![PowerToll::new(1.0, 0.0), PowerToll::new(0.5, 1.0)];
    c.master_seed = 3;
    let trees = harness::tree_values(&c).unwrap();
    let report = harness::run(&c).unwrap();
    for row in &report.rows {
        let i = c.tolls.iter().position(|t| Some(t.alpha_prime) == row.alpha_prime).unwrap();
        let xs: Vec<f64> =
            trees.iter().filter(|t| t.n == row.n).map(|t| t.values.as_ref().unwrap()[i]).collect();
        assert_eq!(xs.len(), 40);
        assert_eq!(Summary::of(&xs).mean, row.estimate);
    }
}
