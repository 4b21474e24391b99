use std::sync::Arc;

use telesynth::dataio::{
    bootstrap_ground_truth, portfolio_to_csv_string, read_csv, read_csv_from, write_csv,
    GroundTruthSpec, RunConfig,
};
use telesynth::schema::default_schema;
use telesynth::validate::claim_mix;

#[test]
fn large_bootstrap_reproduces_the_target_mix() {
    let spec = GroundTruthSpec::default();
    let p = bootstrap_ground_truth(&spec, 100_000, 13).unwrap();
    assert!(p.violations().unwrap().is_empty());
    let mix = claim_mix(&p.claim_counts().unwrap()).unwrap();
    assert!((mix[0] - spec.claim_mix[0]).abs() < 0.005, "{mix:?}");
    assert!((mix[1] - spec.claim_mix[1]).abs() < 0.005, "{mix:?}");
    let amt = p.claim_amounts().unwrap();
    let nb = p.claim_counts().unwrap();
    assert!(nb.iter().zip(&amt).all(|(&n, &a)| (n == 0.0) == (a == 0.0)));
}

#[test]
fn bootstrap_is_deterministic_and_seed_sensitive() {
    let spec = GroundTruthSpec::default();
    let a = portfolio_to_csv_string(&bootstrap_ground_truth(&spec, 500, 1).unwrap()).unwrap();
    let b = portfolio_to_csv_string(&bootstrap_ground_truth(&spec, 500, 1).unwrap()).unwrap();
    let c = portfolio_to_csv_string(&bootstrap_ground_truth(&spec, 500, 2).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn bootstrap_file_round_trips_with_the_default_header() {
    let p = bootstrap_ground_truth(&GroundTruthSpec::default(), 300, 6).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("real.csv");
    write_csv(&p, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let schema = default_schema();
    assert_eq!(header.len(), 52);
    let names: Vec<&str> = schema.variables().iter().map(|v| v.name.as_str()).collect();
    assert_eq!(header, names);
    let back = read_csv(&path, Arc::new(default_schema())).unwrap();
    assert_eq!(back.data(), p.data());
    assert_eq!(portfolio_to_csv_string(&back).unwrap(), text);
}

#[test]
fn invalid_rows_are_reported_with_up_to_ten_violations() {
    let p = bootstrap_ground_truth(&GroundTruthSpec::default(), 20, 6).unwrap();
    let text = portfolio_to_csv_string(&p).unwrap();
    let age = default_schema().index_of("Insured.age").unwrap();
    let broken: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return format!("{l}\n");
            }
            let mut cells: Vec<String> = l.split(',').map(str::to_string).collect();
            cells[age] = "150".into();
            format!("{}\n", cells.join(","))
        })
        .collect();
    let err = read_csv_from(Arc::new(default_schema()), broken.as_bytes()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.starts_with("20 validation violation"), "{msg}");
    assert_eq!(msg.matches("row ").count(), 10);
}

#[test]
fn config_text_is_stable() {
    let c = RunConfig::default();
    assert_eq!(
        RunConfig::from_text(&c.to_text()).unwrap().to_text(),
        c.to_text()
    );
}
