use proptest::prelude::*;
use telesynth::dataio::{bootstrap_ground_truth, GroundTruthSpec};
use telesynth::rng;
use telesynth::synth::{generate_portfolio, interpolate, smote_codec, u_shape_sample, SmoteConfig};

fn arcsine_cdf(w: f64) -> f64 {
    2.0 / std::f64::consts::PI * w.clamp(0.0, 1.0).sqrt().asin()
}

#[test]
fn generated_rows_are_valid_and_interpolations_stay_in_bounds() {
    let real = bootstrap_ground_truth(&GroundTruthSpec::default(), 5_000, 21).unwrap();
    let cfg = SmoteConfig {
        keep_encoded: true,
        ..SmoteConfig::new(10_000, 21)
    };
    let out = generate_portfolio(&real, &cfg).unwrap();
    assert_eq!(out.portfolio.n_rows(), 10_000);
    assert!(out.portfolio.violations().unwrap().is_empty());

    let codec = smote_codec(&real.features_only()).unwrap();
    let x = codec.encode(&real.features_only()).unwrap();
    let z = out.encoded.as_ref().unwrap();
    for (k, rec) in out.neighbors.iter().enumerate() {
        assert_ne!(rec.source, rec.neighbor);
        for j in 0..x.ncols() {
            let (a, b) = (x[[rec.source, j]], x[[rec.neighbor, j]]);
            let v = z[[k, j]];
            assert!(
                a.min(b) <= v && v <= a.max(b),
                "row {k} column {j}: {v} outside [{a}, {b}]"
            );
        }
    }
}

#[test]
fn every_source_row_is_used_at_least_floor_times() {
    let real = bootstrap_ground_truth(&GroundTruthSpec::default(), 300, 4).unwrap();
    let out = generate_portfolio(&real, &SmoteConfig::new(750, 4)).unwrap();
    let mut uses = vec![0usize; 300];
    for r in &out.neighbors {
        uses[r.source] += 1;
    }
    assert!(uses.iter().all(|&u| u == 2 || u == 3));
    assert_eq!(uses.iter().filter(|&&u| u == 3).count(), 150);
}

#[test]
fn generation_is_deterministic_per_seed() {
    let real = bootstrap_ground_truth(&GroundTruthSpec::default(), 400, 8).unwrap();
    let a = generate_portfolio(&real, &SmoteConfig::new(500, 3)).unwrap();
    let b = generate_portfolio(&real, &SmoteConfig::new(500, 3)).unwrap();
    let c = generate_portfolio(&real, &SmoteConfig::new(500, 4)).unwrap();
    assert_eq!(a.portfolio.data(), b.portfolio.data());
    assert_eq!(a.neighbors_csv(), b.neighbors_csv());
    assert_ne!(a.portfolio.data(), c.portfolio.data());
}

#[test]
fn u_shape_weights_follow_the_arcsine_law() {
    let mut r = rng::seeded(99);
    let mut w: Vec<f64> = (0..100_000).map(|_| u_shape_sample(&mut r, 0.5)).collect();
    w.sort_by(f64::total_cmp);
    let n = w.len() as f64;
    let ks = w
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = arcsine_cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS distance {ks}");
    let below = w.iter().filter(|&&x| x < 0.1).count() as f64 / n;
    assert!((arcsine_cdf(0.1) - 0.2048).abs() < 1e-4);
    assert!((below - 0.205).abs() < 0.01, "P(w < 0.1) = {below}");
}

proptest! {
    #[test]
    fn interpolation_is_coordinatewise_between_endpoints(
        pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..20),
        w in 0.0f64..=1.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let z = interpolate(&a, &b, w);
        for j in 0..a.len() {
            prop_assert!(a[j].min(b[j]) <= z[j] && z[j] <= a[j].max(b[j]));
        }
    }

    #[test]
    fn u_shape_samples_lie_in_unit_interval(seed in 0u64..10_000, alpha in 0.05f64..0.95) {
        let w = u_shape_sample(&mut rng::seeded(seed), alpha);
        prop_assert!((0.0..=1.0).contains(&w));
    }
}
