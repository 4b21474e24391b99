use telesynth::claims::{
    build_cascade_datasets, simulate_claims, train_frequency_cascade, train_severity, CountMode,
    FrequencyCascade, SeverityModel, SimulateOptions, TrainOptions,
};
use telesynth::dataio::{bootstrap_ground_truth, GroundTruthSpec};
use telesynth::hyperopt::Hyperparameters;
use telesynth::nn::Activation;
use telesynth::schema::{EncodeOptions, EncodingCodec, Portfolio};
use telesynth::synth::smote_codec;
use telesynth::validate::{confusion_matrix, qq_points};
use telesynth::Error;

fn small(nodes: usize, batch: usize, lr: f64) -> Hyperparameters {
    Hyperparameters {
        n_hidden_layers: 2,
        nodes_first: nodes,
        nodes_rest: nodes,
        activation: Activation::Relu,
        batch_size: batch,
        learning_rate: lr,
    }
}

fn small_archs() -> [Hyperparameters; 3] {
    [
        small(64, 64, 0.002),
        small(32, 16, 0.002),
        small(16, 8, 0.002),
    ]
}

/// Counts decided by Credit.score bands separated by gaps.
fn separable_toy() -> Portfolio {
    let base = bootstrap_ground_truth(&GroundTruthSpec::default(), 3_000, 5).unwrap();
    let credit = base.column("Credit.score").unwrap();
    let band = |c: f64| match c {
        c if c >= 800.0 => Some(0.0),
        c if (720.0..=770.0).contains(&c) => Some(1.0),
        c if (640.0..=690.0).contains(&c) => Some(2.0),
        c if c <= 610.0 => Some(3.0),
        _ => None,
    };
    let keep: Vec<usize> = (0..credit.len())
        .filter(|&i| band(credit[i]).is_some())
        .collect();
    let features = base.select(&keep).features_only();
    let responses: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| {
            let nb = band(credit[i]).unwrap();
            vec![nb, 100.0 * nb]
        })
        .collect();
    features.with_responses(&responses).unwrap()
}

#[test]
fn separable_toy_gives_a_diagonal_confusion_matrix() {
    let toy = separable_toy();
    let counts = toy.claim_counts().unwrap();
    assert!((0..4).all(|k| counts.contains(&(k as f64))));
    let codec = smote_codec(&toy).unwrap();
    let archs = [
        small(32, 16, 0.005),
        small(32, 8, 0.005),
        small(16, 4, 0.005),
    ];
    let (cascade, _) =
        train_frequency_cascade(&toy, &codec, &archs, &TrainOptions::new(200, 3)).unwrap();
    let x = codec.encode(&toy.features_only()).unwrap();
    let predicted: Vec<f64> = cascade
        .predict_counts(&x)
        .unwrap()
        .into_iter()
        .map(f64::from)
        .collect();
    let cm = confusion_matrix(&counts, &predicted).unwrap();
    assert!(cm.is_diagonal(), "{cm}");
}

#[test]
fn first_sub_simulation_recovers_the_bootstrap_signal() {
    let real = bootstrap_ground_truth(&GroundTruthSpec::default(), 20_000, 7).unwrap();
    let codec = smote_codec(&real).unwrap();
    let (cascade, reports) =
        train_frequency_cascade(&real, &codec, &small_archs(), &TrainOptions::new(20, 1)).unwrap();
    assert_eq!(reports.len(), 3);
    let d = build_cascade_datasets(&real).unwrap();
    let x = codec.encode(&real.features_only()).unwrap();
    let p = cascade.probabilities(&x).unwrap();
    let hits = d.stages[0]
        .labels
        .iter()
        .zip(&p)
        .filter(|(l, p)| (p[0] >= 0.5) == (**l == 1.0))
        .count();
    let accuracy = hits as f64 / real.n_rows() as f64;
    let zero_share = 1.0 - d.stages[0].positives() as f64 / real.n_rows() as f64;
    assert!(
        accuracy >= zero_share.max(0.98),
        "accuracy {accuracy}, zero share {zero_share}"
    );

    let back = FrequencyCascade::from_text(&cascade.to_text()).unwrap();
    assert_eq!(back, cascade);
}

#[test]
fn severity_quantiles_track_actual_amounts() {
    let real = bootstrap_ground_truth(&GroundTruthSpec::default(), 20_000, 11).unwrap();
    let codec = smote_codec(&real).unwrap();
    let (severity, _) = train_severity(
        &real,
        &codec,
        &small(64, 16, 0.002),
        &TrainOptions::new(60, 2),
    )
    .unwrap();
    let counts = real.claim_counts().unwrap();
    let amounts = real.claim_amounts().unwrap();
    let rows: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0.0).collect();
    let claimants = real.select(&rows);
    let nb: Vec<f64> = rows.iter().map(|&i| counts[i]).collect();
    let inputs = telesynth::claims::severity_inputs(&codec, &claimants, &nb).unwrap();
    let predicted = severity.predict(&inputs).unwrap();
    let actual: Vec<f64> = rows.iter().map(|&i| amounts[i]).collect();
    let qq = qq_points(&actual, &predicted, 99).unwrap();
    for (i, (a, p)) in qq.iter().enumerate() {
        let prob = (i + 1) as f64 / 100.0;
        if (0.1..=0.9).contains(&prob) {
            assert!(
                (p - a).abs() <= 0.15 * a,
                "quantile {prob}: actual {a}, predicted {p}"
            );
        }
    }

    let back = SeverityModel::from_text(&severity.to_text()).unwrap();
    assert_eq!(back, severity);
}

#[test]
fn simulated_amounts_are_zero_exactly_when_counts_are() {
    let real = bootstrap_ground_truth(&GroundTruthSpec::default(), 4_000, 2).unwrap();
    let codec = smote_codec(&real).unwrap();
    let (cascade, _) =
        train_frequency_cascade(&real, &codec, &small_archs(), &TrainOptions::new(5, 1)).unwrap();
    let (severity, _) = train_severity(
        &real,
        &codec,
        &small(16, 16, 0.002),
        &TrainOptions::new(5, 1),
    )
    .unwrap();
    for mode in [CountMode::Threshold, CountMode::Bernoulli] {
        let opts = SimulateOptions {
            mode,
            seed: 4,
            min_amount: 0.01,
        };
        let sim = simulate_claims(&cascade, &severity, &real.features_only(), &opts).unwrap();
        let nb = sim.claim_counts().unwrap();
        let amt = sim.claim_amounts().unwrap();
        assert!(nb.iter().zip(&amt).all(|(&n, &a)| (n == 0.0) == (a == 0.0)));
        assert!(nb
            .iter()
            .all(|&n| (0.0..=3.0).contains(&n) && n.fract() == 0.0));
        let again = simulate_claims(&cascade, &severity, &real.features_only(), &opts).unwrap();
        assert_eq!(sim.data(), again.data());
    }
}

#[test]
fn claim_free_portfolio_cannot_train_the_first_stage() {
    let real = bootstrap_ground_truth(&GroundTruthSpec::default(), 200, 2).unwrap();
    let zeros = vec![vec![0.0, 0.0]; real.n_rows()];
    let none = real.features_only().with_responses(&zeros).unwrap();
    let codec = smote_codec(&none).unwrap();
    let err = train_frequency_cascade(&none, &codec, &small_archs(), &TrainOptions::new(1, 1))
        .unwrap_err();
    assert!(matches!(err, Error::SingleClass));
    let err =
        train_severity(&none, &codec, &small(8, 8, 0.01), &TrainOptions::new(1, 1)).unwrap_err();
    assert!(matches!(err, Error::NoClaimants));
}

#[test]
fn models_with_different_encoders_are_rejected() {
    let real = bootstrap_ground_truth(&GroundTruthSpec::default(), 2_000, 3).unwrap();
    let codec = smote_codec(&real).unwrap();
    let other = EncodingCodec::fit(&real.features_only(), &EncodeOptions::default()).unwrap();
    assert_ne!(codec, other);
    let (cascade, _) =
        train_frequency_cascade(&real, &codec, &small_archs(), &TrainOptions::new(1, 1)).unwrap();
    let (severity, _) =
        train_severity(&real, &other, &small(8, 8, 0.01), &TrainOptions::new(1, 1)).unwrap();
    let err = simulate_claims(
        &cascade,
        &severity,
        &real.features_only(),
        &SimulateOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::EncoderMismatch(_)));
}
