use proptest::prelude::*;
use telesynth::hyperopt::{
    expected_improvement, gp_fit, tune, Dimension, GpSurrogate, SearchSpace,
};

fn line() -> SearchSpace {
    SearchSpace::new(vec![(
        "x".into(),
        Dimension::Continuous {
            low: 0.0,
            high: 1.0,
            log: false,
        },
    )])
    .unwrap()
}

#[test]
fn expected_improvement_closed_forms() {
    assert_eq!(expected_improvement(0.3, 0.0, 1.0), 0.7);
    assert_eq!(expected_improvement(1.3, 0.0, 1.0), 0.0);
    let phi0 = expected_improvement(2.0, 1.0, 2.0);
    assert!((phi0 - 0.39894).abs() < 1e-5, "{phi0}");
    let scaled = expected_improvement(2.0, 4.0, 2.0);
    assert!((scaled - 2.0 * 0.3989422804014327).abs() < 1e-12);
}

#[test]
fn noise_free_posterior_interpolates() {
    let points: Vec<Vec<f64>> = vec![
        vec![0.1, 0.2],
        vec![0.5, 0.9],
        vec![0.8, 0.4],
        vec![0.3, 0.6],
    ];
    let losses = vec![1.5, -0.2, 0.7, 3.0];
    let gp =
        GpSurrogate::<f64>::with_hyperparameters(points.clone(), losses.clone(), 0.4, 2.0, 0.0)
            .unwrap();
    for (p, y) in points.iter().zip(&losses) {
        let (mean, var) = gp.posterior(p);
        assert!((mean - y).abs() < 1e-6, "{mean} vs {y}");
        assert!(var < 1e-6);
    }
}

#[test]
fn fitted_surrogate_interpolates_closely() {
    let points: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
    let losses: Vec<f64> = points.iter().map(|p| (p[0] - 0.3).powi(2)).collect();
    let gp = gp_fit(&points, &losses).unwrap();
    for (p, y) in points.iter().zip(&losses) {
        assert!((gp.posterior(p).0 - y).abs() < 1e-3);
    }
}

#[test]
fn tune_finds_a_quadratic_minimum() {
    let result = tune(&line(), 25, 17, |p| Ok::<_, ()>((p[0] - 0.3).powi(2))).unwrap();
    assert_eq!(result.trace.len(), 25);
    assert!(
        (result.best[0] - 0.3).abs() < 0.05,
        "best {:?}",
        result.best
    );
}

#[test]
fn tune_is_deterministic_and_survives_failures() {
    let objective = |p: &[f64]| {
        if p[0] > 0.9 {
            Err(())
        } else {
            Ok((p[0] - 0.6).powi(2))
        }
    };
    let a = tune(&line(), 12, 5, objective).unwrap();
    let b = tune(&line(), 12, 5, objective).unwrap();
    assert_eq!(a, b);
    assert!(a.trace.iter().all(|e| e.loss.is_finite()));
}

proptest! {
    #[test]
    fn expected_improvement_is_nonnegative(mean in -1e3f64..1e3, var in 0.0f64..1e3, best in -1e3f64..1e3) {
        prop_assert!(expected_improvement(mean, var, best) >= 0.0);
    }
}
