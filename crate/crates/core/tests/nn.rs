use ndarray::{Array1, Array2};
use proptest::prelude::*;
use telesynth::hyperopt::Hyperparameters;
use telesynth::nn::{
    adam_step, batch_loss, train, Activation, AdamState, LossKind, Network, TrainSpec,
};
use telesynth::rng;

// Two Adam steps with g = 1, α = 0.1, θ₀ = 0, traced at 50 digits.
const SCALAR_TRACE: [(f64, f64, f64, f64); 2] = [
    (0.03162277660168379, 0.1, 0.001, -0.09999996837723339),
    (0.023531672532745428, 0.19, 0.001999, -0.19999994601096635),
];

#[test]
fn adam_two_step_hand_trace() {
    let mut state = AdamState::<f64>::new(0.1, 1);
    let mut theta = vec![0.0];
    for (step, (alpha_t, m, v, th)) in SCALAR_TRACE.iter().enumerate() {
        let (next_theta, next_state) = adam_step(&state, &theta, &[1.0]).unwrap();
        let t = (step + 1) as i32;
        let computed_alpha = 0.1 * (1.0 - 0.999f64.powi(t)).sqrt() / (1.0 - 0.9f64.powi(t));
        assert!((computed_alpha - alpha_t).abs() < 1e-15);
        assert!((next_state.m[0] - m).abs() < 1e-12);
        assert!((next_state.v[0] - v).abs() < 1e-12);
        assert!(
            (next_theta[0] - th).abs() < 1e-12,
            "{} vs {th}",
            next_theta[0]
        );
        assert_eq!(next_state.t, t as u64);
        state = next_state;
        theta = next_theta;
    }
}

#[test]
fn adam_two_step_vector_trace() {
    let state = AdamState::<f64>::new(0.1, 2);
    let (theta, state) = adam_step(&state, &[0.5, -1.25], &[1.0, -0.5]).unwrap();
    assert!((theta[0] - 0.4000000316227666).abs() < 1e-12);
    assert!((theta[1] - -1.1500000632455132).abs() < 1e-12);
    let (theta, state) = adam_step(&state, &theta, &[0.5, 2.0]).unwrap();
    assert!((state.m[0] - 0.14).abs() < 1e-12 && (state.m[1] - 0.155).abs() < 1e-12);
    assert!((state.v[0] - 0.001249).abs() < 1e-12 && (state.v[1] - 0.00424975).abs() < 1e-12);
    assert!((theta[0] - 0.30678209411819274).abs() < 1e-12);
    assert!((theta[1] - -1.2059504040666577).abs() < 1e-12);
}

#[test]
fn zero_gradient_from_fresh_state_is_a_no_op() {
    let state = AdamState::<f64>::new(0.01, 3);
    let theta = [0.3, -2.0, 7.5];
    let (next, _) = adam_step(&state, &theta, &[0.0; 3]).unwrap();
    assert_eq!(next, theta.to_vec());
}

#[test]
fn first_step_is_minus_alpha_sign() {
    let (theta, _) = adam_step(&AdamState::<f64>::new(0.1, 1), &[1.0], &[2.0]).unwrap();
    assert!((theta[0] - 0.9).abs() < 1e-6);
}

#[test]
fn constant_gradient_step_tends_to_alpha() {
    let mut state = AdamState::<f64>::new(0.01, 2);
    let mut theta = vec![0.0, 0.0];
    for _ in 0..9_999 {
        state.step(&mut theta, &[3.0, -0.2]).unwrap();
    }
    let before = theta.clone();
    state.step(&mut theta, &[3.0, -0.2]).unwrap();
    assert_eq!(state.t, 10_000);
    assert!((before[0] - theta[0] - 0.01).abs() < 1e-6);
    assert!((theta[1] - before[1] - 0.01).abs() < 1e-6);
}

#[test]
fn adam_shape_mismatch_is_an_error() {
    assert!(adam_step(&AdamState::<f64>::new(0.1, 2), &[0.0], &[1.0]).is_err());
}

fn numeric_gradient(
    net: &Network<f64>,
    x: &Array2<f64>,
    y: &Array1<f64>,
    kind: LossKind,
    h: f64,
) -> Vec<f64> {
    let base = net.params();
    // Cross entropy is evaluated from the logit as softplus(z) − y·z so that
    // saturated outputs do not lose digits in 1 − p.
    let sigmoid_ce =
        kind == LossKind::CrossEntropy && net.output_activation() == Activation::Sigmoid;
    let output = if sigmoid_ce {
        Activation::Identity
    } else {
        net.output_activation()
    };
    let mut probe =
        Network::from_layers(net.layers().to_vec(), net.hidden_activation(), output).unwrap();
    let loss_at = |p: &[f64], probe: &mut Network<f64>| {
        probe.set_params(p).unwrap();
        let out = probe.forward_batch(x.view()).unwrap();
        if sigmoid_ce {
            let softplus = |z: f64| z.max(0.0) + (-z.abs()).exp().ln_1p();
            out.iter()
                .zip(y)
                .map(|(&z, &t)| softplus(z) - t * z)
                .sum::<f64>()
                / out.len() as f64
        } else {
            batch_loss(kind, out.as_slice().unwrap(), y.as_slice().unwrap())
        }
    };
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            let up = loss_at(&p, &mut probe);
            p[i] = base[i] - h;
            let down = loss_at(&p, &mut probe);
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut r = rng::seeded(2024);
    let hidden = [Activation::Sigmoid, Activation::Relu, Activation::Identity];
    for case in 0..20 {
        let n_in = r.random_range(1..=5);
        let depth = r.random_range(1..=3);
        let mut sizes = vec![n_in];
        sizes.extend((0..depth).map(|_| r.random_range(1..=10)));
        sizes.push(1);
        let (output, kind) = if case % 2 == 0 {
            (Activation::Sigmoid, LossKind::CrossEntropy)
        } else {
            (Activation::Identity, LossKind::Mse)
        };
        let mut net = Network::zeros(&sizes, hidden[case % 3], output).unwrap();
        let params: Vec<f64> = (0..net.param_count())
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        net.set_params(&params).unwrap();
        let n = r.random_range(1..=6);
        let x = Array2::from_shape_fn((n, n_in), |_| r.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |_| {
            if kind == LossKind::CrossEntropy {
                f64::from(r.random_range(0..2u8))
            } else {
                r.random_range(-1.0..1.0)
            }
        });
        let (_, g) = net.backward(x.view(), y.view(), kind).unwrap();
        let analytic = g.to_flat();
        let numeric = numeric_gradient(&net, &x, &y, kind, 1e-6);
        for (i, (a, b)) in analytic.iter().zip(&numeric).enumerate() {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
            assert!(
                rel < 1e-5,
                "case {case} sizes {sizes:?} param {i}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn single_linear_neuron_mse_gradient() {
    let mut net =
        Network::<f64>::zeros(&[1, 1], Activation::Identity, Activation::Identity).unwrap();
    net.set_params(&[1.5, 0.0]).unwrap();
    let x = Array2::from_elem((1, 1), 2.0);
    let y = Array1::from_elem(1, 1.0);
    let (_, g) = net.backward(x.view(), y.view(), LossKind::Mse).unwrap();
    // 2(wx − y)x with w = 1.5, x = 2, y = 1.
    assert!((g.to_flat()[0] - 8.0).abs() < 1e-12);
}

fn xor() -> (Array2<f64>, Array1<f64>) {
    let x = Array2::from_shape_vec((4, 2), vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
    (x, Array1::from(vec![0.0, 1.0, 1.0, 0.0]))
}

fn xor_arch() -> Hyperparameters {
    Hyperparameters {
        n_hidden_layers: 1,
        nodes_first: 8,
        nodes_rest: 8,
        activation: Activation::Relu,
        batch_size: 4,
        learning_rate: 0.05,
    }
}

#[test]
fn xor_is_learned() {
    let (x, y) = xor();
    let spec = TrainSpec {
        loss: LossKind::CrossEntropy,
        epochs: 2000,
        seed: 3,
    };
    let (net, history) =
        train(x.view(), y.view(), &xor_arch(), Activation::Sigmoid, &spec).unwrap();
    let pred = net.forward_batch(x.view()).unwrap();
    let ce = batch_loss(
        LossKind::CrossEntropy,
        pred.as_slice().unwrap(),
        y.as_slice().unwrap(),
    );
    assert!(ce < 0.05, "final cross entropy {ce}");
    assert_eq!(history.len(), 2000);
}

#[test]
fn training_is_bitwise_deterministic() {
    let (x, y) = xor();
    let spec = TrainSpec {
        loss: LossKind::CrossEntropy,
        epochs: 50,
        seed: 9,
    };
    let a = train(x.view(), y.view(), &xor_arch(), Activation::Sigmoid, &spec).unwrap();
    let b = train(x.view(), y.view(), &xor_arch(), Activation::Sigmoid, &spec).unwrap();
    assert_eq!(a.0.to_text(), b.0.to_text());
    assert_eq!(a.1, b.1);
}

#[test]
fn zero_epochs_return_initial_weights() {
    let (x, y) = xor();
    let spec = TrainSpec {
        loss: LossKind::CrossEntropy,
        epochs: 0,
        seed: 5,
    };
    let (net, history) =
        train(x.view(), y.view(), &xor_arch(), Activation::Sigmoid, &spec).unwrap();
    let init = Network::init(
        &xor_arch().layer_sizes(2),
        Activation::Relu,
        Activation::Sigmoid,
        &mut rng::seeded(5),
    )
    .unwrap();
    assert_eq!(net, init);
    assert!(history.is_empty());
}

#[test]
fn separable_training_loss_mostly_decreases() {
    let mut r = rng::seeded(77);
    let n = 200;
    let x = Array2::from_shape_fn((n, 2), |_| r.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(n, |i| {
        if x[[i, 0]] + x[[i, 1]] > 0.0 {
            1.0
        } else {
            0.0
        }
    });
    let arch = Hyperparameters {
        nodes_first: 4,
        nodes_rest: 4,
        batch_size: 200,
        learning_rate: 0.01,
        ..xor_arch()
    };
    let spec = TrainSpec {
        loss: LossKind::CrossEntropy,
        epochs: 110,
        seed: 1,
    };
    let (_, h) = train(x.view(), y.view(), &arch, Activation::Sigmoid, &spec).unwrap();
    let rises = h[10..].windows(2).filter(|w| w[1] > w[0]).count();
    assert!(
        rises as f64 <= 0.05 * (h.len() - 11) as f64,
        "{rises} increases"
    );
}

#[test]
fn text_round_trip_is_exact() {
    let net = Network::<f64>::init(
        &[3, 5, 2, 1],
        Activation::Relu,
        Activation::Sigmoid,
        &mut rng::seeded(4),
    )
    .unwrap();
    assert_eq!(Network::from_text(&net.to_text()).unwrap(), net);
}

proptest! {
    #[test]
    fn sigmoid_output_stays_in_unit_interval(seed in 0u64..1000, scale in 0.1f64..50.0, xs in prop::collection::vec(-100.0f64..100.0, 3)) {
        let mut net = Network::<f64>::init(&[3, 4, 1], Activation::Relu, Activation::Sigmoid, &mut rng::seeded(seed)).unwrap();
        let p: Vec<f64> = net.params().iter().map(|w| w * scale).collect();
        net.set_params(&p).unwrap();
        let out = net.forward(&xs).unwrap();
        prop_assert!(out >= 0.0 && out <= 1.0);
    }
}
