mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sagin_sfc::learn::{ddqn_target, dqn_target, train_step, DenseNet, DqnVariant, Optimizer, OptimizerKind, StoredTransition};

#[test]
fn golden_values_match_reference_vectors() {
    for g in golden_values() {
        assert!(g.ok(), "{} computed {} expected {}", g.name, g.computed, g.expected);
    }
}

#[test]
fn u2u_path_loss_matches_quoted_precision() {
    assert_eq!((U2U_PATH_LOSS_GOLDEN_DB * 1000.0).round() / 1000.0, 80.054);
    assert_eq!((HOVER_POWER_GOLDEN_W * 100.0).round() / 100.0, 9.77);
}

#[test]
fn backprop_matches_central_differences() {
    for seed in 0..20 {
        let worst = gradient_check(seed);
        assert!(worst < GRADIENT_TOLERANCE, "seed {seed}: relative error {worst:e}");
    }
}

#[test]
fn forward_matches_reference_implementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let net = DenseNet::<f64>::new(&GRADIENT_WIDTHS, &mut rng).unwrap();
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = net.forward(&x).unwrap();
        let b = reference_forward(&GRADIENT_WIDTHS, net.params(), &x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0), "{u} vs {v}");
        }
    }
}

fn transition(state: Vec<f64>, action: usize, reward: f64, next: Option<Vec<f64>>) -> StoredTransition<f64> {
    StoredTransition { state, action, reward, slots: 1, next_state: next, next_mask: vec![0, 1] }
}

#[test]
fn repeated_batch_is_fitted() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut online = DenseNet::<f64>::new(&[3, 16, 2], &mut rng).unwrap();
    let target = online.clone();
    let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, online.param_count());
    let tr = transition(vec![0.3, -0.2, 0.9], 1, 2.5, None);
    let batch = vec![&tr; 4];
    let mut losses = Vec::new();
    for _ in 0..300 {
        losses.push(train_step(&mut online, &target, &mut opt, &batch, 0.9, DqnVariant::Double).unwrap());
    }
    assert!(losses[299] < 1e-6, "final loss {}", losses[299]);
    assert!(losses[299] < losses[0]);
    let q = online.forward(&[0.3, -0.2, 0.9]).unwrap()[1];
    assert!((q - 2.5).abs() < 1e-3);
}

#[test]
fn zero_discount_targets_reduce_to_reward() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = DenseNet::<f64>::new(&[2, 4, 2], &mut rng).unwrap();
    let b = DenseNet::<f64>::new(&[2, 4, 2], &mut rng).unwrap();
    assert_eq!(ddqn_target(1.5, &[0.1, 0.2], &[0, 1], false, &a, &b, 0.0).unwrap(), 1.5);
    assert_eq!(dqn_target(1.5, &[0.1, 0.2], &[0, 1], false, &b, 0.0).unwrap(), 1.5);
}

#[test]
fn identical_networks_give_identical_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = DenseNet::<f64>::new(&[2, 4, 3], &mut rng).unwrap();
    let s = [0.4, -0.7];
    assert_eq!(
        ddqn_target(0.5, &s, &[0, 2], false, &a, &a, 0.9).unwrap(),
        dqn_target(0.5, &s, &[0, 2], false, &a, 0.9).unwrap()
    );
}

#[test]
fn adadelta_also_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut online = DenseNet::<f64>::new(&[2, 8, 2], &mut rng).unwrap();
    let target = online.clone();
    let mut opt = Optimizer::new(OptimizerKind::Adadelta, 1.0, online.param_count());
    let tr = transition(vec![1.0, 0.5], 0, -1.0, None);
    let batch = vec![&tr];
    let first = train_step(&mut online, &target, &mut opt, &batch, 0.9, DqnVariant::Vanilla).unwrap();
    let mut last = first;
    for _ in 0..2000 {
        last = train_step(&mut online, &target, &mut opt, &batch, 0.9, DqnVariant::Vanilla).unwrap();
    }
    assert!(last < first * 1e-2, "{first} -> {last}");
}
