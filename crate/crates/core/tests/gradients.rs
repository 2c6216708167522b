//! Reverse-mode gradients of both objectives against central differences.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slfm_core::flow::loss::{loss, loss_and_grad, FlowSample};
use slfm_core::flow::{FieldShape, LossKind, VelocityField};
use slfm_core::sphere::sample_uniform_sphere;

fn tiny_shape(d: usize) -> FieldShape {
    FieldShape {
        d,
        hidden: vec![16],
        time_dim: 4,
        n_classes: 3,
        cond_dim: 4,
    }
}

fn batch(kind: LossKind, d: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<FlowSample> {
    (0..4)
        .map(|_| {
            let (z0, z1) = match kind {
                LossKind::Slerp => (
                    sample_uniform_sphere(d, radius, rng).unwrap().into_vec(),
                    sample_uniform_sphere(d, radius, rng).unwrap().into_vec(),
                ),
                LossKind::Linear => (
                    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                ),
            };
            FlowSample {
                z0,
                z1,
                t: rng.random_range(0.05..0.95),
                cond: rng.random_range(0..3),
            }
        })
        .collect()
}

/// Worst relative error over `probes` random parameters.
fn worst_relative_error(kind: LossKind, seed: u64, probes: usize) -> f64 {
    let d = 5;
    let radius = (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = VelocityField::new(tiny_shape(d), kind, radius, &mut rng).unwrap();
    let b = batch(kind, d, radius, &mut rng);
    let (_, grad) = loss_and_grad(&field, &b, kind).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in sample_indices(&mut rng, field.n_params(), probes) {
        let mut plus = field.clone();
        plus.params_mut()[i] += h;
        let mut minus = field.clone();
        minus.params_mut()[i] -= h;
        let fd = (loss(&plus, &b, kind).unwrap() - loss(&minus, &b, kind).unwrap()) / (2.0 * h);
        let scale = grad[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((grad[i] - fd).abs() / scale);
    }
    worst
}

#[test]
fn tiny_network_has_expected_widths() {
    assert_eq!(tiny_shape(5).widths(), vec![13, 16, 5]);
}

#[test]
fn linear_loss_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let e = worst_relative_error(LossKind::Linear, seed, 100);
        assert!(e <= 1e-4, "seed {seed}: {e:e}");
    }
}

#[test]
fn slerp_loss_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let e = worst_relative_error(LossKind::Slerp, seed, 100);
        assert!(e <= 1e-4, "seed {seed}: {e:e}");
    }
}

#[test]
fn every_parameter_of_default_mlp_checks_out() {
    let d = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let field = VelocityField::new(FieldShape::mlp(d, 6), LossKind::Slerp, 1.0, &mut rng).unwrap();
    let mut b = batch(LossKind::Slerp, d, 1.0, &mut rng);
    b.iter_mut().for_each(|s| s.cond = 0);
    let (_, grad) = loss_and_grad(&field, &b, LossKind::Slerp).unwrap();
    let h = 1e-5;
    for (i, g) in grad.iter().enumerate() {
        let mut plus = field.clone();
        plus.params_mut()[i] += h;
        let mut minus = field.clone();
        minus.params_mut()[i] -= h;
        let fd = (loss(&plus, &b, LossKind::Slerp).unwrap() - loss(&minus, &b, LossKind::Slerp).unwrap()) / (2.0 * h);
        let scale = g.abs().max(fd.abs()).max(1e-6);
        assert!((g - fd).abs() / scale <= 1e-4, "param {i}: {g} vs {fd}");
    }
}
