mod common;

use common::{
    central_difference, close, closed_form_gradients, flat_to_labels, hand_loss, labels_to_flat,
    test_rng,
};
use pinn_core::loss::{LossWeights, PinnLoss};
use pinn_core::network::{init_network, Architecture, InitScheme};
use pinn_core::sampling::{
    make_observation_grid, sample_boundary, sample_initial, sample_interior, CollocationSet,
    SamplingMode, SpaceTimeDomain,
};
use pinn_core::transport::{exact_solution, BoundaryCondition, ConditionSpec, ResidualSpec};
use rand::Rng;

const LABELS: [&str; 9] = ["w1", "w2", "w3", "w4", "w5", "w6", "b1", "b2", "b3"];

#[test]
fn closed_form_gradients_match_at_random_points() {
    let mut rng = test_rng(11);
    for case in 0..100 {
        let x = rng.gen_range(-1.5..1.5);
        let t = rng.gen_range(0.0..2.0);
        let xi = rng.gen_range(-1.5..1.5);
        let labels: [f64; 9] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let theta = labels_to_flat(labels);
        let (lf, lb) = closed_form_gradients(labels, x, t, xi);

        let residual_only = hand_loss(x, t, xi, 1.0, 0.0);
        let initial_only = hand_loss(x, t, xi, 0.0, 1.0);
        let both = hand_loss(x, t, xi, 1.0, 1.0);
        let gf = flat_to_labels(&residual_only.value_and_gradient(&theta).unwrap().1);
        let gb = flat_to_labels(&initial_only.value_and_gradient(&theta).unwrap().1);
        let g = flat_to_labels(&both.value_and_gradient(&theta).unwrap().1);
        for k in 0..9 {
            assert!(
                close(gf[k], lf[k], 1e-10, 1e-14),
                "case {case}: dL_f/d{} = {} vs {}",
                LABELS[k],
                gf[k],
                lf[k]
            );
            assert!(
                close(gb[k], lb[k], 1e-10, 1e-14),
                "case {case}: dL_b/d{} = {} vs {}",
                LABELS[k],
                gb[k],
                lb[k]
            );
            assert!(close(g[k], lf[k] + lb[k], 1e-10, 1e-14));
        }
        assert_eq!(gb[2], 0.0);
        assert_eq!(gb[3], 0.0);
        assert_eq!(gf[8], 0.0);
    }
}

#[test]
fn closed_form_loss_values_match_hand_scenario() {
    let loss = hand_loss(0.1, 0.1, 0.1, 1.0, 1.0);
    let theta = labels_to_flat([0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0]);
    let b = loss.evaluate(&theta).unwrap();
    let s = |z: f64| 1.0 / (1.0 + (-z).exp());
    let a = 2.0 * 0.5 * s(0.1) * (1.0 - s(0.1)) * 2.0;
    let init = s(0.05) - 0.1 * (-0.01f64).exp();
    assert!(close(b.residual_term, a * a, 1e-14, 0.0));
    assert!(close(b.initial_term, init * init, 1e-14, 0.0));
}

fn mixed_loss(arch: &Architecture, trainable: bool) -> PinnLoss {
    let d = SpaceTimeDomain::tutorial();
    let mode = SamplingMode::UniformRandom;
    let colloc = CollocationSet {
        interior: sample_interior(&d, 12, 4, mode).unwrap(),
        boundary: sample_boundary(&d, 6, 4, mode).unwrap(),
        initial: sample_initial(&d, 6, 4, mode).unwrap(),
        observations: make_observation_grid(&d, 3, 3, exact_solution).unwrap(),
    };
    let spec = if trainable {
        ResidualSpec::Trainable(1.3)
    } else {
        ResidualSpec::Fixed(3.0)
    };
    PinnLoss::assemble(
        arch,
        &spec,
        &ConditionSpec::new(BoundaryCondition::DirichletExact),
        &d,
        &colloc,
        &LossWeights {
            w_f: 1.0,
            w_b: 0.7,
            w_i: 1.3,
            w_obs: 0.5,
        },
    )
    .unwrap()
}

fn finite_difference_gate(hidden: &[usize], trainable: bool) {
    let arch = Architecture::mlp(hidden).unwrap();
    let loss = mixed_loss(&arch, trainable);
    let mut theta = init_network(&arch, InitScheme::GlorotUniform, 8)
        .unwrap()
        .into_flat();
    if trainable {
        theta.push(1.3);
    }
    let (_, grad) = loss.value_and_gradient(&theta).unwrap();
    let f = |p: &[f64]| loss.evaluate(p).unwrap().total;
    let mut rng = test_rng(hidden.iter().sum::<usize>() as u64);
    let mut indices: Vec<usize> = (0..theta.len()).collect();
    if theta.len() > 24 {
        indices = (0..24).map(|_| rng.gen_range(0..theta.len())).collect();
        if trainable {
            indices.push(theta.len() - 1);
        }
    }
    for i in indices {
        let fd = central_difference(f, &theta, i, 1e-5);
        assert!(
            close(grad[i], fd, 1e-5, 1e-9),
            "{hidden:?} parameter {i}: autodiff {} vs central difference {fd}",
            grad[i]
        );
    }
}

#[test]
fn finite_differences_small_net() {
    finite_difference_gate(&[2], false);
    finite_difference_gate(&[2], true);
}

#[test]
fn finite_differences_wide_net() {
    finite_difference_gate(&[10], false);
    finite_difference_gate(&[10], true);
}

#[test]
fn finite_differences_deep_net() {
    finite_difference_gate(&[64, 64], false);
    finite_difference_gate(&[64, 64], true);
}

#[test]
fn gradient_is_deterministic_and_order_independent() {
    let arch = Architecture::mlp(&[8, 8]).unwrap();
    let d = SpaceTimeDomain::tutorial();
    let mode = SamplingMode::UniformRandom;
    let colloc = CollocationSet {
        interior: sample_interior(&d, 50, 2, mode).unwrap(),
        boundary: sample_boundary(&d, 20, 2, mode).unwrap(),
        initial: sample_initial(&d, 20, 2, mode).unwrap(),
        observations: make_observation_grid(&d, 4, 5, exact_solution).unwrap(),
    };
    let mut shuffled = colloc.clone();
    shuffled.interior.reverse();
    shuffled.boundary.rotate_left(7);
    shuffled.observations.reverse();
    let build = |c: &CollocationSet| {
        PinnLoss::assemble(
            &arch,
            &ResidualSpec::Trainable(0.5),
            &ConditionSpec::default(),
            &d,
            c,
            &LossWeights::default(),
        )
        .unwrap()
    };
    let mut theta = init_network(&arch, InitScheme::GlorotUniform, 3)
        .unwrap()
        .into_flat();
    theta.push(0.5);
    let a = build(&colloc).value_and_gradient(&theta).unwrap();
    let b = build(&colloc).value_and_gradient(&theta).unwrap();
    let c = build(&shuffled).value_and_gradient(&theta).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}
