//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pinn_core::loss::{LossWeights, PinnLoss};
use pinn_core::network::Architecture;
use pinn_core::sampling::{CollocationSet, Point, SpaceTimeDomain};
use pinn_core::transport::{ConditionSpec, ResidualSpec};

fn sigma(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Hand-derived gradients of the `[2, 2, 1]` loss with one residual point
/// `(x, t)` and one initial point `(xi, 0)`, speed 3.
///
/// `p` holds the parameters by label: `[w1, w2, w3, w4, w5, w6, b1, b2, b3]`.
/// Returns `(∂L_f/∂p, ∂L_b/∂p)` in the same order, where `L_b` is the
/// initial-condition term.
pub fn closed_form_gradients(p: [f64; 9], x: f64, t: f64, xi: f64) -> ([f64; 9], [f64; 9]) {
    let [w1, w2, w3, w4, w5, w6, b1, b2, b3] = p;
    // Residual point.
    let f1 = sigma(w1 * x + w3 * t + b1);
    let f2 = sigma(w2 * x + w4 * t + b2);
    let d1 = f1 * (1.0 - f1);
    let d2 = f2 * (1.0 - f2);
    let a = w5 * d1 * (3.0 * w1 + w3) + w6 * d2 * (3.0 * w2 + w4);
    let s1 = w5 * (3.0 * w1 + w3) * d1 * (1.0 - 2.0 * f1);
    let s2 = w6 * (3.0 * w2 + w4) * d2 * (1.0 - 2.0 * f2);
    let lf = [
        2.0 * a * (x * s1 + 3.0 * w5 * d1),
        2.0 * a * (x * s2 + 3.0 * w6 * d2),
        2.0 * a * (t * s1 + w5 * d1),
        // The printed expression has w5 in the second summand; the chain
        // rule through the second hidden unit gives w6.
        2.0 * a * (t * s2 + w6 * d2),
        2.0 * a * d1 * (3.0 * w1 + w3),
        2.0 * a * d2 * (3.0 * w2 + w4),
        2.0 * a * s1,
        2.0 * a * s2,
        0.0,
    ];
    // Initial point.
    let g1 = sigma(w1 * xi + b1);
    let g2 = sigma(w2 * xi + b2);
    let b = w5 * g1 + w6 * g2 + b3 - xi * (-(xi * xi)).exp();
    let lb = [
        2.0 * b * xi * w5 * g1 * (1.0 - g1),
        2.0 * b * xi * w6 * g2 * (1.0 - g2),
        0.0,
        0.0,
        2.0 * b * g1,
        2.0 * b * g2,
        2.0 * b * w5 * g1 * (1.0 - g1),
        2.0 * b * w6 * g2 * (1.0 - g2),
        2.0 * b,
    ];
    (lf, lb)
}

/// Flat-vector index of each label `w1..w6, b1..b3`.
pub const LABEL_TO_FLAT: [usize; 9] = [0, 2, 1, 3, 6, 7, 4, 5, 8];

pub fn labels_to_flat(p: [f64; 9]) -> Vec<f64> {
    let mut flat = vec![0.0; 9];
    for (label, &i) in LABEL_TO_FLAT.iter().enumerate() {
        flat[i] = p[label];
    }
    flat
}

pub fn flat_to_labels(flat: &[f64]) -> [f64; 9] {
    LABEL_TO_FLAT.map(|i| flat[i])
}

/// The hand scenario's loss restricted to the residual (`w_f`) and/or
/// initial (`w_i`) terms.
pub fn hand_loss(x: f64, t: f64, xi: f64, w_f: f64, w_i: f64) -> PinnLoss {
    let colloc = CollocationSet {
        interior: vec![Point::new(x, t)],
        initial: vec![Point::new(xi, 0.0)],
        ..CollocationSet::default()
    };
    PinnLoss::assemble(
        &Architecture::mlp(&[2]).unwrap(),
        &ResidualSpec::Fixed(3.0),
        &ConditionSpec::default(),
        &SpaceTimeDomain::tutorial(),
        &colloc,
        &LossWeights {
            w_f,
            w_b: 0.0,
            w_i,
            w_obs: 0.0,
        },
    )
    .unwrap()
}

/// `|a − b| ≤ rel·max(|a|, |b|) + floor`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}

/// Central difference of `f` along coordinate `i` with step `h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, theta: &[f64], i: usize, h: f64) -> f64 {
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Seeded generator for picking test inputs.
pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
