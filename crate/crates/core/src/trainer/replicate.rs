//! The five-loop hand calculation on a `[2, 2, 1]` network at
//! `(x, t) = (0.1, 0.1)` with the initial point `(0.1, 0)`.

use crate::autodiff::eval_sigmoid as sigma;
use crate::error::Result;
use crate::loss::{LossWeights, PinnLoss};
use crate::network::Architecture;
use crate::sampling::{CollocationSet, Point, SpaceTimeDomain};
use crate::transport::{ConditionSpec, ResidualSpec, TRUE_SPEED};

pub const REPORTED_LOOP0_Y_HAT: f64 = 0.525;
pub const REPORTED_LOOP0_LOSS: f64 = 0.146;

/// Published rows `(w1..w6, b1..b3, ŷ, loss)` for loops 0 to 5.
pub const REPORTED_TABLE3: [[f64; 11]; 6] = [
    [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.525, 0.146],
    [
        0.495, 0.495, 0.503, 0.503, 0.464, 0.464, -0.002, -0.002, -0.056, 0.665, 0.132,
    ],
    [
        0.492, 0.492, 0.505, 0.505, 0.434, 0.434, -0.002, -0.002, -0.102, 0.571, 0.1008,
    ],
    [
        0.491, 0.491, 0.507, 0.507, 0.407, 0.407, -0.003, -0.003, -0.139, 0.493, 0.0786,
    ],
    [
        0.491, 0.491, 0.509, 0.509, 0.384, 0.384, -0.002, -0.002, -0.170, 0.427, 0.063,
    ],
    [
        0.493, 0.493, 0.511, 0.511, 0.364, 0.364, -0.002, -0.002, -0.194, 0.372, 0.052,
    ],
];

const X: f64 = 0.1;
const T: f64 = 0.1;
const LOOPS: usize = 5;
const LITERAL_RATE: f64 = 0.05;
const STANDARD_RATE: f64 = 0.001;

/// Flat-vector index of each hand-calculation label `w1..w6, b1..b3`.
pub const LABEL_ORDER: [usize; 9] = [0, 2, 1, 3, 6, 7, 4, 5, 8];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplicationMode {
    /// The printed update rules, verbatim: ascent steps with η = 0.05, input
    /// factors on the first-layer weights and hidden activations on w5, w6.
    Literal,
    /// Plain gradient descent, `θ − η·∇L`, with η = 0.001.
    StandardDescent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableRow {
    pub loop_index: usize,
    /// `w1..w6`.
    pub weights: [f64; 6],
    /// `b1..b3`.
    pub biases: [f64; 3],
    pub y_hat: f64,
    pub loss: f64,
}

impl TableRow {
    fn from_flat(loop_index: usize, theta: &[f64], y_hat: f64, loss: f64) -> Self {
        let p = LABEL_ORDER.map(|i| theta[i]);
        Self {
            loop_index,
            weights: [p[0], p[1], p[2], p[3], p[4], p[5]],
            biases: [p[6], p[7], p[8]],
            y_hat,
            loss,
        }
    }
}

/// Per-parameter factor in the printed update `θ + η·∂L/∂θ·factor`.
fn literal_factors(theta: &[f64]) -> [f64; 9] {
    let h1 = sigma(theta[0] * X + theta[1] * T + theta[4]);
    let h2 = sigma(theta[2] * X + theta[3] * T + theta[5]);
    [X, X, X, X, 1.0, 1.0, h1, h2, 1.0]
}

pub fn replicate_manual_table(mode: ReplicationMode) -> Result<Vec<TableRow>> {
    let arch = Architecture::mlp(&[2])?;
    let colloc = CollocationSet {
        interior: vec![Point::new(X, T)],
        initial: vec![Point::new(X, 0.0)],
        ..CollocationSet::default()
    };
    let weights = LossWeights {
        w_f: 1.0,
        w_b: 0.0,
        w_i: 1.0,
        w_obs: 0.0,
    };
    let loss = PinnLoss::assemble(
        &arch,
        &ResidualSpec::Fixed(TRUE_SPEED),
        &ConditionSpec::default(),
        &SpaceTimeDomain::tutorial(),
        &colloc,
        &weights,
    )?;
    let mut theta = vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0];
    let mut rows = Vec::with_capacity(LOOPS + 1);
    for loop_index in 0..=LOOPS {
        let (value, grad) = loss.value_and_gradient(&theta)?;
        let y_hat = crate::network::predict(&arch, &theta, X, T);
        rows.push(TableRow::from_flat(loop_index, &theta, y_hat, value.total));
        if loop_index == LOOPS {
            break;
        }
        match mode {
            ReplicationMode::Literal => {
                let factors = literal_factors(&theta);
                for ((p, g), f) in theta.iter_mut().zip(&grad).zip(factors) {
                    *p += LITERAL_RATE * g * f;
                }
            }
            ReplicationMode::StandardDescent => {
                for (p, g) in theta.iter_mut().zip(&grad) {
                    *p -= STANDARD_RATE * g;
                }
            }
        }
    }
    Ok(rows)
}
