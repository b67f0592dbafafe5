//! Fully connected surrogate `ŷ(x, t; θ)`.
//!
//! Parameters live in one flat vector, layer-major: for each layer the
//! `fan_out × fan_in` weight matrix in row-major order, then its biases. For
//! the `[2, 2, 1]` network this is `[w1, w3, w2, w4, b1, b2, w5, w6, b3]` in
//! the usual hand-derivation labelling (w1/w2 read `x`, w3/w4 read `t`).

use serde::{Deserialize, Serialize};

use crate::autodiff::{eval_sigmoid, Evaluation, NodeId, ScalarGraph, Tape};
use crate::error::{PinnError, Result};
use crate::rng::StreamRng;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => eval_sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    fn record(self, tape: &mut Tape, z: NodeId) -> NodeId {
        match self {
            Activation::Sigmoid => tape.sigmoid(z),
            Activation::Tanh => tape.tanh(z),
        }
    }
}

fn default_output_linear() -> bool {
    true
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Identity on the final layer instead of the activation.
    #[serde(default = "default_output_linear")]
    pub output_linear: bool,
}

impl Architecture {
    pub fn new(
        layer_sizes: Vec<usize>,
        activation: Activation,
        output_linear: bool,
    ) -> Result<Self> {
        let arch = Self {
            layer_sizes,
            activation,
            output_linear,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// `[2, hidden..., 1]` with sigmoid hidden units and a linear output.
    pub fn mlp(hidden: &[usize]) -> Result<Self> {
        let mut sizes = vec![2];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self::new(sizes, Activation::Sigmoid, true)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 {
            return Err(PinnError::Architecture(format!(
                "need at least an input and an output layer, got {sizes:?}"
            )));
        }
        if sizes[0] != 2 {
            return Err(PinnError::Architecture(format!(
                "input layer must have 2 units (x, t), got {}",
                sizes[0]
            )));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(PinnError::Architecture(format!(
                "output layer must have 1 unit, got {}",
                sizes.last().unwrap()
            )));
        }
        if sizes.contains(&0) {
            return Err(PinnError::Architecture(format!(
                "layer sizes must be positive, got {sizes:?}"
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each weight layer.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_sizes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|(i, o)| o * i + o).sum()
    }

    fn apply_layer(&self, layer: usize, z: f64) -> f64 {
        if self.output_linear && layer + 2 == self.layer_sizes.len() {
            z
        } else {
            self.activation.apply(z)
        }
    }
}

/// Anything that can record `ŷ(x, t; θ)` on a tape. The MLP is the only
/// production implementation; tests substitute closed-form surrogates.
pub trait Surrogate: Sync {
    fn param_count(&self) -> usize;

    fn record(&self, tape: &mut Tape, theta: &[NodeId], x: NodeId, t: NodeId) -> NodeId;
}

impl Surrogate for Architecture {
    fn param_count(&self) -> usize {
        Architecture::param_count(self)
    }

    fn record(&self, tape: &mut Tape, theta: &[NodeId], x: NodeId, t: NodeId) -> NodeId {
        assert_eq!(theta.len(), self.param_count(), "parameter count");
        let one = tape.constant(1.0);
        let n_layers = self.layer_sizes.len() - 1;
        let mut acts = vec![x, t];
        let mut offset = 0;
        for (l, (fan_in, fan_out)) in self.layers().enumerate() {
            let weights = &theta[offset..offset + fan_in * fan_out];
            let biases = &theta[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let linear = self.output_linear && l + 1 == n_layers;
            let mut next = Vec::with_capacity(fan_out);
            let mut pairs = Vec::with_capacity(fan_in + 1);
            for j in 0..fan_out {
                pairs.clear();
                pairs.extend((0..fan_in).map(|k| (weights[j * fan_in + k], acts[k])));
                pairs.push((biases[j], one));
                let z = tape.dot(&pairs);
                next.push(if linear {
                    z
                } else {
                    self.activation.record(tape, z)
                });
            }
            acts = next;
        }
        acts[0]
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitScheme {
    /// Weights uniform in `±√(6 / (fan_in + fan_out))`, biases zero.
    GlorotUniform,
    Constant {
        weight: f64,
        bias: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub arch: Architecture,
    theta: Vec<f64>,
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn init_network(arch: &Architecture, scheme: InitScheme, seed: u64) -> Result<NetworkParams> {
    arch.validate()?;
    let mut theta = Vec::with_capacity(arch.param_count());
    let mut rng = StreamRng::with_stream(seed, 0);
    for (fan_in, fan_out) in arch.layers() {
        match scheme {
            InitScheme::GlorotUniform => {
                let bound = glorot_bound(fan_in, fan_out);
                for _ in 0..fan_in * fan_out {
                    theta.push(-bound + 2.0 * bound * rng.next_f64());
                }
                theta.extend(std::iter::repeat_n(0.0, fan_out));
            }
            InitScheme::Constant { weight, bias } => {
                if !weight.is_finite() || !bias.is_finite() {
                    return Err(PinnError::Architecture(
                        "constant initializer values must be finite".into(),
                    ));
                }
                theta.extend(std::iter::repeat_n(weight, fan_in * fan_out));
                theta.extend(std::iter::repeat_n(bias, fan_out));
            }
        }
    }
    Ok(NetworkParams {
        arch: arch.clone(),
        theta,
    })
}

impl NetworkParams {
    pub fn from_flat(arch: Architecture, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(PinnError::LengthMismatch {
                expected: arch.param_count(),
                got: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(PinnError::Architecture(format!(
                "parameter {i} is not finite"
            )));
        }
        Ok(Self { arch, theta })
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.theta
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.arch.layers().take(layer).map(|(i, o)| o * i + o).sum()
    }

    /// Row-major `fan_out × fan_in` weights of `layer`.
    pub fn weights(&self, layer: usize) -> &[f64] {
        let (fan_in, fan_out) = self.arch.layers().nth(layer).expect("layer index");
        let off = self.layer_offset(layer);
        &self.theta[off..off + fan_in * fan_out]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let (fan_in, fan_out) = self.arch.layers().nth(layer).expect("layer index");
        let off = self.layer_offset(layer) + fan_in * fan_out;
        &self.theta[off..off + fan_out]
    }

    /// `ŷ(x, t)`. Accumulates in the same order as the recorded graph, so the
    /// two agree bit for bit.
    pub fn forward(&self, x: f64, t: f64) -> f64 {
        predict(&self.arch, &self.theta, x, t)
    }
}

/// Plain-float forward pass of `arch` with parameters `theta`.
pub fn predict(arch: &Architecture, theta: &[f64], x: f64, t: f64) -> f64 {
    let mut acts = vec![x, t];
    let mut offset = 0;
    for (l, (fan_in, fan_out)) in arch.layers().enumerate() {
        let weights = &theta[offset..offset + fan_in * fan_out];
        let biases = &theta[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        acts = (0..fan_out)
            .map(|j| {
                let row = &weights[j * fan_in..(j + 1) * fan_in];
                let z =
                    row.iter().zip(&acts).fold(0.0, |acc, (w, a)| acc + w * a) + biases[j] * 1.0;
                arch.apply_layer(l, z)
            })
            .collect();
    }
    acts[0]
}

/// `ŷ`, `∂ŷ/∂x` and `∂ŷ/∂t` as nodes of one tape.
#[derive(Clone, Copy, Debug)]
pub struct InputDerivs {
    pub value: NodeId,
    pub d_dx: NodeId,
    pub d_dt: NodeId,
}

/// Records the surrogate at root inputs `x`, `t` together with its input
/// derivatives.
pub fn record_with_input_derivs<S: Surrogate + ?Sized>(
    model: &S,
    tape: &mut Tape,
    theta: &[NodeId],
    x: NodeId,
    t: NodeId,
) -> Result<InputDerivs> {
    let value = model.record(tape, theta, x, t);
    let d_dx = tape.tangent(&[value], x)?[0];
    let d_dt = tape.tangent(&[value], t)?[0];
    Ok(InputDerivs { value, d_dx, d_dt })
}

/// A self-contained recording of the network at one point. Roots are the
/// parameters (in flat order) followed by `x` and `t`.
#[derive(Debug, Clone)]
pub struct NetworkPass {
    pub graph: ScalarGraph,
    pub eval: Evaluation,
    pub nodes: InputDerivs,
}

impl NetworkPass {
    pub fn value(&self) -> f64 {
        self.eval.value(self.nodes.value)
    }

    pub fn d_dx(&self) -> f64 {
        self.eval.value(self.nodes.d_dx)
    }

    pub fn d_dt(&self) -> f64 {
        self.eval.value(self.nodes.d_dt)
    }
}

pub fn forward_with_input_derivs(params: &NetworkParams, x: f64, t: f64) -> Result<NetworkPass> {
    let mut tape = Tape::new();
    let theta: Vec<NodeId> = (0..params.theta.len()).map(|_| tape.root()).collect();
    let xr = tape.root();
    let tr = tape.root();
    let nodes = record_with_input_derivs(&params.arch, &mut tape, &theta, xr, tr)?;
    let graph = tape.finish();
    let mut roots = params.theta.clone();
    roots.extend([x, t]);
    let eval = graph.evaluate(&roots)?;
    Ok(NetworkPass { graph, eval, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_net() -> NetworkParams {
        let arch = Architecture::mlp(&[2]).unwrap();
        init_network(
            &arch,
            InitScheme::Constant {
                weight: 0.5,
                bias: 0.0,
            },
            123,
        )
        .unwrap()
    }

    #[test]
    fn parameter_count_of_small_net() {
        assert_eq!(Architecture::mlp(&[2]).unwrap().param_count(), 9);
        assert_eq!(
            Architecture::mlp(&[64, 64]).unwrap().param_count(),
            64 * 2 + 64 + 64 * 64 + 64 + 64 + 1
        );
    }

    #[test]
    fn malformed_architectures_are_rejected() {
        for sizes in [vec![], vec![2], vec![3, 1], vec![2, 2], vec![2, 0, 1]] {
            assert!(
                Architecture::new(sizes.clone(), Activation::Sigmoid, true).is_err(),
                "{sizes:?}"
            );
        }
    }

    #[test]
    fn constant_init_matches_hand_example() {
        let net = constant_net();
        assert_eq!(net.weights(0), &[0.5; 4]);
        assert_eq!(net.weights(1), &[0.5; 2]);
        assert_eq!(net.biases(0), &[0.0; 2]);
        assert_eq!(net.biases(1), &[0.0]);
    }

    #[test]
    fn loop_zero_prediction() {
        let y = constant_net().forward(0.1, 0.1);
        assert!((y - 0.525).abs() < 1e-3);
        assert!((y - eval_sigmoid(0.1)).abs() < 1e-15);
    }

    #[test]
    fn constant_net_is_symmetric_in_inputs() {
        let net = constant_net();
        assert_eq!(net.forward(0.3, -0.7), net.forward(-0.7, 0.3));
    }

    #[test]
    fn zero_weights_give_input_independent_output() {
        let arch = Architecture::new(vec![2, 3, 1], Activation::Sigmoid, false).unwrap();
        let mut theta = vec![0.0; arch.param_count()];
        *theta.last_mut().unwrap() = 0.7;
        let net = NetworkParams::from_flat(arch, theta).unwrap();
        let expected = eval_sigmoid(0.7);
        assert_eq!(net.forward(0.1, 0.2), expected);
        assert_eq!(net.forward(-1.4, 1.9), expected);
    }

    #[test]
    fn glorot_respects_bounds_and_seed() {
        let arch = Architecture::mlp(&[64, 64]).unwrap();
        let a = init_network(&arch, InitScheme::GlorotUniform, 7).unwrap();
        let b = init_network(&arch, InitScheme::GlorotUniform, 7).unwrap();
        assert_eq!(a, b);
        for (l, (fan_in, fan_out)) in arch.layers().enumerate() {
            let bound = glorot_bound(fan_in, fan_out);
            assert!(a.weights(l).iter().all(|w| w.abs() <= bound));
            assert!(a.biases(l).iter().all(|&b| b == 0.0));
        }
        let c = init_network(&arch, InitScheme::GlorotUniform, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn glorot_bound_of_small_net() {
        assert!((glorot_bound(2, 2) - 1.224_744_871_391_589).abs() < 1e-12);
        let arch = Architecture::mlp(&[2]).unwrap();
        let net = init_network(&arch, InitScheme::GlorotUniform, 1).unwrap();
        assert!(net.weights(0).iter().all(|w| w.abs() <= glorot_bound(2, 2)));
    }

    #[test]
    fn glorot_mean_is_near_zero() {
        // 10^4 draws from one [2, 100, 100, 1] init (10 000 weights in the
        // middle layer).
        let arch = Architecture::mlp(&[100, 100]).unwrap();
        let net = init_network(&arch, InitScheme::GlorotUniform, 3).unwrap();
        let w = net.weights(1);
        assert_eq!(w.len(), 10_000);
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sigma = glorot_bound(100, 100) / 3f64.sqrt();
        assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn input_derivatives_of_constant_net() {
        let pass = forward_with_input_derivs(&constant_net(), 0.1, 0.1).unwrap();
        let s = eval_sigmoid(0.1);
        let expected = 2.0 * 0.5 * s * (1.0 - s) * 0.5;
        assert!((pass.d_dx() - expected).abs() < 1e-15);
        assert!((pass.d_dx() - 0.124_688).abs() < 5e-7);
        assert_eq!(pass.d_dx(), pass.d_dt());
        assert!((pass.d_dt() + 3.0 * pass.d_dx() - 0.498_752).abs() < 5e-7);
    }

    #[test]
    fn zero_first_layer_gives_zero_input_derivatives() {
        let arch = Architecture::mlp(&[3]).unwrap();
        let mut theta: Vec<f64> = (0..arch.param_count()).map(|i| 0.1 * i as f64).collect();
        theta[..6].iter_mut().for_each(|w| *w = 0.0);
        let net = NetworkParams::from_flat(arch, theta).unwrap();
        let pass = forward_with_input_derivs(&net, 0.4, 1.2).unwrap();
        assert_eq!(pass.d_dx(), 0.0);
        assert_eq!(pass.d_dt(), 0.0);
    }

    #[test]
    fn graph_primal_matches_plain_forward_bitwise() {
        let arch = Architecture::mlp(&[5, 4]).unwrap();
        let net = init_network(&arch, InitScheme::GlorotUniform, 11).unwrap();
        for &(x, t) in &[(0.1, 0.2), (-1.3, 1.7), (1.5, 0.0)] {
            let pass = forward_with_input_derivs(&net, x, t).unwrap();
            assert_eq!(pass.value(), net.forward(x, t));
        }
    }

    #[test]
    fn from_flat_checks_length() {
        let arch = Architecture::mlp(&[2]).unwrap();
        assert!(matches!(
            NetworkParams::from_flat(arch, vec![0.0; 8]),
            Err(PinnError::LengthMismatch {
                expected: 9,
                got: 8
            })
        ));
    }
}
