//! The PINN objective
//! `w_f·L_f + w_b·L_b + w_i·L_i + w_obs·L_obs`, each term a mean of squared
//! residuals over its point set, recorded as scalar graphs over the
//! parameters (and the transport coefficient when it is trainable).
//!
//! The point sets are split into fixed-size chunks, one graph per chunk.
//! Chunk boundaries depend only on the point sets, and chunk results are
//! combined in chunk order, so totals and gradients are bitwise reproducible
//! whatever the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, ScalarGraph, Tape};
use crate::error::{PinnError, Result};
use crate::network::{record_with_input_derivs, NetworkParams, Surrogate};
use crate::sampling::{CollocationSet, Observation, Point, SpaceTimeDomain};
use crate::transport::{boundary_value, residual, ConditionSpec, ResidualSpec};

const INTERIOR_CHUNK: usize = 8;
const VALUE_CHUNK: usize = 32;

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    #[serde(default = "one")]
    pub w_f: f64,
    #[serde(default = "one")]
    pub w_b: f64,
    #[serde(default = "one")]
    pub w_i: f64,
    #[serde(default = "one")]
    pub w_obs: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_f: 1.0,
            w_b: 1.0,
            w_i: 1.0,
            w_obs: 1.0,
        }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.w_f, self.w_b, self.w_i, self.w_obs]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(PinnError::Weights(format!(
                "weights must be finite and non-negative, got {w:?}"
            )));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(PinnError::Weights(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Term values of one loss evaluation. Each term is the unweighted mean of
/// squares over its point set (zero for an empty set).
#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub residual_term: f64,
    pub boundary_term: f64,
    pub initial_term: f64,
    pub observation_term: f64,
}

impl LossBreakdown {
    pub fn terms(&self) -> [f64; 4] {
        [
            self.residual_term,
            self.boundary_term,
            self.initial_term,
            self.observation_term,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.terms().iter().all(|t| t.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Term {
    Residual = 0,
    Boundary = 1,
    Initial = 2,
    Observation = 3,
}

const TERM_NAMES: [&str; 4] = ["residual", "boundary", "initial", "observation"];

#[derive(Debug)]
struct LossChunk {
    graph: ScalarGraph,
    /// Values of the roots recorded after θ (interior coordinates).
    extra_roots: Vec<f64>,
    partials: [NodeId; 4],
    objective: NodeId,
}

struct ChunkResult {
    partials: [f64; 4],
    objective: f64,
    grad: Vec<f64>,
}

/// Parameter gradient with the trainable coefficient split out.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGradient {
    pub params: Vec<f64>,
    pub coefficient: Option<f64>,
}

/// A compiled loss. Evaluate it with the flat parameter vector, followed by
/// the coefficient when it is trainable.
#[derive(Debug)]
pub struct PinnLoss {
    chunks: Vec<LossChunk>,
    model_params: usize,
    trainable: bool,
    counts: [usize; 4],
    weights: LossWeights,
}

fn sort_points(points: &[Point]) -> Vec<Point> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.t.total_cmp(&b.t)));
    sorted
}

fn sort_observations(obs: &[Observation]) -> Vec<Observation> {
    let mut sorted = obs.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.t.total_cmp(&b.t)));
    sorted
}

/// A value-matching point: `(ŷ(x, t) − target)²`.
#[derive(Clone, Copy, Debug)]
struct Target {
    term: Term,
    x: f64,
    t: f64,
    value: f64,
}

impl PinnLoss {
    pub fn assemble<S: Surrogate + ?Sized>(
        model: &S,
        spec: &ResidualSpec,
        conds: &ConditionSpec,
        domain: &SpaceTimeDomain,
        colloc: &CollocationSet,
        weights: &LossWeights,
    ) -> Result<Self> {
        weights.validate()?;
        spec.validate()?;
        let counts = [
            colloc.interior.len(),
            colloc.boundary.len(),
            colloc.initial.len(),
            colloc.observations.len(),
        ];
        for (k, (&w, &n)) in weights.as_array().iter().zip(&counts).enumerate() {
            if w > 0.0 && n == 0 {
                return Err(PinnError::EmptyTerm(TERM_NAMES[k]));
            }
        }

        let interior = sort_points(&colloc.interior);
        let mut targets = Vec::new();
        for p in sort_points(&colloc.boundary) {
            let value = boundary_value(conds, domain, p.x, p.t)?;
            targets.push(Target {
                term: Term::Boundary,
                x: p.x,
                t: p.t,
                value,
            });
        }
        for p in sort_points(&colloc.initial) {
            targets.push(Target {
                term: Term::Initial,
                x: p.x,
                t: p.t,
                value: (conds.initial)(p.x),
            });
        }
        for o in sort_observations(&colloc.observations) {
            targets.push(Target {
                term: Term::Observation,
                x: o.x,
                t: o.t,
                value: o.u,
            });
        }

        // Weight applied to each term's partial sum of squares.
        let scales: [f64; 4] = std::array::from_fn(|k| {
            let w = weights.as_array()[k];
            if w > 0.0 && counts[k] > 0 {
                w / counts[k] as f64
            } else {
                0.0
            }
        });

        let mut chunks = Vec::new();
        for block in interior.chunks(INTERIOR_CHUNK) {
            chunks.push(Self::record_chunk(model, spec, block, &[], &scales)?);
        }
        for block in targets.chunks(VALUE_CHUNK) {
            chunks.push(Self::record_chunk(model, spec, &[], block, &scales)?);
        }

        Ok(Self {
            chunks,
            model_params: model.param_count(),
            trainable: spec.is_trainable(),
            counts,
            weights: *weights,
        })
    }

    fn record_chunk<S: Surrogate + ?Sized>(
        model: &S,
        spec: &ResidualSpec,
        interior: &[Point],
        targets: &[Target],
        scales: &[f64; 4],
    ) -> Result<LossChunk> {
        let mut tape = Tape::new();
        let theta: Vec<NodeId> = (0..model.param_count()).map(|_| tape.root()).collect();
        let coefficient = match spec {
            ResidualSpec::Trainable(_) => tape.root(),
            ResidualSpec::Fixed(c) => tape.constant(*c),
        };
        let mut squares: [Vec<NodeId>; 4] = Default::default();
        let mut extra_roots = Vec::with_capacity(2 * interior.len());

        for p in interior {
            let x = tape.root();
            let t = tape.root();
            extra_roots.extend([p.x, p.t]);
            let derivs = record_with_input_derivs(model, &mut tape, &theta, x, t)?;
            let r = residual(&mut tape, &derivs, coefficient)?;
            squares[Term::Residual as usize].push(tape.square(r));
        }
        for target in targets {
            let x = tape.constant(target.x);
            let t = tape.constant(target.t);
            let y = model.record(&mut tape, &theta, x, t);
            let goal = tape.constant(target.value);
            let diff = tape.sub(y, goal);
            squares[target.term as usize].push(tape.square(diff));
        }

        let partials: [NodeId; 4] = std::array::from_fn(|k| tape.sum(&squares[k]));
        let weighted: Vec<(NodeId, NodeId)> = (0..4)
            .filter(|&k| scales[k] > 0.0 && !squares[k].is_empty())
            .map(|k| (tape.constant(scales[k]), partials[k]))
            .collect();
        let objective = tape.dot(&weighted);
        Ok(LossChunk {
            graph: tape.finish(),
            extra_roots,
            partials,
            objective,
        })
    }

    /// Length of the vector `evaluate` expects.
    pub fn theta_len(&self) -> usize {
        self.model_params + usize::from(self.trainable)
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    /// Point counts per term: residual, boundary, initial, observation.
    pub fn counts(&self) -> [usize; 4] {
        self.counts
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_len() {
            return Err(PinnError::LengthMismatch {
                expected: self.theta_len(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn run_chunk(&self, chunk: &LossChunk, theta: &[f64], with_grad: bool) -> Result<ChunkResult> {
        let mut roots = Vec::with_capacity(theta.len() + chunk.extra_roots.len());
        roots.extend_from_slice(theta);
        roots.extend_from_slice(&chunk.extra_roots);
        let eval = chunk.graph.evaluate(&roots)?;
        let partials = chunk.partials.map(|n| eval.value(n));
        let objective = eval.value(chunk.objective);
        let grad = if with_grad {
            let mut all = vec![0.0; roots.len()];
            let mut scratch = Vec::new();
            chunk
                .graph
                .gradient_into(&eval, chunk.objective, &mut all, &mut scratch)?;
            all.truncate(theta.len());
            all
        } else {
            Vec::new()
        };
        Ok(ChunkResult {
            partials,
            objective,
            grad,
        })
    }

    fn combine(&self, results: Vec<ChunkResult>, with_grad: bool) -> (LossBreakdown, Vec<f64>) {
        let mut partials = [0.0; 4];
        let mut total = 0.0;
        let mut grad = if with_grad {
            vec![0.0; self.theta_len()]
        } else {
            Vec::new()
        };
        for r in results {
            for (acc, p) in partials.iter_mut().zip(r.partials) {
                *acc += p;
            }
            total += r.objective;
            for (g, c) in grad.iter_mut().zip(&r.grad) {
                *g += c;
            }
        }
        let terms: [f64; 4] = std::array::from_fn(|k| {
            if self.counts[k] > 0 {
                partials[k] / self.counts[k] as f64
            } else {
                0.0
            }
        });
        (
            LossBreakdown {
                total,
                residual_term: terms[0],
                boundary_term: terms[1],
                initial_term: terms[2],
                observation_term: terms[3],
            },
            grad,
        )
    }

    fn run(&self, theta: &[f64], with_grad: bool) -> Result<(LossBreakdown, Vec<f64>)> {
        self.check_theta(theta)?;
        let results = self
            .chunks
            .par_iter()
            .map(|c| self.run_chunk(c, theta, with_grad))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.combine(results, with_grad))
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<LossBreakdown> {
        Ok(self.run(theta, false)?.0)
    }

    /// Loss terms and the gradient of the total with respect to `theta`.
    pub fn value_and_gradient(&self, theta: &[f64]) -> Result<(LossBreakdown, Vec<f64>)> {
        self.run(theta, true)
    }
}

/// Assembles the loss for `params` and evaluates it at `params` (and the
/// coefficient's starting value when trainable).
pub fn pinn_loss(
    params: &NetworkParams,
    spec: &ResidualSpec,
    conds: &ConditionSpec,
    domain: &SpaceTimeDomain,
    colloc: &CollocationSet,
    weights: &LossWeights,
) -> Result<(PinnLoss, LossBreakdown)> {
    let loss = PinnLoss::assemble(&params.arch, spec, conds, domain, colloc, weights)?;
    let theta = full_theta(params, spec);
    let breakdown = loss.evaluate(&theta)?;
    Ok((loss, breakdown))
}

/// Flat parameters followed by the coefficient when it is trainable.
pub fn full_theta(params: &NetworkParams, spec: &ResidualSpec) -> Vec<f64> {
    let mut theta = params.as_flat().to_vec();
    if let ResidualSpec::Trainable(c) = spec {
        theta.push(*c);
    }
    theta
}

pub fn loss_gradient(loss: &PinnLoss, theta: &[f64]) -> Result<LossGradient> {
    let (_, mut grad) = loss.value_and_gradient(theta)?;
    let coefficient = if loss.is_trainable() {
        grad.pop()
    } else {
        None
    };
    Ok(LossGradient {
        params: grad,
        coefficient,
    })
}
