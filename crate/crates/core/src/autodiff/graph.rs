use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, Ordering};

use super::AutodiffError;

static NEXT_TAG: AtomicU32 = AtomicU32::new(1);

fn fresh_tag() -> u32 {
    NEXT_TAG.fetch_add(1, Ordering::Relaxed)
}

/// The logistic function `1 / (1 + e^-z)`, evaluated without overflow for
/// large negative `z`.
pub fn eval_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Handle to a node of a particular tape/graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    tag: u32,
    index: u32,
}

impl NodeId {
    /// Position of the node in the graph's topological order.
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Root,
    Const,
    Add,
    Sub,
    Mul,
    Neg,
    Square,
    Exp,
    Sigmoid,
    Tanh,
    Sum,
    Dot,
}

/// Node payload. Operands are indices of earlier nodes; n-ary operations
/// keep their operand lists in the graph's shared `operands` buffer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Op {
    Root(u32),
    Const(f64),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Neg(u32),
    Square(u32),
    Exp(u32),
    Sigmoid(u32),
    Tanh(u32),
    /// Sum of `len` operands.
    Sum {
        start: u32,
        len: u32,
    },
    /// Sum of `len` pairwise products (operands stored interleaved).
    Dot {
        start: u32,
        len: u32,
    },
}

impl Op {
    pub(crate) fn kind(&self) -> OpKind {
        match self {
            Op::Root(_) => OpKind::Root,
            Op::Const(_) => OpKind::Const,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Neg(_) => OpKind::Neg,
            Op::Square(_) => OpKind::Square,
            Op::Exp(_) => OpKind::Exp,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Sum { .. } => OpKind::Sum,
            Op::Dot { .. } => OpKind::Dot,
        }
    }
}

/// Recorder for a [`ScalarGraph`]. Single-writer; nodes are appended in
/// topological order by construction.
#[derive(Debug)]
pub struct Tape {
    pub(crate) tag: u32,
    pub(crate) ops: Vec<Op>,
    pub(crate) operands: Vec<u32>,
    pub(crate) roots: Vec<u32>,
    one: Option<u32>,
    /// Local-derivative nodes already recorded (sigmoid', tanh'), keyed by
    /// the node they differentiate.
    pub(crate) local_derivs: HashMap<u32, u32>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            tag: fresh_tag(),
            ops: Vec::new(),
            operands: Vec::new(),
            roots: Vec::new(),
            one: None,
            local_derivs: HashMap::new(),
        }
    }

    /// Reopens a finished graph for further recording. Existing node ids
    /// stay valid in the extended graph.
    pub fn extend(graph: &ScalarGraph) -> Self {
        let one = graph
            .ops
            .iter()
            .position(|op| matches!(op, Op::Const(v) if *v == 1.0))
            .map(|i| i as u32);
        Self {
            tag: graph.tag,
            ops: graph.ops.clone(),
            operands: graph.operands.clone(),
            roots: graph.roots.clone(),
            one,
            local_derivs: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }

    /// Whether `node` was recorded on this tape.
    pub fn owns(&self, node: NodeId) -> bool {
        node.tag == self.tag && node.index() < self.ops.len()
    }

    pub(crate) fn id(&self, index: u32) -> NodeId {
        NodeId {
            tag: self.tag,
            index,
        }
    }

    pub(crate) fn idx(&self, node: NodeId) -> u32 {
        assert!(
            self.owns(node),
            "node {node:?} was not recorded on this tape"
        );
        node.index
    }

    pub(crate) fn push(&mut self, op: Op) -> u32 {
        let index = self.ops.len() as u32;
        self.ops.push(op);
        index
    }

    /// Records a new independent variable. Its value is supplied at
    /// evaluation time, in the order roots were created.
    pub fn root(&mut self) -> NodeId {
        let slot = self.roots.len() as u32;
        let index = self.push(Op::Root(slot));
        self.roots.push(index);
        self.id(index)
    }

    /// Root index (position in the evaluation's root vector) of `node`, if
    /// it is an independent variable.
    pub fn root_index(&self, node: NodeId) -> Option<usize> {
        match self.ops[self.idx(node) as usize] {
            Op::Root(slot) => Some(slot as usize),
            _ => None,
        }
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        if value == 1.0 {
            let one = self.one_index();
            return self.id(one);
        }
        let index = self.push(Op::Const(value));
        self.id(index)
    }

    pub(crate) fn one_index(&mut self) -> u32 {
        match self.one {
            Some(i) => i,
            None => {
                let i = self.push(Op::Const(1.0));
                self.one = Some(i);
                i
            }
        }
    }

    pub(crate) fn const_value(&self, index: u32) -> Option<f64> {
        match self.ops[index as usize] {
            Op::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let op = Op::Add(self.idx(a), self.idx(b));
        let index = self.push(op);
        self.id(index)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let op = Op::Sub(self.idx(a), self.idx(b));
        let index = self.push(op);
        self.id(index)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let op = Op::Mul(self.idx(a), self.idx(b));
        let index = self.push(op);
        self.id(index)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let op = Op::Neg(self.idx(a));
        let index = self.push(op);
        self.id(index)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let op = Op::Square(self.idx(a));
        let index = self.push(op);
        self.id(index)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let op = Op::Exp(self.idx(a));
        let index = self.push(op);
        self.id(index)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let op = Op::Sigmoid(self.idx(a));
        let index = self.push(op);
        self.id(index)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let op = Op::Tanh(self.idx(a));
        let index = self.push(op);
        self.id(index)
    }

    /// `c * a` for a constant `c`.
    pub fn scale(&mut self, c: f64, a: NodeId) -> NodeId {
        let c = self.constant(c);
        self.mul(c, a)
    }

    /// Sum of the given nodes, accumulated left to right. An empty sum is the
    /// constant 0.
    pub fn sum(&mut self, terms: &[NodeId]) -> NodeId {
        match terms {
            [] => self.constant(0.0),
            [single] => *single,
            _ => {
                let start = self.operands.len() as u32;
                for &t in terms {
                    let i = self.idx(t);
                    self.operands.push(i);
                }
                let index = self.push(Op::Sum {
                    start,
                    len: terms.len() as u32,
                });
                self.id(index)
            }
        }
    }

    /// `Σ a_i·b_i`, accumulated left to right. An empty dot is the constant 0.
    pub fn dot(&mut self, pairs: &[(NodeId, NodeId)]) -> NodeId {
        if pairs.is_empty() {
            return self.constant(0.0);
        }
        let raw: Vec<(u32, u32)> = pairs
            .iter()
            .map(|&(a, b)| (self.idx(a), self.idx(b)))
            .collect();
        let index = self.dot_raw(&raw);
        self.id(index)
    }

    pub(crate) fn dot_raw(&mut self, pairs: &[(u32, u32)]) -> u32 {
        let start = self.operands.len() as u32;
        for &(a, b) in pairs {
            self.operands.push(a);
            self.operands.push(b);
        }
        self.push(Op::Dot {
            start,
            len: pairs.len() as u32,
        })
    }

    pub fn finish(self) -> ScalarGraph {
        ScalarGraph {
            tag: self.tag,
            ops: self.ops,
            operands: self.operands,
            roots: self.roots,
        }
    }
}

/// An immutable recorded computation. Evaluation produces a separate value
/// buffer, so a graph may be evaluated concurrently from several threads.
#[derive(Debug, Clone)]
pub struct ScalarGraph {
    pub(crate) tag: u32,
    pub(crate) ops: Vec<Op>,
    pub(crate) operands: Vec<u32>,
    pub(crate) roots: Vec<u32>,
}

/// Node values of one evaluation of a [`ScalarGraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    tag: u32,
    values: Vec<f64>,
}

impl Evaluation {
    /// Value of `node`.
    ///
    /// Panics if `node` does not belong to the evaluated graph.
    pub fn value(&self, node: NodeId) -> f64 {
        assert_eq!(node.tag, self.tag, "node from a different graph");
        self.values[node.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl ScalarGraph {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }

    /// Node of root `slot`.
    pub fn root_node(&self, slot: usize) -> Option<NodeId> {
        self.roots.get(slot).map(|&index| NodeId {
            tag: self.tag,
            index,
        })
    }

    pub fn owns(&self, node: NodeId) -> bool {
        node.tag == self.tag && node.index() < self.ops.len()
    }

    pub fn kind(&self, node: NodeId) -> OpKind {
        self.ops[node.index()].kind()
    }

    pub(crate) fn check(&self, node: NodeId) -> Result<usize, AutodiffError> {
        if self.owns(node) {
            Ok(node.index())
        } else {
            Err(AutodiffError::ForeignNode(node))
        }
    }

    pub(crate) fn check_eval(&self, eval: &Evaluation) -> Result<(), AutodiffError> {
        if eval.tag != self.tag || eval.values.len() != self.ops.len() {
            return Err(AutodiffError::NotEvaluated);
        }
        Ok(())
    }

    pub fn evaluate(&self, roots: &[f64]) -> Result<Evaluation, AutodiffError> {
        let mut eval = Evaluation {
            tag: self.tag,
            values: Vec::with_capacity(self.ops.len()),
        };
        self.evaluate_into(roots, &mut eval)?;
        Ok(eval)
    }

    /// Evaluates into an existing buffer, reusing its allocation.
    pub fn evaluate_into(&self, roots: &[f64], eval: &mut Evaluation) -> Result<(), AutodiffError> {
        if roots.len() != self.roots.len() {
            return Err(AutodiffError::RootCount {
                expected: self.roots.len(),
                got: roots.len(),
            });
        }
        eval.tag = self.tag;
        let values = &mut eval.values;
        values.clear();
        values.reserve(self.ops.len());
        let operands = &self.operands;
        for (i, op) in self.ops.iter().enumerate() {
            let v = match *op {
                Op::Root(slot) => roots[slot as usize],
                Op::Const(c) => c,
                Op::Add(a, b) => values[a as usize] + values[b as usize],
                Op::Sub(a, b) => values[a as usize] - values[b as usize],
                Op::Mul(a, b) => values[a as usize] * values[b as usize],
                Op::Neg(a) => -values[a as usize],
                Op::Square(a) => {
                    let x = values[a as usize];
                    x * x
                }
                Op::Exp(a) => values[a as usize].exp(),
                Op::Sigmoid(a) => eval_sigmoid(values[a as usize]),
                Op::Tanh(a) => values[a as usize].tanh(),
                Op::Sum { start, len } => {
                    let s = start as usize;
                    operands[s..s + len as usize]
                        .iter()
                        .fold(0.0, |acc, &k| acc + values[k as usize])
                }
                Op::Dot { start, len } => {
                    let s = start as usize;
                    operands[s..s + 2 * len as usize]
                        .chunks_exact(2)
                        .fold(0.0, |acc, p| {
                            acc + values[p[0] as usize] * values[p[1] as usize]
                        })
                }
            };
            if !v.is_finite() {
                values.clear();
                return Err(AutodiffError::NonFinite {
                    node: i,
                    kind: op.kind(),
                    value: v,
                });
            }
            values.push(v);
        }
        Ok(())
    }

    /// Accumulates adjoints of every node with respect to `output` into
    /// `adjoint` (resized and zeroed here).
    pub(crate) fn backward_into(&self, values: &[f64], output: usize, adjoint: &mut Vec<f64>) {
        adjoint.clear();
        adjoint.resize(self.ops.len(), 0.0);
        adjoint[output] = 1.0;
        let operands = &self.operands;
        for i in (0..=output).rev() {
            let g = adjoint[i];
            if g == 0.0 {
                continue;
            }
            match self.ops[i] {
                Op::Root(_) | Op::Const(_) => {}
                Op::Add(a, b) => {
                    adjoint[a as usize] += g;
                    adjoint[b as usize] += g;
                }
                Op::Sub(a, b) => {
                    adjoint[a as usize] += g;
                    adjoint[b as usize] -= g;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (values[a as usize], values[b as usize]);
                    adjoint[a as usize] += g * vb;
                    adjoint[b as usize] += g * va;
                }
                Op::Neg(a) => adjoint[a as usize] -= g,
                Op::Square(a) => adjoint[a as usize] += g * 2.0 * values[a as usize],
                Op::Exp(a) => adjoint[a as usize] += g * values[i],
                Op::Sigmoid(a) => {
                    let s = values[i];
                    adjoint[a as usize] += g * (s * (1.0 - s));
                }
                Op::Tanh(a) => {
                    let th = values[i];
                    adjoint[a as usize] += g * (1.0 - th * th);
                }
                Op::Sum { start, len } => {
                    let s = start as usize;
                    for &k in &operands[s..s + len as usize] {
                        adjoint[k as usize] += g;
                    }
                }
                Op::Dot { start, len } => {
                    let s = start as usize;
                    for p in operands[s..s + 2 * len as usize].chunks_exact(2) {
                        let (a, b) = (p[0] as usize, p[1] as usize);
                        let (va, vb) = (values[a], values[b]);
                        adjoint[a] += g * vb;
                        adjoint[b] += g * va;
                    }
                }
            }
        }
    }

    /// Gradient of `output` with respect to every root, written into `grad`
    /// (indexed by root slot). `scratch` holds the adjoint buffer.
    pub fn gradient_into(
        &self,
        eval: &Evaluation,
        output: NodeId,
        grad: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> Result<(), AutodiffError> {
        self.check_eval(eval)?;
        let out = self.check(output)?;
        if grad.len() != self.roots.len() {
            return Err(AutodiffError::RootCount {
                expected: self.roots.len(),
                got: grad.len(),
            });
        }
        self.backward_into(&eval.values, out, scratch);
        for (g, &node) in grad.iter_mut().zip(&self.roots) {
            *g = scratch[node as usize];
        }
        Ok(())
    }
}

/// `∂output/∂root` for every root of the graph, indexed by root slot. Roots
/// the output does not depend on get exactly zero.
pub fn reverse_gradient(
    graph: &ScalarGraph,
    eval: &Evaluation,
    output: NodeId,
) -> Result<Vec<f64>, AutodiffError> {
    let mut grad = vec![0.0; graph.root_count()];
    let mut scratch = Vec::new();
    graph.gradient_into(eval, output, &mut grad, &mut scratch)?;
    Ok(grad)
}
