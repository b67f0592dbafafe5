use super::graph::{eval_sigmoid, Op};
use super::{AutodiffError, Evaluation, NodeId, ScalarGraph, Tape};

/// A value paired with its directional derivative along one root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualValue {
    pub primal: f64,
    pub tangent: f64,
}

impl Tape {
    /// Records `d(output)/d(direction)` for each output as new nodes of this
    /// tape and returns them.
    ///
    /// Only nodes recorded after `direction` can depend on it, so the sweep
    /// starts there; structurally zero tangents produce no nodes until an
    /// output needs one materialized.
    pub fn tangent(
        &mut self,
        outputs: &[NodeId],
        direction: NodeId,
    ) -> Result<Vec<NodeId>, AutodiffError> {
        let dir = self.idx(direction);
        if !matches!(self.ops[dir as usize], Op::Root(_)) {
            return Err(AutodiffError::NotARoot(dir as usize));
        }
        for &o in outputs {
            if !self.owns(o) {
                return Err(AutodiffError::ForeignNode(o));
            }
        }
        let end = outputs
            .iter()
            .map(|o| o.index() + 1)
            .max()
            .unwrap_or(0)
            .max(dir as usize);
        let map = self.tangent_sweep(dir, end as u32);
        let mut zero = None;
        Ok(outputs
            .iter()
            .map(|o| {
                let i = o.index() as u32;
                let t = if i < dir {
                    None
                } else {
                    map[(i - dir) as usize]
                };
                match t {
                    Some(t) => self.id(t),
                    None => *zero.get_or_insert_with(|| self.constant(0.0)),
                }
            })
            .collect())
    }

    /// Tangent nodes of every node in `dir..end`; `None` marks a structural
    /// zero.
    fn tangent_sweep(&mut self, dir: u32, end: u32) -> Vec<Option<u32>> {
        let mut map: Vec<Option<u32>> = Vec::with_capacity((end - dir) as usize);
        for i in dir..end {
            let op = self.ops[i as usize];
            let tan = |k: u32, map: &Vec<Option<u32>>| -> Option<u32> {
                if k < dir {
                    None
                } else {
                    map[(k - dir) as usize]
                }
            };
            let t = match op {
                Op::Root(_) => (i == dir).then(|| self.one_index()),
                Op::Const(_) => None,
                Op::Add(a, b) => {
                    let (ta, tb) = (tan(a, &map), tan(b, &map));
                    self.add_opt(ta, tb)
                }
                Op::Sub(a, b) => match (tan(a, &map), tan(b, &map)) {
                    (Some(ta), Some(tb)) => Some(self.push(Op::Sub(ta, tb))),
                    (Some(ta), None) => Some(ta),
                    (None, Some(tb)) => Some(self.push(Op::Neg(tb))),
                    (None, None) => None,
                },
                Op::Mul(a, b) => {
                    let left = tan(a, &map).map(|ta| self.mul_simplified(ta, b));
                    let right = tan(b, &map).map(|tb| self.mul_simplified(a, tb));
                    self.add_opt(left, right)
                }
                Op::Neg(a) => tan(a, &map).map(|ta| self.push(Op::Neg(ta))),
                Op::Square(a) => tan(a, &map).map(|ta| {
                    let half = self.mul_simplified(a, ta);
                    self.push(Op::Add(half, half))
                }),
                Op::Exp(a) => tan(a, &map).map(|ta| self.mul_simplified(i, ta)),
                Op::Sigmoid(a) => tan(a, &map).map(|ta| {
                    let d = self.local_derivative(i);
                    self.mul_simplified(d, ta)
                }),
                Op::Tanh(a) => tan(a, &map).map(|ta| {
                    let d = self.local_derivative(i);
                    self.mul_simplified(d, ta)
                }),
                Op::Sum { start, len } => {
                    let s = start as usize;
                    let terms: Vec<u32> = (s..s + len as usize)
                        .filter_map(|k| tan(self.operands[k], &map))
                        .collect();
                    match terms.as_slice() {
                        [] => None,
                        [single] => Some(*single),
                        _ => {
                            let start = self.operands.len() as u32;
                            self.operands.extend_from_slice(&terms);
                            Some(self.push(Op::Sum {
                                start,
                                len: terms.len() as u32,
                            }))
                        }
                    }
                }
                Op::Dot { start, len } => {
                    let s = start as usize;
                    let mut pairs = Vec::new();
                    for k in 0..len as usize {
                        let a = self.operands[s + 2 * k];
                        let b = self.operands[s + 2 * k + 1];
                        if let Some(ta) = tan(a, &map) {
                            pairs.push((ta, b));
                        }
                        if let Some(tb) = tan(b, &map) {
                            pairs.push((a, tb));
                        }
                    }
                    match pairs.as_slice() {
                        [] => None,
                        [(p, q)] => Some(self.mul_simplified(*p, *q)),
                        _ => Some(self.dot_raw(&pairs)),
                    }
                }
            };
            map.push(t);
        }
        map
    }

    fn add_opt(&mut self, a: Option<u32>, b: Option<u32>) -> Option<u32> {
        match (a, b) {
            (Some(a), Some(b)) => Some(self.push(Op::Add(a, b))),
            (Some(a), None) => Some(a),
            (None, b) => b,
        }
    }

    fn mul_simplified(&mut self, a: u32, b: u32) -> u32 {
        if self.const_value(a) == Some(1.0) {
            b
        } else if self.const_value(b) == Some(1.0) {
            a
        } else {
            self.push(Op::Mul(a, b))
        }
    }

    /// `σ(1-σ)` for a sigmoid node or `1-tanh²` for a tanh node, recorded
    /// once per node.
    fn local_derivative(&mut self, node: u32) -> u32 {
        if let Some(&d) = self.local_derivs.get(&node) {
            return d;
        }
        let one = self.one_index();
        let d = match self.ops[node as usize] {
            Op::Sigmoid(_) => {
                let complement = self.push(Op::Sub(one, node));
                self.push(Op::Mul(node, complement))
            }
            Op::Tanh(_) => {
                let sq = self.push(Op::Square(node));
                self.push(Op::Sub(one, sq))
            }
            other => unreachable!("no cached local derivative for {other:?}"),
        };
        self.local_derivs.insert(node, d);
        d
    }
}

/// Numeric forward-mode pass: every node's value and its derivative along
/// root `direction` (a root slot).
pub fn forward_tangent(
    graph: &ScalarGraph,
    eval: &Evaluation,
    direction: usize,
) -> Result<Vec<DualValue>, AutodiffError> {
    graph.check_eval(eval)?;
    let dir_node = graph
        .root_node(direction)
        .ok_or(AutodiffError::NotARoot(direction))?
        .index();
    let v = eval.values();
    let mut t = vec![0.0f64; graph.len()];
    for (i, op) in graph.ops.iter().enumerate() {
        t[i] = match *op {
            Op::Root(_) => {
                if i == dir_node {
                    1.0
                } else {
                    0.0
                }
            }
            Op::Const(_) => 0.0,
            Op::Add(a, b) => t[a as usize] + t[b as usize],
            Op::Sub(a, b) => t[a as usize] - t[b as usize],
            Op::Mul(a, b) => t[a as usize] * v[b as usize] + v[a as usize] * t[b as usize],
            Op::Neg(a) => -t[a as usize],
            Op::Square(a) => 2.0 * v[a as usize] * t[a as usize],
            Op::Exp(a) => v[i] * t[a as usize],
            Op::Sigmoid(a) => {
                let s = eval_sigmoid(v[a as usize]);
                s * (1.0 - s) * t[a as usize]
            }
            Op::Tanh(a) => (1.0 - v[i] * v[i]) * t[a as usize],
            Op::Sum { start, len } => {
                let s = start as usize;
                graph.operands[s..s + len as usize]
                    .iter()
                    .map(|&k| t[k as usize])
                    .sum()
            }
            Op::Dot { start, len } => {
                let s = start as usize;
                graph.operands[s..s + 2 * len as usize]
                    .chunks_exact(2)
                    .map(|p| {
                        let (a, b) = (p[0] as usize, p[1] as usize);
                        t[a] * v[b] + v[a] * t[b]
                    })
                    .sum()
            }
        };
    }
    Ok(v.iter()
        .zip(t)
        .map(|(&primal, tangent)| DualValue { primal, tangent })
        .collect())
}

/// A graph extended with tangent nodes for every original node.
#[derive(Debug, Clone)]
pub struct TangentGraph {
    pub graph: ScalarGraph,
    tangents: Vec<NodeId>,
}

impl TangentGraph {
    /// Node computing the tangent of `node` (a node of the original graph).
    pub fn tangent_of(&self, node: NodeId) -> NodeId {
        self.tangents[node.index()]
    }
}

/// Extends `graph` with nodes computing every node's derivative along root
/// slot `direction`. The result keeps the original roots, so
/// [`reverse_gradient`](super::reverse_gradient) applied to a tangent node
/// yields second-order mixed partials.
pub fn record_tangent_as_graph(
    graph: &ScalarGraph,
    direction: usize,
) -> Result<TangentGraph, AutodiffError> {
    let dir_node = graph
        .root_node(direction)
        .ok_or(AutodiffError::NotARoot(direction))?;
    let mut tape = Tape::extend(graph);
    let outputs: Vec<NodeId> = (0..graph.len() as u32).map(|i| tape.id(i)).collect();
    let tangents = tape.tangent(&outputs, dir_node)?;
    Ok(TangentGraph {
        graph: tape.finish(),
        tangents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::reverse_gradient;

    #[test]
    fn tangent_of_sum_along_x_is_one() {
        let mut tape = Tape::new();
        let x = tape.root();
        let t = tape.root();
        let y = tape.add(x, t);
        let g = tape.finish();
        let eval = g.evaluate(&[0.3, 0.4]).unwrap();
        let duals = forward_tangent(&g, &eval, 0).unwrap();
        assert_eq!(duals[y.index()].tangent, 1.0);
    }

    #[test]
    fn hidden_unit_tangent() {
        let mut tape = Tape::new();
        let x = tape.root();
        let t = tape.root();
        let half = tape.constant(0.5);
        let z = tape.dot(&[(half, x), (half, t)]);
        let y = tape.sigmoid(z);
        let g = tape.finish();
        let eval = g.evaluate(&[0.1, 0.1]).unwrap();
        let duals = forward_tangent(&g, &eval, 0).unwrap();
        let s = eval_sigmoid(0.1);
        assert!((duals[y.index()].tangent - 0.5 * s * (1.0 - s)).abs() < 1e-16);
        assert!((duals[y.index()].tangent - 0.124_688).abs() < 5e-7);
    }

    #[test]
    fn independent_direction_has_zero_tangent() {
        let mut tape = Tape::new();
        let x = tape.root();
        let _t = tape.root();
        let y = tape.scale(3.0, x);
        let g = tape.finish();
        let eval = g.evaluate(&[2.0, 5.0]).unwrap();
        let duals = forward_tangent(&g, &eval, 1).unwrap();
        assert_eq!(duals[y.index()].tangent, 0.0);
        assert_eq!(duals[x.index()].tangent, 0.0);
    }

    #[test]
    fn bad_direction_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.root();
        let _ = tape.square(x);
        let g = tape.finish();
        let eval = g.evaluate(&[1.0]).unwrap();
        assert_eq!(
            forward_tangent(&g, &eval, 3),
            Err(AutodiffError::NotARoot(3))
        );
        assert!(record_tangent_as_graph(&g, 1).is_err());
    }

    #[test]
    fn recording_tangent_from_non_root_fails() {
        let mut tape = Tape::new();
        let x = tape.root();
        let y = tape.square(x);
        assert!(matches!(
            tape.tangent(&[y], y),
            Err(AutodiffError::NotARoot(_))
        ));
    }

    #[test]
    fn second_derivative_of_square() {
        let mut tape = Tape::new();
        let x = tape.root();
        let y = tape.mul(x, x);
        let g = tape.finish();
        let tg = record_tangent_as_graph(&g, 0).unwrap();
        let dy = tg.tangent_of(y);
        let eval = tg.graph.evaluate(&[3.0]).unwrap();
        assert_eq!(eval.value(dy), 6.0);
        assert_eq!(reverse_gradient(&tg.graph, &eval, dy).unwrap(), vec![2.0]);
    }

    #[test]
    fn tangent_of_constant_is_zero() {
        let mut tape = Tape::new();
        let x = tape.root();
        let c = tape.constant(4.0);
        let g = tape.finish();
        let tg = record_tangent_as_graph(&g, 0).unwrap();
        let dc = tg.tangent_of(c);
        let eval = tg.graph.evaluate(&[1.5]).unwrap();
        assert_eq!(eval.value(dc), 0.0);
        assert_eq!(eval.value(tg.tangent_of(x)), 1.0);
        assert_eq!(reverse_gradient(&tg.graph, &eval, dc).unwrap(), vec![0.0]);
    }

    #[test]
    fn repeated_tangents_share_sigmoid_derivative() {
        let mut tape = Tape::new();
        let x = tape.root();
        let t = tape.root();
        let z = tape.add(x, t);
        let s = tape.sigmoid(z);
        let before = tape.len();
        tape.tangent(&[s], x).unwrap();
        let after_x = tape.len();
        tape.tangent(&[s], t).unwrap();
        assert!(tape.len() - after_x < after_x - before);
    }
}
