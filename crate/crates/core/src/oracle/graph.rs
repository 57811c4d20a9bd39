//! Scalar computation graphs with a reverse-mode sweep.
//!
//! At a ReLU node the local derivative is 1 for a strictly positive input
//! and 0 otherwise, so the sweep returns one element of the conservative
//! field obtained by composing the blocks' Clarke subdifferentials.

use crate::error::{Error, Result};
use crate::param::ParamVector;

/// Local ReLU derivative at exactly zero.
#[cfg(not(feature = "relu-grad-one-at-zero"))]
pub const RELU_GRAD_AT_ZERO: f64 = 0.0;
#[cfg(feature = "relu-grad-one-at-zero")]
pub const RELU_GRAD_AT_ZERO: f64 = 1.0;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// Coordinate `index` of the differentiation variable.
    Input(usize),
    Const(f64),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Relu(NodeId),
    /// `sum_j weights[j] * inputs[j] (+ bias)`; summed left to right, bias last.
    Affine {
        weights: Vec<NodeId>,
        inputs: Vec<NodeId>,
        bias: Option<NodeId>,
    },
    Square(NodeId),
    Mean(Vec<NodeId>),
}

impl Op {
    fn operands(&self) -> Vec<NodeId> {
        match self {
            Op::Input(_) | Op::Const(_) => vec![],
            Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Relu(a) | Op::Square(a) => vec![*a],
            Op::Affine { weights, inputs, bias } => weights.iter().chain(inputs).chain(bias.iter()).copied().collect(),
            Op::Mean(xs) => xs.clone(),
        }
    }
}

/// A validated graph: nodes are stored in topological order.
#[derive(Debug, Clone)]
pub struct CompGraph {
    nodes: Vec<Op>,
    arity: usize,
    output: NodeId,
}

#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Op>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op) -> NodeId {
        self.nodes.push(op);
        self.nodes.len() - 1
    }

    pub fn input(&mut self, index: usize) -> NodeId {
        self.push(Op::Input(index))
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(Op::Const(value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul(a, b))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Relu(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Square(a))
    }

    pub fn affine(&mut self, weights: Vec<NodeId>, inputs: Vec<NodeId>, bias: Option<NodeId>) -> NodeId {
        self.push(Op::Affine { weights, inputs, bias })
    }

    pub fn mean(&mut self, xs: Vec<NodeId>) -> NodeId {
        self.push(Op::Mean(xs))
    }

    pub fn build(self, output: NodeId) -> Result<CompGraph> {
        CompGraph::from_nodes(self.nodes, output)
    }
}

impl CompGraph {
    pub fn from_nodes(nodes: Vec<Op>, output: NodeId) -> Result<Self> {
        if output >= nodes.len() {
            return Err(Error::MalformedGraph(format!("output node {output} does not exist")));
        }
        let mut seen_inputs = Vec::new();
        for (id, op) in nodes.iter().enumerate() {
            for operand in op.operands() {
                if operand >= id {
                    return Err(Error::MalformedGraph(format!(
                        "node {id} reads node {operand}, which does not precede it"
                    )));
                }
            }
            match op {
                Op::Input(i) => seen_inputs.push(*i),
                Op::Affine { weights, inputs, .. } if weights.len() != inputs.len() => {
                    return Err(Error::MalformedGraph(format!(
                        "affine node {id} has {} weights and {} inputs",
                        weights.len(),
                        inputs.len()
                    )));
                }
                Op::Mean(xs) if xs.is_empty() => {
                    return Err(Error::MalformedGraph(format!("mean node {id} has no operands")));
                }
                _ => {}
            }
        }
        seen_inputs.sort_unstable();
        for (expected, &got) in seen_inputs.iter().enumerate() {
            if got != expected {
                return Err(Error::MalformedGraph("input indices must be exactly 0..arity, each used once".into()));
            }
        }
        Ok(Self { arity: seen_inputs.len(), nodes, output })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Op] {
        &self.nodes
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.arity {
            return Err(Error::DimensionMismatch { expected: self.arity, actual: x.len() });
        }
        let mut val = Vec::with_capacity(self.nodes.len());
        for op in &self.nodes {
            let v = match op {
                Op::Input(i) => x[*i],
                Op::Const(c) => *c,
                Op::Add(a, b) => val[*a] + val[*b],
                Op::Mul(a, b) => val[*a] * val[*b],
                Op::Relu(a) => f64::max(val[*a], 0.0),
                Op::Affine { weights, inputs, bias } => {
                    let mut s = 0.0;
                    for (w, u) in weights.iter().zip(inputs) {
                        s += val[*w] * val[*u];
                    }
                    if let Some(b) = bias {
                        s += val[*b];
                    }
                    s
                }
                Op::Square(a) => val[*a] * val[*a],
                Op::Mean(xs) => xs.iter().map(|&i| val[i]).sum::<f64>() / xs.len() as f64,
            };
            val.push(v);
        }
        Ok(val)
    }

    /// Value of the output node.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?[self.output])
    }

    /// Output value and its reverse-mode derivative with respect to the inputs.
    pub fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let val = self.forward(x)?;
        let mut adj = vec![0.0; self.nodes.len()];
        adj[self.output] = 1.0;
        let mut grad = vec![0.0; self.arity];
        for id in (0..=self.output).rev() {
            let a = adj[id];
            if a == 0.0 {
                continue;
            }
            match &self.nodes[id] {
                Op::Input(i) => grad[*i] += a,
                Op::Const(_) => {}
                Op::Add(l, r) => {
                    adj[*l] += a;
                    adj[*r] += a;
                }
                Op::Mul(l, r) => {
                    adj[*l] += a * val[*r];
                    adj[*r] += a * val[*l];
                }
                Op::Relu(u) => {
                    let local = if val[*u] > 0.0 {
                        1.0
                    } else if val[*u] == 0.0 {
                        RELU_GRAD_AT_ZERO
                    } else {
                        0.0
                    };
                    adj[*u] += a * local;
                }
                Op::Affine { weights, inputs, bias } => {
                    for (w, u) in weights.iter().zip(inputs) {
                        adj[*w] += a * val[*u];
                        adj[*u] += a * val[*w];
                    }
                    if let Some(b) = bias {
                        adj[*b] += a;
                    }
                }
                Op::Square(u) => adj[*u] += a * 2.0 * val[*u],
                Op::Mean(xs) => {
                    let share = a / xs.len() as f64;
                    for &i in xs {
                        adj[i] += share;
                    }
                }
            }
        }
        Ok((val[self.output], grad))
    }
}

/// Reverse-mode derivative of the graph output at `x`.
pub fn ad_backward(graph: &CompGraph, x: &[f64]) -> Result<ParamVector> {
    let (_, g) = graph.value_and_grad(x)?;
    Ok(ParamVector::from_raw(g))
}
