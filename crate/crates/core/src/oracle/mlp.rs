//! Two-layer ReLU network with squared loss on a seeded synthetic dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{CompGraph, GraphBuilder, NodeId};
use crate::error::Result;

pub const INPUT_DIM: usize = 2;
const SEED_SALT: u64 = 0x5eed_da7a_0000_0001;

/// Parameters are flattened as `[W1 (hidden x 2, row major), b1, w2, b2]`.
#[derive(Debug, Clone)]
pub struct ReluMlp {
    hidden: usize,
    inputs: Vec<[f64; INPUT_DIM]>,
    targets: Vec<f64>,
    graphs: Vec<CompGraph>,
    lipschitz_estimate: f64,
}

impl ReluMlp {
    /// Builds the network and a dataset of `samples` points drawn from `seed`.
    pub fn new(hidden: usize, samples: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SEED_SALT);
        let mut inputs = Vec::with_capacity(samples);
        let mut targets = Vec::with_capacity(samples);
        for _ in 0..samples {
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            targets.push(teacher(a));
            inputs.push(a);
        }
        Self::with_data(hidden, inputs, targets, seed)
    }

    pub fn with_data(hidden: usize, inputs: Vec<[f64; INPUT_DIM]>, targets: Vec<f64>, seed: u64) -> Result<Self> {
        let graphs =
            inputs.iter().zip(&targets).map(|(a, &t)| component_graph(hidden, a, t)).collect::<Result<Vec<_>>>()?;
        let mut mlp = Self { hidden, inputs, targets, graphs, lipschitz_estimate: f64::NAN };
        mlp.lipschitz_estimate = mlp.estimate_lipschitz(seed);
        Ok(mlp)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn dim(&self) -> usize {
        param_count(self.hidden)
    }

    pub fn samples(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[[f64; INPUT_DIM]] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn component_graph(&self, i: usize) -> &CompGraph {
        &self.graphs[i]
    }

    /// Graph of the averaged loss over all samples.
    pub fn objective_graph(&self) -> Result<CompGraph> {
        let mut b = GraphBuilder::new();
        let params = param_nodes(&mut b, self.hidden);
        let losses: Vec<NodeId> = self
            .inputs
            .iter()
            .zip(&self.targets)
            .map(|(a, &t)| sample_loss(&mut b, &params, self.hidden, a, t))
            .collect();
        let out = b.mean(losses);
        b.build(out)
    }

    pub fn eval_component(&self, i: usize, x: &[f64]) -> f64 {
        self.graphs[i].eval(x).expect("dimension checked by caller")
    }

    pub fn subgrad_component(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.graphs[i].value_and_grad(x).expect("dimension checked by caller").1
    }

    /// Hidden-unit pre-activations for sample `i`.
    pub fn pre_activations(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let a = self.inputs[i];
        (0..self.hidden)
            .map(|u| {
                let mut s = 0.0;
                for (j, aj) in a.iter().enumerate() {
                    s += x[w1_index(u, j)] * aj;
                }
                s + x[b1_index(self.hidden, u)]
            })
            .collect()
    }

    /// Sampled bound on per-component gradient norms over `||x||_inf <= 10`,
    /// inflated by a factor 2. An estimate, not a certificate.
    pub fn lipschitz_estimate(&self) -> f64 {
        self.lipschitz_estimate
    }

    fn estimate_lipschitz(&self, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SEED_SALT ^ 0xffff);
        let dim = self.dim();
        let mut best: f64 = 0.0;
        if self.graphs.is_empty() {
            return 0.0;
        }
        for _ in 0..2048 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let i = rng.gen_range(0..self.graphs.len());
            let g = self.subgrad_component(i, &x);
            best = best.max(crate::param::norm(&g));
        }
        2.0 * best
    }
}

fn teacher(a: [f64; INPUT_DIM]) -> f64 {
    (a[0] + a[1]).max(0.0) - 0.5 * (a[0] - a[1]).max(0.0)
}

pub fn param_count(hidden: usize) -> usize {
    hidden * INPUT_DIM + hidden + hidden + 1
}

pub fn w1_index(unit: usize, input: usize) -> usize {
    unit * INPUT_DIM + input
}

pub fn b1_index(hidden: usize, unit: usize) -> usize {
    hidden * INPUT_DIM + unit
}

pub fn w2_index(hidden: usize, unit: usize) -> usize {
    hidden * INPUT_DIM + hidden + unit
}

pub fn b2_index(hidden: usize) -> usize {
    hidden * INPUT_DIM + 2 * hidden
}

fn param_nodes(b: &mut GraphBuilder, hidden: usize) -> Vec<NodeId> {
    (0..param_count(hidden)).map(|i| b.input(i)).collect()
}

fn sample_loss(b: &mut GraphBuilder, p: &[NodeId], hidden: usize, a: &[f64; INPUT_DIM], target: f64) -> NodeId {
    let consts: Vec<NodeId> = a.iter().map(|&aj| b.constant(aj)).collect();
    let acts: Vec<NodeId> = (0..hidden)
        .map(|u| {
            let w = (0..INPUT_DIM).map(|j| p[w1_index(u, j)]).collect();
            let pre = b.affine(w, consts.clone(), Some(p[b1_index(hidden, u)]));
            b.relu(pre)
        })
        .collect();
    let w2 = (0..hidden).map(|u| p[w2_index(hidden, u)]).collect();
    let out = b.affine(w2, acts, Some(p[b2_index(hidden)]));
    let neg_t = b.constant(-target);
    let diff = b.add(out, neg_t);
    let sq = b.square(diff);
    let half = b.constant(0.5);
    b.mul(half, sq)
}

fn component_graph(hidden: usize, a: &[f64; INPUT_DIM], target: f64) -> Result<CompGraph> {
    let mut b = GraphBuilder::new();
    let p = param_nodes(&mut b, hidden);
    let out = sample_loss(&mut b, &p, hidden, a, target);
    b.build(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_reproducible() {
        let a = ReluMlp::new(4, 32, 7).unwrap();
        let b = ReluMlp::new(4, 32, 7).unwrap();
        let c = ReluMlp::new(4, 32, 8).unwrap();
        assert_eq!(a.inputs(), b.inputs());
        assert_eq!(a.targets(), b.targets());
        assert_ne!(a.inputs(), c.inputs());
        assert_eq!(a.dim(), 17);
        assert!(a.lipschitz_estimate().is_finite() && a.lipschitz_estimate() > 0.0);
    }

    #[test]
    fn component_loss_matches_explicit_forward() {
        let mlp = ReluMlp::new(3, 4, 1).unwrap();
        let x: Vec<f64> = (0..mlp.dim()).map(|i| 0.1 * i as f64 - 0.5).collect();
        for i in 0..mlp.samples() {
            let pre = mlp.pre_activations(i, &x);
            let mut out = x[b2_index(3)];
            for (u, p) in pre.iter().enumerate() {
                out += x[w2_index(3, u)] * p.max(0.0);
            }
            let expected = 0.5 * (out - mlp.targets()[i]).powi(2);
            assert!((mlp.eval_component(i, &x) - expected).abs() < 1e-14);
        }
    }
}
