//! Finite sums of max-affine blocks.
//!
//! Each component is `f_i(x) = sum_b max_{p in b} (a_p . x + c_p)`. This
//! covers `|x|`, sums of `|x_j - c_ij|`, and a single max of affine
//! pieces, and it exposes the piece structure needed by the exact
//! stationarity oracles.

use crate::error::{Error, Result};
use crate::param::{dot, norm};

#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl AffinePiece {
    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x) + self.offset
    }
}

/// `max_p (a_p . x + c_p)` over a nonempty set of pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxBlock {
    pub pieces: Vec<AffinePiece>,
}

impl MaxBlock {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.pieces.iter().map(|p| p.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of pieces attaining the maximum exactly.
    pub fn active(&self, x: &[f64]) -> Vec<usize> {
        let vals: Vec<f64> = self.pieces.iter().map(|p| p.value(x)).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..vals.len()).filter(|&i| vals[i] == top).collect()
    }

    /// Canonical selection from the block's Clarke subdifferential: the
    /// mean slope of the exactly active pieces. For `|t|` at `t = 0` this
    /// is 0.
    pub fn selection(&self, x: &[f64], out: &mut [f64]) {
        let active = self.active(x);
        let w = 1.0 / active.len() as f64;
        for &p in &active {
            for (o, a) in out.iter_mut().zip(&self.pieces[p].slope) {
                *o += w * a;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    dim: usize,
    components: Vec<Vec<MaxBlock>>,
}

impl PiecewiseLinear {
    pub fn new(dim: usize, components: Vec<Vec<MaxBlock>>) -> Result<Self> {
        if dim == 0 || components.is_empty() {
            return Err(Error::InvalidParameter("need dim >= 1 and at least one component".into()));
        }
        for block in components.iter().flatten() {
            if block.pieces.is_empty() {
                return Err(Error::InvalidParameter("max block with no pieces".into()));
            }
            for p in &block.pieces {
                if p.slope.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, actual: p.slope.len() });
                }
                if !p.offset.is_finite() || p.slope.iter().any(|a| !a.is_finite()) {
                    return Err(Error::NonFinite("affine piece".into()));
                }
            }
        }
        Ok(Self { dim, components })
    }

    /// `f(x) = |x|` in one dimension.
    pub fn abs1d() -> Self {
        Self::l1(&[vec![0.0]]).expect("static instance")
    }

    /// Components `f_i(x) = sum_j |x_j - c_ij|`, one per center.
    pub fn l1(centers: &[Vec<f64>]) -> Result<Self> {
        let dim = centers.first().map_or(0, Vec::len);
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidParameter("all centers must share one dimension".into()));
        }
        let components = centers
            .iter()
            .map(|c| {
                (0..dim)
                    .map(|j| {
                        let mut up = vec![0.0; dim];
                        up[j] = 1.0;
                        let down: Vec<f64> = up.iter().map(|a| -a).collect();
                        MaxBlock {
                            pieces: vec![
                                AffinePiece { slope: up, offset: -c[j] },
                                AffinePiece { slope: down, offset: c[j] },
                            ],
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(dim, components)
    }

    /// A single max of affine pieces (one component).
    pub fn max_affine(pieces: Vec<AffinePiece>) -> Result<Self> {
        let dim = pieces.first().map_or(0, |p| p.slope.len());
        Self::new(dim, vec![vec![MaxBlock { pieces }]])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Vec<MaxBlock>] {
        &self.components
    }

    pub fn eval_component(&self, i: usize, x: &[f64]) -> f64 {
        self.components[i].iter().map(|b| b.value(x)).sum()
    }

    pub fn subgrad_component(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for block in &self.components[i] {
            block.selection(x, &mut out);
        }
        out
    }

    /// Blocks of the averaged objective, each tagged with its weight `1/N`.
    pub fn weighted_blocks(&self) -> impl Iterator<Item = (f64, &MaxBlock)> {
        let w = 1.0 / self.components.len() as f64;
        self.components.iter().flatten().map(move |b| (w, b))
    }

    /// Upper bound on `||D_{f_i}(x)||` over all `i` and `x`. Exact when the
    /// blocks of a component act on disjoint coordinates.
    pub fn lipschitz_bound(&self) -> f64 {
        self.components
            .iter()
            .map(|blocks| {
                let maxes: Vec<f64> =
                    blocks.iter().map(|b| b.pieces.iter().map(|p| norm(&p.slope)).fold(0.0, f64::max)).collect();
                if disjoint_support(blocks) {
                    maxes.iter().map(|m| m * m).sum::<f64>().sqrt()
                } else {
                    maxes.iter().sum()
                }
            })
            .fold(0.0, f64::max)
    }
}

fn disjoint_support(blocks: &[MaxBlock]) -> bool {
    let dim = blocks.first().map_or(0, |b| b.pieces[0].slope.len());
    let mut used = vec![false; dim];
    for b in blocks {
        let support: Vec<usize> = (0..dim).filter(|&j| b.pieces.iter().any(|p| p.slope[j] != 0.0)).collect();
        for j in support {
            if used[j] {
                return false;
            }
            used[j] = true;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_selection() {
        let p = PiecewiseLinear::abs1d();
        assert_eq!(p.subgrad_component(0, &[2.0]), vec![1.0]);
        assert_eq!(p.subgrad_component(0, &[0.0]), vec![0.0]);
        assert_eq!(p.subgrad_component(0, &[-3.0]), vec![-1.0]);
        assert_eq!(p.eval_component(0, &[-3.0]), 3.0);
        assert_eq!(p.lipschitz_bound(), 1.0);
    }

    #[test]
    fn l1_components() {
        let p = PiecewiseLinear::l1(&[vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(p.subgrad_component(0, &[0.0]), vec![1.0]);
        assert_eq!(p.subgrad_component(1, &[0.0]), vec![-1.0]);
        assert_eq!(p.subgrad_component(1, &[1.0]), vec![0.0]);
        assert_eq!(p.eval_component(0, &[0.5]), 1.5);
        let p3 = PiecewiseLinear::l1(&[vec![0.0, 1.0, 2.0]]).unwrap();
        assert!((p3.lipschitz_bound() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn max_affine_kink() {
        let p = PiecewiseLinear::max_affine(vec![
            AffinePiece { slope: vec![1.0, 0.0], offset: 0.0 },
            AffinePiece { slope: vec![-1.0, 0.0], offset: 0.0 },
            AffinePiece { slope: vec![0.0, 1.0], offset: 0.0 },
        ])
        .unwrap();
        assert_eq!(p.subgrad_component(0, &[0.0, -1.0]), vec![0.0, 0.0]);
        assert_eq!(p.subgrad_component(0, &[2.0, 1.0]), vec![1.0, 0.0]);
        let origin = p.subgrad_component(0, &[0.0, 0.0]);
        assert!((origin[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.eval_component(0, &[0.5, 3.0]), 3.0);
    }
}
