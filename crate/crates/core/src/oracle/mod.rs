//! Finite-sum problems and their subgradient oracles.
//!
//! Every oracle returns one element of the conservative field of a
//! component at the query point. Kinks are resolved by a fixed selection
//! rule (mean of active pieces for piecewise-linear components, the ReLU
//! convention of [`graph::RELU_GRAD_AT_ZERO`] for networks).

pub mod fd;
pub mod graph;
pub mod mlp;
pub mod piecewise;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::param::{dot, ParamVector};

pub use fd::finite_difference_grad;
pub use graph::{ad_backward, CompGraph, GraphBuilder, Op};
pub use mlp::ReluMlp;
pub use piecewise::{AffinePiece, MaxBlock, PiecewiseLinear};

/// Problem id and parameters as they appear in a run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// One of `abs1d`, `l1quad`, `maxpiece2d`, `quadratic`, `relu_mlp`.
    pub id: String,
    /// Dimension for `l1quad` and `quadratic`.
    pub dim: usize,
    /// Flattened `l1quad` centers, `dim` numbers per component.
    pub centers: Vec<f64>,
    pub hidden: usize,
    pub samples: usize,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self { id: "abs1d".into(), dim: 1, centers: vec![-1.0, 1.0], hidden: 4, samples: 32 }
    }
}

#[derive(Debug, Clone)]
pub enum Problem {
    /// `f(x) = |x|`.
    Abs1d(PiecewiseLinear),
    /// `f_i(x) = ||x - c_i||_1`.
    L1Quad(PiecewiseLinear),
    /// `f(x) = max(x_1, -x_1, x_2)`.
    MaxPiece2d(PiecewiseLinear),
    /// `f(x) = ||x||^2 / 2`, smooth, one component.
    Quadratic {
        dim: usize,
    },
    ReluMlp(ReluMlp),
}

/// Sup of `||D_{f_i}(x)||` over components and points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBound {
    pub value: f64,
    /// False when `value` comes from sampling rather than from the structure.
    pub certified: bool,
}

/// Constants `(L, nu)` with `||D_f(x)|| <= L (1 + ||x||^nu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub l: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSample {
    pub g: ParamVector,
    /// Zero-based component index.
    pub index: usize,
    pub x_at_draw: ParamVector,
}

impl Problem {
    pub fn from_spec(spec: &ProblemSpec, seed: u64) -> Result<Self> {
        match spec.id.as_str() {
            "abs1d" => Ok(Self::Abs1d(PiecewiseLinear::abs1d())),
            "l1quad" => Self::l1quad(spec.dim, &spec.centers),
            "maxpiece2d" => Ok(Self::maxpiece2d()),
            "quadratic" => {
                if spec.dim == 0 {
                    return Err(Error::InvalidParameter("quadratic needs dim >= 1".into()));
                }
                Ok(Self::Quadratic { dim: spec.dim })
            }
            "relu_mlp" => {
                if spec.hidden == 0 || spec.samples == 0 {
                    return Err(Error::InvalidParameter("relu_mlp needs hidden >= 1 and samples >= 1".into()));
                }
                Ok(Self::ReluMlp(ReluMlp::new(spec.hidden, spec.samples, seed)?))
            }
            other => Err(Error::InvalidParameter(format!("unknown problem `{other}`"))),
        }
    }

    pub fn abs1d() -> Self {
        Self::Abs1d(PiecewiseLinear::abs1d())
    }

    /// `centers` holds `dim` numbers per component; `dim <= 3`.
    pub fn l1quad(dim: usize, centers: &[f64]) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::InvalidParameter(format!("l1quad needs 1 <= dim <= 3, got {dim}")));
        }
        if centers.is_empty() || !centers.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "l1quad centers must be a nonempty multiple of dim = {dim}, got {} numbers",
                centers.len()
            )));
        }
        let rows: Vec<Vec<f64>> = centers.chunks(dim).map(<[f64]>::to_vec).collect();
        Ok(Self::L1Quad(PiecewiseLinear::l1(&rows)?))
    }

    pub fn maxpiece2d() -> Self {
        let piece = |a: f64, b: f64| AffinePiece { slope: vec![a, b], offset: 0.0 };
        let f = PiecewiseLinear::max_affine(vec![piece(1.0, 0.0), piece(-1.0, 0.0), piece(0.0, 1.0)])
            .expect("static instance");
        Self::MaxPiece2d(f)
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Abs1d(_) => "abs1d",
            Self::L1Quad(_) => "l1quad",
            Self::MaxPiece2d(_) => "maxpiece2d",
            Self::Quadratic { .. } => "quadratic",
            Self::ReluMlp(_) => "relu_mlp",
        }
    }

    /// The max-affine structure, for problems that have one.
    pub fn piecewise(&self) -> Option<&PiecewiseLinear> {
        match self {
            Self::Abs1d(p) | Self::L1Quad(p) | Self::MaxPiece2d(p) => Some(p),
            _ => None,
        }
    }

    pub fn n_components(&self) -> usize {
        match self {
            Self::Abs1d(p) | Self::L1Quad(p) | Self::MaxPiece2d(p) => p.components().len(),
            Self::Quadratic { .. } => 1,
            Self::ReluMlp(net) => net.samples(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Abs1d(p) | Self::L1Quad(p) | Self::MaxPiece2d(p) => p.dim(),
            Self::Quadratic { dim } => *dim,
            Self::ReluMlp(net) => net.dim(),
        }
    }

    pub fn eval_component(&self, i: usize, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        self.check_index(i)?;
        Ok(match self {
            Self::Abs1d(p) | Self::L1Quad(p) | Self::MaxPiece2d(p) => p.eval_component(i, x),
            Self::Quadratic { .. } => 0.5 * dot(x, x),
            Self::ReluMlp(net) => net.eval_component(i, x),
        })
    }

    pub fn subgrad_component(&self, i: usize, x: &[f64]) -> Result<ParamVector> {
        check_dim(self.dim(), x.len())?;
        self.check_index(i)?;
        let g = match self {
            Self::Abs1d(p) | Self::L1Quad(p) | Self::MaxPiece2d(p) => p.subgrad_component(i, x),
            Self::Quadratic { .. } => x.to_vec(),
            Self::ReluMlp(net) => net.subgrad_component(i, x),
        };
        Ok(ParamVector::from_raw(g))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        let n = self.n_components();
        if i < n {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("component {i} out of range 0..{n}")))
        }
    }

    /// `f(x) = (1/N) sum_i f_i(x)`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let n = self.n_components();
        let mut s = 0.0;
        for i in 0..n {
            s += self.eval_component(i, x)?;
        }
        Ok(s / n as f64)
    }

    /// `f(x) + sigma/2 ||x||^2`.
    pub fn regularized_objective(&self, x: &[f64], sigma: f64) -> Result<f64> {
        Ok(self.objective(x)? + 0.5 * sigma * dot(x, x))
    }

    pub fn lipschitz_bound(&self) -> LipschitzBound {
        match self {
            Self::Abs1d(p) | Self::L1Quad(p) | Self::MaxPiece2d(p) => {
                LipschitzBound { value: p.lipschitz_bound(), certified: true }
            }
            Self::Quadratic { .. } => LipschitzBound { value: f64::INFINITY, certified: true },
            Self::ReluMlp(net) => LipschitzBound { value: net.lipschitz_estimate(), certified: false },
        }
    }

    /// Bound on the sampling noise `||g - d||`: zero for a single component,
    /// otherwise `2 M_f`.
    pub fn noise_bound(&self) -> f64 {
        if self.n_components() == 1 {
            0.0
        } else {
            2.0 * self.lipschitz_bound().value
        }
    }

    /// Growth constants, declared for the globally Lipschitz problems only.
    pub fn growth(&self) -> Option<Growth> {
        match self {
            Self::Abs1d(p) | Self::L1Quad(p) | Self::MaxPiece2d(p) => Some(Growth { l: p.lipschitz_bound(), nu: 0.0 }),
            _ => None,
        }
    }
}

/// Draws a component uniformly and returns its subgradient at `x`.
pub fn sample_subgradient<R: Rng + ?Sized>(
    problem: &Problem,
    x: &ParamVector,
    rng: &mut R,
) -> Result<SubgradientSample> {
    check_dim(problem.dim(), x.dim())?;
    let index = rng.gen_range(0..problem.n_components());
    let g = problem.subgrad_component(index, x)?;
    Ok(SubgradientSample { g, index, x_at_draw: x.clone() })
}

/// `(1/N) sum_i subgrad_component(i, x)`, an element of `D_f(x)`.
pub fn full_subgradient(problem: &Problem, x: &[f64]) -> Result<ParamVector> {
    check_dim(problem.dim(), x.len())?;
    let n = problem.n_components();
    let mut acc = vec![0.0; x.len()];
    for i in 0..n {
        let g = problem.subgrad_component(i, x)?;
        for (a, gi) in acc.iter_mut().zip(g.iter()) {
            *a += gi;
        }
    }
    let inv = n as f64;
    Ok(ParamVector::from_raw(acc.into_iter().map(|a| a / inv).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn abs1d_samples() {
        let p = Problem::abs1d();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = ParamVector::new(vec![2.0]).unwrap();
        assert_eq!(sample_subgradient(&p, &x, &mut rng).unwrap().g[0], 1.0);
        let z = ParamVector::new(vec![0.0]).unwrap();
        assert_eq!(sample_subgradient(&p, &z, &mut rng).unwrap().g[0], 0.0);
        assert_eq!(full_subgradient(&p, &[-3.0]).unwrap()[0], -1.0);
    }

    #[test]
    fn l1quad_symmetric_mean() {
        let p = Problem::l1quad(1, &[-1.0, 1.0]).unwrap();
        assert_eq!(p.subgrad_component(0, &[0.0]).unwrap()[0], 1.0);
        assert_eq!(full_subgradient(&p, &[0.0]).unwrap()[0], 0.0);
        assert_eq!(p.noise_bound(), 2.0);
        assert!(Problem::l1quad(4, &[0.0; 4]).is_err());
        assert!(Problem::l1quad(2, &[0.0; 3]).is_err());
    }

    #[test]
    fn dimension_checked() {
        let p = Problem::maxpiece2d();
        let x = ParamVector::new(vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_subgradient(&p, &x, &mut rng),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn from_spec_ids() {
        for id in ["abs1d", "l1quad", "maxpiece2d", "quadratic", "relu_mlp"] {
            let spec = ProblemSpec { id: id.into(), ..ProblemSpec::default() };
            assert_eq!(Problem::from_spec(&spec, 3).unwrap().id(), id);
        }
        let bad = ProblemSpec { id: "rosenbrock".into(), ..ProblemSpec::default() };
        assert!(Problem::from_spec(&bad, 3).is_err());
    }
}
