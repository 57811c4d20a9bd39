//! Distance from the origin to the (expanded) conservative field of the
//! regularized objective `f + sigma/2 ||x||^2`.

use rand::Rng;

use super::minnorm::min_norm_point;
use crate::error::{check_dim, Error, Result};
use crate::oracle::{full_subgradient, MaxBlock, PiecewiseLinear, Problem};
use crate::param::norm;

/// A gap value, flagged when it comes from sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub value: f64,
    pub estimate: bool,
}

/// `dist(0, D_g^delta(x))` for the problems with an exact oracle.
///
/// At `delta = 0` the value is exact. For `delta > 0` the pieces that
/// can be active somewhere in the ball are collected and the result
/// `max(0, dist(0, Z + sigma x) - (1 + sigma) delta)` is a lower bound.
/// The network problem has no exact oracle, see [`stationarity_gap_estimate`].
pub fn stationarity_gap(problem: &Problem, x: &[f64], delta: f64, sigma: f64) -> Result<f64> {
    check_dim(problem.dim(), x.len())?;
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    match problem {
        Problem::Quadratic { .. } => {
            let r = (norm(x) - delta).max(0.0);
            Ok(((1.0 + sigma) * r - delta).max(0.0))
        }
        Problem::ReluMlp(_) => {
            Err(Error::UnsupportedProblem("no exact stationarity oracle for relu_mlp; use the sampled estimate".into()))
        }
        _ => {
            let pl = problem.piecewise().expect("piecewise problem");
            let d = piecewise_min_norm(pl, x, delta, sigma)?;
            Ok((d - (1.0 + sigma) * delta).max(0.0))
        }
    }
}

/// Exact gap where available, otherwise a sampled upper envelope: the
/// minimum of `||grad f(z) + sigma z|| - delta` over `z = x` and `samples`
/// uniform draws from the `delta` ball.
pub fn stationarity_gap_estimate<R: Rng + ?Sized>(
    problem: &Problem,
    x: &[f64],
    delta: f64,
    sigma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<Gap> {
    if !matches!(problem, Problem::ReluMlp(_)) {
        return Ok(Gap { value: stationarity_gap(problem, x, delta, sigma)?, estimate: false });
    }
    check_dim(problem.dim(), x.len())?;
    let value_at = |z: &[f64]| -> Result<f64> {
        let g = full_subgradient(problem, z)?;
        let w: Vec<f64> = g.iter().zip(z).map(|(gi, zi)| gi + sigma * zi).collect();
        Ok(norm(&w))
    };
    let mut best = value_at(x)?;
    if delta > 0.0 {
        let n = x.len();
        for _ in 0..samples {
            let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let len = norm(&dir);
            if len == 0.0 {
                continue;
            }
            let radius = delta * rng.gen::<f64>().powf(1.0 / n as f64);
            let z: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + radius * di / len).collect();
            best = best.min(value_at(&z)?);
        }
    }
    Ok(Gap { value: (best - delta).max(0.0), estimate: true })
}

/// Pieces of `block` that can attain the block maximum somewhere in the
/// closed `delta` ball around `x` (a superset; exact at `delta = 0`).
pub fn candidate_pieces(block: &MaxBlock, x: &[f64], delta: f64) -> Vec<usize> {
    if delta == 0.0 {
        return block.active(x);
    }
    let vals: Vec<f64> = block.pieces.iter().map(|p| p.value(x)).collect();
    (0..block.pieces.len())
        .filter(|&p| {
            block.pieces.iter().enumerate().all(|(q, piece)| {
                let diff: Vec<f64> = piece.slope.iter().zip(&block.pieces[p].slope).map(|(a, b)| a - b).collect();
                vals[q] - vals[p] <= delta * norm(&diff)
            })
        })
        .collect()
}

/// `dist(0, sum_b w_b conv(candidate slopes of b) + sigma x)`.
fn piecewise_min_norm(pl: &PiecewiseLinear, x: &[f64], delta: f64, sigma: f64) -> Result<f64> {
    let n = pl.dim();
    let sets: Vec<(f64, Vec<&[f64]>)> = pl
        .weighted_blocks()
        .map(|(w, b)| (w, candidate_pieces(b, x, delta).into_iter().map(|p| b.pieces[p].slope.as_slice()).collect()))
        .collect();
    if let Some(axes) = axis_of_each(&sets, n) {
        // Minkowski sum of axis-aligned segments is a box.
        let mut lo: Vec<f64> = x.iter().map(|xi| sigma * xi).collect();
        let mut hi = lo.clone();
        for ((w, slopes), axis) in sets.iter().zip(axes) {
            if let Some(j) = axis {
                let (mn, mx) =
                    slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s[j]), b.max(s[j])));
                lo[j] += w * mn;
                hi[j] += w * mx;
            }
        }
        let closest: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| 0f64.clamp(l, h)).collect();
        return Ok(norm(&closest));
    }
    let mut sums: Vec<Vec<f64>> = vec![x.iter().map(|xi| sigma * xi).collect()];
    for (w, slopes) in &sets {
        let mut next = Vec::with_capacity(sums.len() * slopes.len());
        for s in &sums {
            for slope in slopes {
                let p: Vec<f64> = s.iter().zip(slope.iter()).map(|(a, b)| a + w * b).collect();
                if !next.contains(&p) {
                    next.push(p);
                }
            }
        }
        if next.len() > super::minnorm::MAX_POINTS {
            return Err(Error::UnsupportedProblem("too many active piece combinations".into()));
        }
        sums = next;
    }
    Ok(min_norm_point(&sums)?.1)
}

/// For each block, the single coordinate axis carrying all its slopes
/// (`None` when every slope is zero). Returns `None` if some block is not
/// axis aligned.
fn axis_of_each(sets: &[(f64, Vec<&[f64]>)], n: usize) -> Option<Vec<Option<usize>>> {
    sets.iter()
        .map(|(_, slopes)| {
            let mut axis = None;
            for s in slopes {
                for j in 0..n {
                    if s[j] != 0.0 {
                        match axis {
                            None => axis = Some(j),
                            Some(a) if a == j => {}
                            Some(_) => return None,
                        }
                    }
                }
            }
            Some(axis)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_examples() {
        let p = Problem::abs1d();
        assert_eq!(stationarity_gap(&p, &[0.0], 0.0, 0.1).unwrap(), 0.0);
        assert!((stationarity_gap(&p, &[1.0], 0.0, 0.1).unwrap() - 1.1).abs() < 1e-15);
        // The ball of radius 1 reaches the kink, so the lower bound vanishes.
        assert_eq!(stationarity_gap(&p, &[1.0], 1.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn maxpiece_kink_between_opposite_pieces() {
        let p = Problem::maxpiece2d();
        assert!(stationarity_gap(&p, &[0.0, -1.0], 0.0, 0.0).unwrap() < 1e-15);
        assert!((stationarity_gap(&p, &[0.0, 1.0], 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn l1quad_box_path_matches_enumeration() {
        let p = Problem::l1quad(2, &[0.0, 0.0, 1.0, -1.0]).unwrap();
        let x = [0.0, 0.0];
        let box_gap = stationarity_gap(&p, &x, 0.0, 0.5).unwrap();
        // D_f(0) = 1/2 ([-1,1] x [-1,1]) + 1/2 (-1, 1): contains the origin.
        assert_eq!(box_gap, 0.0);
        let y = [2.0, 0.0];
        let gy = stationarity_gap(&p, &y, 0.0, 0.5).unwrap();
        // Gradient (1, 1/2 * [-1,1] + 1/2) + (1, 0) = (2, [0, 1]).
        assert!((gy - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mlp_requires_estimate() {
        let spec = crate::oracle::ProblemSpec { id: "relu_mlp".into(), samples: 4, ..Default::default() };
        let p = Problem::from_spec(&spec, 1).unwrap();
        let x = vec![0.1; p.dim()];
        assert!(matches!(stationarity_gap(&p, &x, 0.0, 0.1), Err(Error::UnsupportedProblem(_))));
        let mut rng = rand::thread_rng();
        let g = stationarity_gap_estimate(&p, &x, 0.0, 0.1, 8, &mut rng).unwrap();
        assert!(g.estimate && g.value >= 0.0);
    }
}
