//! Minimum-norm point of the convex hull of a small point set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Exhaustive search is used up to this many distinct points.
pub const MAX_POINTS: usize = 64;

/// The point of `conv(points)` closest to the origin, and its norm.
///
/// Enumerates affinely independent subsets of at most `n + 1` points,
/// solves the affine least-norm problem on each and keeps the best
/// candidate with nonnegative barycentric coordinates.
pub fn min_norm_point(points: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !pts.contains(p) {
            pts.push(p.clone());
        }
    }
    let Some(first) = pts.first() else {
        return Err(Error::Degenerate("empty point set".into()));
    };
    let n = first.len();
    if pts.len() > MAX_POINTS {
        return Err(Error::UnsupportedProblem(format!(
            "{} hull points exceed the exhaustive limit {MAX_POINTS}",
            pts.len()
        )));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let max_size = (n + 1).min(pts.len());
    let mut subset = Vec::with_capacity(max_size);
    for size in 1..=max_size {
        for_each_subset(pts.len(), size, 0, &mut subset, &mut |idx| {
            if let Some(p) = affine_min_norm(&pts, idx) {
                let norm = crate::param::norm(&p);
                if best.as_ref().is_none_or(|(_, b)| norm < *b) {
                    best = Some((p, norm));
                }
            }
        });
    }
    best.ok_or_else(|| Error::Degenerate("no feasible subset".into()))
}

fn for_each_subset(n: usize, size: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if cur.len() == size {
        f(cur);
        return;
    }
    for i in start..n {
        if n - i < size - cur.len() {
            break;
        }
        cur.push(i);
        for_each_subset(n, size, i + 1, cur, f);
        cur.pop();
    }
}

/// Least-norm point of the affine hull of `pts[idx]` if it lies in their
/// convex hull and the subset is affinely independent.
fn affine_min_norm(pts: &[Vec<f64>], idx: &[usize]) -> Option<Vec<f64>> {
    let p0 = &pts[idx[0]];
    if idx.len() == 1 {
        return Some(p0.clone());
    }
    let n = p0.len();
    let s = idx.len() - 1;
    let d = DMatrix::from_fn(n, s, |r, c| pts[idx[c + 1]][r] - p0[r]);
    let gram = d.transpose() * &d;
    let rhs = -(d.transpose() * DVector::from_column_slice(p0));
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let chol = gram.clone().cholesky()?;
    // Reject near-dependent subsets; smaller subsets cover them.
    let det = chol.determinant();
    if det <= 1e-12 * scale.powi(s as i32) {
        return None;
    }
    let mu = chol.solve(&rhs);
    let lead = 1.0 - mu.sum();
    let tol = -1e-12;
    if lead < tol || mu.iter().any(|&m| m < tol) {
        return None;
    }
    let p = DVector::from_column_slice(p0) + d * mu;
    Some(p.iter().copied().collect())
}
