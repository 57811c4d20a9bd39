//! Explicit Euler integration of the limiting differential inclusions and
//! exact stationary sets of small piecewise-linear problems.
//!
//! Set-valued right-hand sides are resolved with the oracle's canonical
//! selection, so each integration produces one admissible trajectory.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::diagnostics::{csv_header, lyapunov_h, min_norm_point, PathFn};
use crate::error::{check_dim, Error, Result};
use crate::oracle::{full_subgradient, PiecewiseLinear, Problem};
use crate::param::{dist, norm};

/// Number of grid points used by [`path_distance`].
pub const DISTANCE_GRID: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct DIPath {
    /// `di-sgd` or `di-st`.
    pub mode: &'static str,
    pub dt: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Empty for `di-sgd`.
    pub m: Vec<Vec<f64>>,
    /// Empty for `di-sgd`.
    pub v: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
    pub lyapunov: Vec<Option<f64>>,
    pub sigma: f64,
}

impl DIPath {
    pub fn end(&self) -> f64 {
        *self.times.last().expect("nonempty path")
    }

    pub fn to_path_fn(&self) -> PathFn {
        PathFn::from_knots(self.times.clone(), self.x.clone()).expect("uniform knots")
    }

    /// Writes the path with the trace column layout; `eta` holds `dt`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.x.first().map_or(0, Vec::len);
        writeln!(w, "{}", csv_header(dim))?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
        for (k, t) in self.times.iter().enumerate() {
            let residual = self
                .m
                .get(k)
                .map(|m| norm(&m.iter().zip(&self.x[k]).map(|(mi, xi)| mi + self.sigma * xi).collect::<Vec<_>>()));
            write!(
                w,
                "{},{k},{t:.16e},{:.16e},{},,,{},,{:.16e},,",
                self.mode,
                self.objective[k],
                opt(residual),
                opt(self.lyapunov[k]),
                self.dt
            )?;
            for xi in &self.x[k] {
                write!(w, ",{xi:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and T >= dt, got dt = {dt}, T = {t_end}")));
    }
    Ok((t_end / dt - 1e-9).ceil() as usize)
}

/// Euler scheme `y <- y - dt (d(y) + sigma y)` with `d` the full subgradient.
pub fn integrate_di_sgd(problem: &Problem, y0: &[f64], sigma: f64, dt: f64, t_end: f64) -> Result<DIPath> {
    check_dim(problem.dim(), y0.len())?;
    let steps = step_count(dt, t_end)?;
    let mut y = y0.to_vec();
    let mut path = DIPath {
        mode: "di-sgd",
        dt,
        times: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        m: Vec::new(),
        v: Vec::new(),
        objective: Vec::with_capacity(steps + 1),
        lyapunov: Vec::with_capacity(steps + 1),
        sigma,
    };
    for k in 0..=steps {
        path.times.push(k as f64 * dt);
        path.objective.push(problem.regularized_objective(&y, sigma)?);
        path.lyapunov.push(None);
        path.x.push(y.clone());
        if k == steps {
            break;
        }
        let d = full_subgradient(problem, &y)?;
        for (yi, di) in y.iter_mut().zip(d.iter()) {
            *yi -= dt * (di + sigma * *yi);
        }
    }
    Ok(path)
}

/// Parameters of the single-timescale inclusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StParams {
    pub sigma: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
}

/// Euler scheme on `(x, m, v)`:
/// `x' = -(max(v,0) + eps)^{-1/2} (m + sigma x)`, `m' = -tau1 (m - d)`,
/// `v' = -tau2 (v - d^2)`, all right-hand sides taken at the old point.
pub fn integrate_di_st(
    problem: &Problem,
    x0: &[f64],
    m0: &[f64],
    v0: &[f64],
    params: StParams,
    dt: f64,
    t_end: f64,
) -> Result<DIPath> {
    let n = problem.dim();
    check_dim(n, x0.len())?;
    check_dim(n, m0.len())?;
    check_dim(n, v0.len())?;
    let StParams { sigma, tau1, tau2, epsilon } = params;
    let steps = step_count(dt, t_end)?;
    let (mut x, mut m, mut v) = (x0.to_vec(), m0.to_vec(), v0.to_vec());
    let mut path = DIPath {
        mode: "di-st",
        dt,
        times: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        m: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        objective: Vec::with_capacity(steps + 1),
        lyapunov: Vec::with_capacity(steps + 1),
        sigma,
    };
    for k in 0..=steps {
        path.times.push(k as f64 * dt);
        path.objective.push(problem.regularized_objective(&x, sigma)?);
        path.lyapunov.push(Some(lyapunov_h(problem, &x, &m, &v, sigma, tau1, epsilon)?));
        path.x.push(x.clone());
        path.m.push(m.clone());
        path.v.push(v.clone());
        if k == steps {
            break;
        }
        let d = full_subgradient(problem, &x)?;
        for i in 0..n {
            let dx = (m[i] + sigma * x[i]) / (v[i].max(0.0) + epsilon).sqrt();
            let dm = tau1 * (m[i] - d[i]);
            let dv = tau2 * (v[i] - d[i] * d[i]);
            x[i] -= dt * dx;
            m[i] -= dt * dm;
            v[i] -= dt * dv;
        }
    }
    Ok(path)
}

/// `sup ||w(t) - p(t)||` over a uniform grid of [`DISTANCE_GRID`] points on `[0, T]`.
pub fn path_distance(w: &PathFn, p: &DIPath, t_end: f64) -> Result<f64> {
    let tol = 1e-9 * t_end.max(1.0);
    if !(t_end > 0.0) || w.start() > 0.0 || p.times[0] > 0.0 || w.end() + tol < t_end || p.end() + tol < t_end {
        return Err(Error::DomainMismatch(format!(
            "paths cover [{}, {}] and [{}, {}], need [0, {t_end}]",
            w.start(),
            w.end(),
            p.times[0],
            p.end()
        )));
    }
    let pf = p.to_path_fn();
    let mut worst: f64 = 0.0;
    for j in 0..DISTANCE_GRID {
        let t = (t_end * j as f64 / (DISTANCE_GRID - 1) as f64).min(w.end()).min(pf.end());
        worst = worst.max(dist(&w.eval(t)?, &pf.eval(t)?));
    }
    Ok(worst)
}

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self { lo: vec![-half_width; dim], hi: vec![half_width; dim] }
    }
}

/// A convex polytope given by its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPiece {
    pub vertices: Vec<Vec<f64>>,
}

impl ConvexPiece {
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        let shifted: Vec<Vec<f64>> =
            self.vertices.iter().map(|v| v.iter().zip(x).map(|(a, b)| a - b).collect()).collect();
        Ok(min_norm_point(&shifted)?.1)
    }
}

/// The stationary set `{x : 0 in D_f(x) + sigma x}` within a box, as a
/// union of convex pieces, plus a discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySet {
    pub pieces: Vec<ConvexPiece>,
    /// Vertices of every piece and points along the segments between
    /// them, spaced at most `resolution` apart.
    pub points: Vec<Vec<f64>>,
}

impl StationarySet {
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        let mut best = f64::INFINITY;
        for p in &self.pieces {
            best = best.min(p.distance(x)?);
        }
        Ok(best)
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

/// Whether the canonical selection at `p` fails to cancel `sigma p`, so
/// that Euler integration started at `p` moves away from it.
pub fn selection_sensitive(problem: &Problem, p: &[f64], sigma: f64) -> Result<bool> {
    let d = full_subgradient(problem, p)?;
    let r: Vec<f64> = d.iter().zip(p).map(|(di, pi)| di + sigma * pi).collect();
    Ok(norm(&r) > 1e-12)
}

const FEAS_TOL: f64 = 1e-9;
const MAX_COMBINATIONS: u64 = 2_000_000;

/// Enumerates active-piece patterns and, on each, solves the stationarity
/// condition as a small polytope: variables `(x, lambda)` with
/// `sigma x + sum_b w_b sum_p lambda_bp a_p = 0`, `lambda_b` in the simplex,
/// the pattern's pieces tied and maximal, and `x` in the box.
pub fn brute_force_stationary(
    problem: &Problem,
    search: &SearchBox,
    sigma: f64,
    resolution: f64,
) -> Result<StationarySet> {
    let pl = problem
        .piecewise()
        .ok_or_else(|| Error::UnsupportedProblem(format!("no stationary-set oracle for `{}`", problem.id())))?;
    let n = pl.dim();
    if n > 3 {
        return Err(Error::UnsupportedProblem(format!("dimension {n} > 3")));
    }
    if matches!(problem, Problem::MaxPiece2d(_)) && pl.components()[0][0].pieces.len() > 3 {
        return Err(Error::UnsupportedProblem("max-affine instances are limited to 3 pieces".into()));
    }
    check_dim(n, search.lo.len())?;
    check_dim(n, search.hi.len())?;
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    let blocks: Vec<(f64, &crate::oracle::MaxBlock)> = pl.weighted_blocks().collect();
    let mut pieces: Vec<ConvexPiece> = Vec::new();
    for pattern in patterns(&blocks)? {
        let verts = pattern_vertices(pl, &blocks, &pattern, search, sigma)?;
        if verts.is_empty() {
            continue;
        }
        let piece = ConvexPiece { vertices: verts };
        if !pieces.iter().any(|p| same_vertex_set(p, &piece)) {
            pieces.push(piece);
        }
    }
    let points = discretize(&pieces, resolution);
    Ok(StationarySet { pieces, points })
}

fn same_vertex_set(a: &ConvexPiece, b: &ConvexPiece) -> bool {
    a.vertices.len() == b.vertices.len() && a.vertices.iter().all(|v| b.vertices.iter().any(|u| dist(u, v) <= 1e-9))
}

/// Every choice of a nonempty subset of pieces per block.
fn patterns(blocks: &[(f64, &crate::oracle::MaxBlock)]) -> Result<Vec<Vec<Vec<usize>>>> {
    let mut total: u64 = 1;
    for (_, b) in blocks {
        total = total.saturating_mul((1u64 << b.pieces.len()) - 1);
    }
    if total > 100_000 {
        return Err(Error::UnsupportedProblem(format!("{total} active patterns")));
    }
    let mut out: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for (_, b) in blocks {
        let np = b.pieces.len();
        let subsets: Vec<Vec<usize>> =
            (1u32..(1 << np)).map(|mask| (0..np).filter(|&i| mask & (1 << i) != 0).collect()).collect();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                subsets.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(s.clone());
                    p
                })
            })
            .collect();
    }
    Ok(out)
}

/// Vertices (in `x`) of the stationary polytope of one pattern.
fn pattern_vertices(
    pl: &PiecewiseLinear,
    blocks: &[(f64, &crate::oracle::MaxBlock)],
    pattern: &[Vec<usize>],
    search: &SearchBox,
    sigma: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = pl.dim();
    let nl: usize = pattern.iter().map(Vec::len).sum();
    let dim = n + nl;
    let mut eq_a: Vec<Vec<f64>> = Vec::new();
    let mut eq_b: Vec<f64> = Vec::new();
    // Inequalities as rows `g . z <= h`.
    let mut in_g: Vec<Vec<f64>> = Vec::new();
    let mut in_h: Vec<f64> = Vec::new();

    // sigma x + sum w_b lambda_bp a_p = 0
    for j in 0..n {
        let mut row = vec![0.0; dim];
        row[j] = sigma;
        let mut col = n;
        for ((w, block), s) in blocks.iter().zip(pattern) {
            for &p in s {
                row[col] = w * block.pieces[p].slope[j];
                col += 1;
            }
        }
        eq_a.push(row);
        eq_b.push(0.0);
    }
    let mut col = n;
    for ((_, block), s) in blocks.iter().zip(pattern) {
        // simplex
        let mut row = vec![0.0; dim];
        for i in 0..s.len() {
            row[col + i] = 1.0;
            let mut neg = vec![0.0; dim];
            neg[col + i] = -1.0;
            in_g.push(neg);
            in_h.push(0.0);
        }
        eq_a.push(row);
        eq_b.push(1.0);
        col += s.len();
        // ties and maximality on x
        let p0 = &block.pieces[s[0]];
        for &p in &s[1..] {
            let q = &block.pieces[p];
            let row = difference_row(&q.slope, &p0.slope, dim);
            eq_a.push(row);
            eq_b.push(p0.offset - q.offset);
        }
        for (qi, q) in block.pieces.iter().enumerate() {
            if s.contains(&qi) {
                continue;
            }
            let row = difference_row(&q.slope, &p0.slope, dim);
            in_g.push(row);
            in_h.push(p0.offset - q.offset);
        }
    }
    for j in 0..n {
        let mut up = vec![0.0; dim];
        up[j] = 1.0;
        in_g.push(up);
        in_h.push(search.hi[j]);
        let mut down = vec![0.0; dim];
        down[j] = -1.0;
        in_g.push(down);
        in_h.push(-search.lo[j]);
    }

    let a = DMatrix::from_fn(eq_a.len(), dim, |r, c| eq_a[r][c]);
    let b = DVector::from_vec(eq_b);
    let Some((z0, null)) = affine_solution(&a, &b) else {
        return Ok(Vec::new());
    };
    let r = null.ncols();
    let g = DMatrix::from_fn(in_g.len(), dim, |i, c| in_g[i][c]);
    let h = DVector::from_vec(in_h);
    let gn = &g * &null;
    let slack = &h - &g * &z0;
    let rows = gn.nrows();
    let mut verts: Vec<Vec<f64>> = Vec::new();
    let mut consider = |mu: DVector<f64>| {
        let resid = &gn * &mu - &slack;
        if resid.iter().all(|&e| e <= FEAS_TOL) {
            let z = &z0 + &null * &mu;
            let x: Vec<f64> = (0..n).map(|j| if z[j].abs() <= 1e-12 { 0.0 } else { z[j] }).collect();
            if !verts.iter().any(|v| dist(v, &x) <= 1e-9) {
                verts.push(x);
            }
        }
    };
    if r == 0 {
        consider(DVector::zeros(0));
        return Ok(verts);
    }
    if binomial(rows as u64, r as u64) > MAX_COMBINATIONS {
        return Err(Error::UnsupportedProblem("vertex enumeration too large".into()));
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        let sub = DMatrix::from_fn(r, r, |i, c| gn[(idx[i], c)]);
        let rhs = DVector::from_fn(r, |i, _| slack[idx[i]]);
        if let Some(mu) = sub.clone().lu().solve(&rhs) {
            if (&sub * &mu - &rhs).amax() <= 1e-10 * (1.0 + rhs.amax()) && sub.determinant().abs() > 1e-12 {
                consider(mu);
            }
        }
        // next combination
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(verts);
            }
            i -= 1;
            if idx[i] < rows - r + i {
                idx[i] += 1;
                for j in i + 1..r {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `a - b` in the `x` slots of a row over `(x, lambda)`.
fn difference_row(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let mut row: Vec<f64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
    row.resize(dim, 0.0);
    row
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut acc: u64 = 1;
    for i in 0..k.min(n - k) {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// A particular solution of `a z = b` and an orthonormal basis of the
/// null space of `a`, or `None` if the system is inconsistent.
fn affine_solution(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let dim = a.ncols();
    let z0 = a.clone().svd(true, true).solve(b, 1e-12).ok()?;
    if (a * &z0 - b).amax() > 1e-9 {
        return None;
    }
    let eig = SymmetricEigen::new(a.transpose() * a);
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i].abs() <= 1e-10 * scale).collect();
    let null = DMatrix::from_fn(dim, cols.len(), |r, c| eig.eigenvectors[(r, cols[c])]);
    Some((z0, null))
}

fn discretize(pieces: &[ConvexPiece], resolution: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut push = |p: Vec<f64>| {
        if !out.iter().any(|q| dist(q, &p) <= 1e-12) {
            out.push(p);
        }
    };
    for piece in pieces {
        for v in &piece.vertices {
            push(v.clone());
        }
        for (i, a) in piece.vertices.iter().enumerate() {
            for b in &piece.vertices[i + 1..] {
                let segs = (dist(a, b) / resolution).ceil() as usize;
                for s in 1..segs {
                    let t = s as f64 / segs as f64;
                    push(a.iter().zip(b).map(|(u, w)| u + t * (w - u)).collect());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_stationary_set_is_origin() {
        let set = brute_force_stationary(&Problem::abs1d(), &SearchBox::cube(1, 3.0), 0.1, 0.1).unwrap();
        assert_eq!(set.points, vec![vec![0.0]]);
    }

    #[test]
    fn maxpiece_segment() {
        let set = brute_force_stationary(&Problem::maxpiece2d(), &SearchBox::cube(2, 2.0), 0.0, 0.5).unwrap();
        assert!(set.distance(&[0.0, -1.3]).unwrap() < 1e-12);
        assert!(set.distance(&[0.0, -2.0]).unwrap() < 1e-12);
        assert!((set.distance(&[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((set.distance(&[0.5, -1.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(set.points.len() >= 5);
        assert!(selection_sensitive(&Problem::maxpiece2d(), &[0.0, 0.0], 0.0).unwrap());
        assert!(!selection_sensitive(&Problem::maxpiece2d(), &[0.0, -1.0], 0.0).unwrap());
    }

    #[test]
    fn non_piecewise_rejected() {
        let q = Problem::Quadratic { dim: 1 };
        assert!(matches!(
            brute_force_stationary(&q, &SearchBox::cube(1, 1.0), 0.1, 0.1),
            Err(Error::UnsupportedProblem(_))
        ));
    }

    #[test]
    fn quadratic_flow_decays_exponentially() {
        let q = Problem::Quadratic { dim: 1 };
        let p = integrate_di_sgd(&q, &[2.0], 0.0, 1e-4, 1.0).unwrap();
        assert_eq!(p.times.len(), 10_001);
        assert!((p.x.last().unwrap()[0] - 2.0 / std::f64::consts::E).abs() < 1e-3);
    }

    #[test]
    fn abs_flow_chatters_near_zero() {
        let dt = 0.01;
        let p = integrate_di_sgd(&Problem::abs1d(), &[1.0], 0.0, dt, 2.0).unwrap();
        assert!((p.x[10][0] - 0.9).abs() < 1e-12);
        for x in &p.x[110..] {
            assert!(x[0].abs() <= dt + 1e-12);
        }
    }

    #[test]
    fn path_distance_examples() {
        let q = Problem::Quadratic { dim: 1 };
        let a = integrate_di_sgd(&q, &[0.0], 0.0, 0.01, 1.0).unwrap();
        assert_eq!(path_distance(&a.to_path_fn(), &a, 1.0).unwrap(), 0.0);
        let shifted = PathFn::from_knots(vec![0.0, 1.0], vec![vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(path_distance(&shifted, &a, 1.0).unwrap(), 1.0);
        assert!(matches!(path_distance(&shifted, &a, 2.0), Err(Error::DomainMismatch(_))));
    }
}
