//! Online checks along a run: the residual `||sigma x + m||` against its
//! a-posteriori bound, the shadow sequence `y = -m / sigma`, the
//! single-timescale Lyapunov function, stationarity gaps and decay rates.

pub mod gap;
pub mod minnorm;
pub mod path;
mod trace;

pub use gap::{stationarity_gap, stationarity_gap_estimate, Gap};
pub use minnorm::min_norm_point;
pub use path::{interpolate, PathFn};
pub use trace::{csv_header, RunSummary, Trace, TraceBuilder, TraceRow};

use crate::engine::StepRecord;
use crate::error::{Error, Result};
use crate::oracle::Problem;
use crate::param::{norm, OptimizerState};

/// `||sigma x + m||`.
pub fn residual(state: &OptimizerState, sigma: f64) -> f64 {
    norm(&state.x.iter().zip(state.m.iter()).map(|(x, m)| sigma * x + m).collect::<Vec<_>>())
}

/// Constants of the residual bound, realized along one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub sigma: f64,
    /// `max(||m_0||, sup_k ||x_k||)`.
    pub m_x: f64,
    /// `sup_k ||g_k|| + ||m_k||`.
    pub m_d: f64,
    /// `1 - max_k max(|1 - eta_k sigma M_v|, |1 - eta_k sigma eps_v|)`.
    pub eta_tilde: f64,
}

impl BoundConstants {
    /// `eta_tilde` from the stepsizes and the bracket `eps_v <= H <= M_v`.
    pub fn contraction(etas: impl IntoIterator<Item = f64>, sigma: f64, eps_v: f64, m_v: f64) -> f64 {
        let worst = etas
            .into_iter()
            .map(|e| (1.0 - e * sigma * m_v).abs().max((1.0 - e * sigma * eps_v).abs()))
            .fold(0.0, f64::max);
        1.0 - worst
    }

    pub fn is_usable(&self) -> bool {
        self.eta_tilde > 0.0 && self.eta_tilde <= 1.0 && self.m_x.is_finite() && self.m_d.is_finite()
    }
}

/// `delta_k = (1 - eta~) delta_{k-1} + 2 M_d theta_k` from
/// `delta_{-1} = sigma M_x + M_d`; one value per entry of `theta`.
pub fn bound_series(consts: &BoundConstants, theta: &[f64]) -> Vec<f64> {
    let rate = 1.0 - consts.eta_tilde;
    let mut prev = consts.sigma * consts.m_x + consts.m_d;
    theta
        .iter()
        .map(|&t| {
            prev = rate * prev + 2.0 * consts.m_d * t;
            prev
        })
        .collect()
}

/// Checks `y_{k+1} = y_k - (theta_k / sigma)(g_k + sigma y_k)` with
/// `y = -m / sigma`, coordinatewise to 4 ulps of the largest term involved.
pub fn shadow_step_check(record: &StepRecord, sigma: f64) -> bool {
    let theta = record.theta;
    record.before.m.iter().zip(record.after.m.iter()).zip(record.g.iter()).all(|((&m0, &m1), &g)| {
        let y0 = -m0 / sigma;
        let lhs = -m1 / sigma;
        let incr = (theta / sigma) * (g + sigma * y0);
        let rhs = y0 - incr;
        let scale = lhs.abs().max(rhs.abs()).max(y0.abs()).max(incr.abs()).max((theta * g / sigma).abs());
        (lhs - rhs).abs() <= 4.0 * f64::EPSILON * scale
    })
}

/// `f(x) + sigma/2 ||x||^2 + 1/(2 tau1) <m + sigma x, (max(v,0) + eps)^{-1/2} (m + sigma x)>`.
pub fn lyapunov_h(
    problem: &Problem,
    x: &[f64],
    m: &[f64],
    v: &[f64],
    sigma: f64,
    tau1: f64,
    epsilon: f64,
) -> Result<f64> {
    let reg = problem.regularized_objective(x, sigma)?;
    let quad: f64 = x
        .iter()
        .zip(m)
        .zip(v)
        .map(|((&xi, &mi), &vi)| {
            let r = mi + sigma * xi;
            r * r / (vi.max(0.0) + epsilon).sqrt()
        })
        .sum();
    Ok(reg + quad / (2.0 * tau1))
}

/// Least-squares slope of `log c_k` against `log k` over the last
/// `tail_fraction` of the series, where entry `i` holds `c_{i+1}`.
pub fn loglog_slope(series: &[f64], tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("tail fraction must be in (0, 1), got {tail_fraction}")));
    }
    let len = series.len();
    let count = ((len as f64) * tail_fraction).round() as usize;
    if count < 10 {
        return Err(Error::Degenerate(format!("tail has {count} points, need at least 10")));
    }
    let start = len - count;
    let mut pts = Vec::with_capacity(count);
    for (i, &c) in series.iter().enumerate().skip(start) {
        if !(c > 0.0) {
            return Err(Error::Degenerate(format!("series entry {} is not positive", i + 1)));
        }
        pts.push((((i + 1) as f64).ln(), c.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StepperKind;
    use crate::engine::{adam_coupled_step, afmdw_step};
    use crate::estimators::{EstimatorKind, EstimatorScheme};
    use crate::param::ParamVector;

    fn st(x: f64, m: f64, v: f64) -> OptimizerState {
        OptimizerState::new(
            ParamVector::new(vec![x]).unwrap(),
            ParamVector::new(vec![m]).unwrap(),
            ParamVector::new(vec![v]).unwrap(),
        )
        .unwrap()
    }

    fn record(before: OptimizerState, after: OptimizerState, g: f64, theta: f64) -> StepRecord {
        StepRecord {
            k: before.k,
            stepper: StepperKind::Afmdw,
            g: ParamVector::new(vec![g]).unwrap(),
            index: Some(0),
            eta: 0.1,
            theta,
            beta: 0.1,
            before,
            after,
        }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual(&st(1.0, -0.1, 0.0), 0.1), 0.0);
        assert!((residual(&st(1.0, 0.1, 0.0), 0.1) - 0.2).abs() < 1e-16);
    }

    #[test]
    fn bound_first_term() {
        let c = BoundConstants { sigma: 1.0, m_x: 1.0, m_d: 1.0, eta_tilde: 0.5 };
        assert!((bound_series(&c, &[0.1])[0] - 1.2).abs() < 1e-15);
        let zero = bound_series(&c, &[0.0; 5]);
        for (k, d) in zero.iter().enumerate() {
            assert!((d - 0.5f64.powi(k as i32 + 1) * 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn shadow_identity_on_decoupled_step() {
        let s = EstimatorScheme::new(EstimatorKind::Adam, 0.1, 1e-3).unwrap();
        let before = st(0.8, 0.3, 0.2);
        let after = afmdw_step(&before, &[-1.0], 0.1, 0.3, 0.1, &s, 0.1).unwrap();
        assert!(shadow_step_check(&record(before.clone(), after, -1.0, 0.3), 0.1));
        let coupled = adam_coupled_step(&before, &[-1.0], 0.1, 0.3, 0.1, 0.1, 1e-3).unwrap();
        assert!(!shadow_step_check(&record(before.clone(), coupled, -1.0, 0.3), 0.1));
        let frozen = afmdw_step(&before, &[5.0], 0.1, 0.0, 0.1, &s, 0.1).unwrap();
        assert!(shadow_step_check(&record(before, frozen, 5.0, 0.0), 0.1));
    }

    #[test]
    fn lyapunov_examples() {
        let p = Problem::abs1d();
        let h = lyapunov_h(&p, &[1.0], &[0.0], &[0.0], 0.1, 1.0, 1.0).unwrap();
        assert!((h - 1.055).abs() < 1e-15);
        let aligned = lyapunov_h(&p, &[2.0], &[-0.2], &[3.0], 0.1, 1.0, 0.5).unwrap();
        assert_eq!(aligned, p.regularized_objective(&[2.0], 0.1).unwrap());
    }

    #[test]
    fn slope_of_power_laws() {
        let inv: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
        assert!((loglog_slope(&inv, 0.3).unwrap() + 1.0).abs() < 1e-9);
        let half: Vec<f64> = (1..=1000).map(|k| 5.0 * (k as f64).powf(-0.5)).collect();
        assert!((loglog_slope(&half, 0.3).unwrap() + 0.5).abs() < 1e-9);
        assert!(matches!(loglog_slope(&inv[..20], 0.3), Err(Error::Degenerate(_))));
    }
}
