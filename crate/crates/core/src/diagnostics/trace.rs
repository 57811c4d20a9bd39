use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gap::{stationarity_gap_estimate, Gap};
use super::{bound_series, loglog_slope, lyapunov_h, residual, shadow_step_check, BoundConstants};
use crate::config::{RunConfig, StepperKind};
use crate::engine::StepRecord;
use crate::error::Result;
use crate::estimators::{bound_certificate, precondition, EstimatorScheme};
use crate::oracle::Problem;
use crate::param::{dist, norm, OptimizerState};

/// Relative slack on the residual bound, covering rounding in the bound
/// recursion itself.
const BOUND_SLACK: f64 = 8.0 * f64::EPSILON;
const GAP_SAMPLES: usize = 16;

/// Column order shared by run traces and simulated paths.
pub fn csv_header(dim: usize) -> String {
    let mut h = String::from("mode,k,t,objective,residual,bound,dist_xy,lyapunov,gap,eta,theta,beta");
    for i in 1..=dim {
        h.push_str(&format!(",x_{i}"));
    }
    h
}

/// State after step `k` (so `k >= 1`) and the stepsizes that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    /// `sum_{i < k} eta_i`.
    pub t: f64,
    /// Regularized objective `f(x_k) + sigma/2 ||x_k||^2`.
    pub objective: f64,
    pub residual: f64,
    /// Bound `delta_{k-1}` on `residual`.
    pub bound: Option<f64>,
    /// `||x_k - y_k||` with `y_k = -m_k / sigma`.
    pub dist_xy: f64,
    pub lyapunov: Option<f64>,
    pub gap: Option<f64>,
    pub eta: f64,
    pub theta: f64,
    pub beta: f64,
    pub x: Vec<f64>,
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_objective: f64,
    pub final_residual: f64,
    /// Log-log slope of the residual over the last 30% of the run.
    pub residual_slope: Option<f64>,
    pub bound_checked: bool,
    pub bound_violations: usize,
    pub shadow_checked: bool,
    pub shadow_failures: usize,
    pub q: Option<f64>,
    pub q_violations: usize,
    /// Gap at the final iterate with `delta = 0`.
    pub final_gap: Gap,
    pub lipschitz_certified: bool,
    /// Realized range of `H(v_k)` over all coordinates and steps.
    pub h_range: (f64, f64),
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
        writeln!(f, "final_objective = {:.16e}", self.final_objective)?;
        writeln!(f, "final_residual = {:.16e}", self.final_residual)?;
        writeln!(f, "residual_slope = {}", opt(self.residual_slope))?;
        if self.bound_checked {
            writeln!(f, "bound_violations = {}", self.bound_violations)?;
        } else {
            writeln!(f, "bound_violations = n/a")?;
        }
        if self.shadow_checked {
            writeln!(f, "shadow_failures = {}", self.shadow_failures)?;
        }
        writeln!(f, "boundedness_q = {}", opt(self.q))?;
        writeln!(f, "boundedness_violations = {}", self.q_violations)?;
        writeln!(
            f,
            "final_gap = {:.6e}{}",
            self.final_gap.value,
            if self.final_gap.estimate { " (sampled estimate)" } else { "" }
        )?;
        writeln!(f, "h_range = [{:.6e}, {:.6e}]", self.h_range.0, self.h_range.1)?;
        if !self.lipschitz_certified {
            writeln!(f, "note = subgradient bound M_f is a sampled estimate, not a certificate")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub mode: String,
    pub dim: usize,
    pub sigma: f64,
    pub initial: OptimizerState,
    pub rows: Vec<TraceRow>,
    pub constants: Option<BoundConstants>,
    /// Bracket on `H` used for the bound and boundedness constants.
    pub h_bracket: (f64, f64),
    pub summary: RunSummary,
}

impl Trace {
    pub fn residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.residual).collect()
    }

    /// `x_0, x_1, ..., x_K`.
    pub fn xs(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.initial.x.to_vec()).chain(self.rows.iter().map(|r| r.x.clone())).collect()
    }

    /// `m_0, m_1, ..., m_K`.
    pub fn ms(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.initial.m.to_vec()).chain(self.rows.iter().map(|r| r.m.clone())).collect()
    }

    pub fn final_x(&self) -> &[f64] {
        self.rows.last().map_or(&self.initial.x, |r| &r.x)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", csv_header(self.dim))?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
        for r in &self.rows {
            write!(
                w,
                "{},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{},{:.16e},{:.16e},{:.16e}",
                self.mode,
                r.k,
                r.t,
                r.objective,
                r.residual,
                opt(r.bound),
                r.dist_xy,
                opt(r.lyapunov),
                opt(r.gap),
                r.eta,
                r.theta,
                r.beta
            )?;
            for xi in &r.x {
                write!(w, ",{xi:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Accumulates step records into a [`Trace`]. The bound constants are
/// realized suprema, so bounds and gaps are filled in by [`Self::finish`].
pub struct TraceBuilder<'a> {
    config: &'a RunConfig,
    problem: &'a Problem,
    scheme: EstimatorScheme,
    initial: OptimizerState,
    rows: Vec<TraceRow>,
    t: f64,
    m_x: f64,
    m_d: f64,
    l_hat: f64,
    h_min: f64,
    h_max: f64,
    shadow_failures: usize,
}

impl<'a> TraceBuilder<'a> {
    pub fn new(config: &'a RunConfig, problem: &'a Problem, scheme: EstimatorScheme, initial: OptimizerState) -> Self {
        let m_x = initial.m.norm().max(initial.x.norm());
        Self {
            config,
            problem,
            scheme,
            rows: Vec::with_capacity(config.max_iters as usize),
            t: 0.0,
            m_x,
            m_d: 0.0,
            l_hat: 0.0,
            h_min: f64::INFINITY,
            h_max: 0.0,
            shadow_failures: 0,
            initial,
        }
    }

    fn decoupled(&self) -> bool {
        self.config.stepper.is_decoupled()
    }

    pub fn push(&mut self, rec: &StepRecord) -> Result<()> {
        let sigma = self.config.sigma;
        let after = &rec.after;
        self.t += rec.eta;
        self.m_x = self.m_x.max(after.x.norm());
        let g_norm = rec.g.norm();
        self.m_d = self.m_d.max(g_norm + rec.before.m.norm()).max(after.m.norm());
        if let Some(growth) = self.problem.growth() {
            let denom = 1.0 + rec.before.x.norm().powf(growth.nu);
            self.l_hat = self.l_hat.max(g_norm / denom);
        }
        if self.decoupled() {
            let h = precondition(&self.scheme, &after.v)?;
            for &hi in h.iter() {
                self.h_min = self.h_min.min(hi);
                self.h_max = self.h_max.max(hi);
            }
            if !shadow_step_check(rec, sigma) {
                self.shadow_failures += 1;
            }
        }
        let lyapunov = if self.config.stepper == StepperKind::SingleTimescale {
            let tau1 = self.config.tau1().unwrap_or(f64::NAN);
            Some(lyapunov_h(self.problem, &after.x, &after.m, &after.v, sigma, tau1, self.config.epsilon)?)
        } else {
            None
        };
        let y: Vec<f64> = after.m.iter().map(|m| -m / sigma).collect();
        self.rows.push(TraceRow {
            k: after.k,
            t: self.t,
            objective: self.problem.regularized_objective(&after.x, sigma)?,
            residual: residual(after, sigma),
            bound: None,
            dist_xy: dist(&after.x, &y),
            lyapunov,
            gap: None,
            eta: rec.eta,
            theta: rec.theta,
            beta: rec.beta,
            x: after.x.to_vec(),
            m: after.m.to_vec(),
        });
        Ok(())
    }

    pub fn finish(mut self) -> Result<Trace> {
        let cfg = self.config;
        let sigma = cfg.sigma;
        let (m_f, m_xi) = crate::engine::oracle_bounds(self.problem, cfg.oracle);
        let (cert_eps, cert_mv) = bound_certificate(&self.scheme, m_f, m_xi);
        let decoupled = self.decoupled();
        let mut eps_v = if cert_eps > 0.0 && cert_eps.is_finite() { cert_eps } else { f64::INFINITY };
        let mut m_v = if cert_mv.is_finite() { cert_mv } else { 0.0 };
        eps_v = eps_v.min(self.h_min);
        m_v = m_v.max(self.h_max);
        if self.rows.is_empty() || !decoupled {
            eps_v = f64::NAN;
            m_v = f64::NAN;
        }

        let mut constants = None;
        let mut bound_violations = 0;
        if decoupled && !self.rows.is_empty() {
            let eta_tilde = BoundConstants::contraction(self.rows.iter().map(|r| r.eta), sigma, eps_v, m_v);
            let c = BoundConstants { sigma, m_x: self.m_x, m_d: self.m_d, eta_tilde };
            if c.is_usable() {
                let thetas: Vec<f64> = self.rows.iter().map(|r| r.theta).collect();
                for (row, b) in self.rows.iter_mut().zip(bound_series(&c, &thetas)) {
                    row.bound = Some(b);
                    if row.residual > b * (1.0 + BOUND_SLACK) {
                        bound_violations += 1;
                    }
                }
                constants = Some(c);
            }
        }

        let mut q = None;
        let mut q_violations = 0;
        if let (Some(growth), true) = (self.problem.growth(), decoupled && eps_v > 0.0) {
            let lead = (2.0 * m_v * self.l_hat / (eps_v * sigma)).powf(1.0 / (1.0 - growth.nu));
            let mom = m_v * self.initial.m.norm() / (eps_v * sigma);
            let qv = lead.max(mom).max(self.initial.x.norm() + 1.0);
            q_violations = self.rows.iter().filter(|r| norm(&r.x) > qv).count();
            q = Some(qv);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(2);
        if cfg.gap_every > 0 {
            for row in self.rows.iter_mut().filter(|r| r.k % cfg.gap_every == 0) {
                let delta = row.bound.map_or(0.0, |b| b * (1.0 + sigma) / sigma + f64::EPSILON);
                let g = stationarity_gap_estimate(self.problem, &row.x, delta, sigma, GAP_SAMPLES, &mut rng)?;
                row.gap = Some(g.value);
            }
        }

        let final_x = self.rows.last().map_or(self.initial.x.to_vec(), |r| r.x.clone());
        let final_gap = stationarity_gap_estimate(self.problem, &final_x, 0.0, sigma, 0, &mut rng)?;
        let residuals: Vec<f64> = self.rows.iter().map(|r| r.residual).collect();
        let summary = RunSummary {
            final_objective: self.problem.regularized_objective(&final_x, sigma)?,
            final_residual: residuals.last().copied().unwrap_or_else(|| residual(&self.initial, sigma)),
            residual_slope: loglog_slope(&residuals, 0.3).ok(),
            bound_checked: constants.is_some(),
            bound_violations,
            shadow_checked: decoupled,
            shadow_failures: self.shadow_failures,
            q,
            q_violations,
            final_gap,
            lipschitz_certified: self.problem.lipschitz_bound().certified,
            h_range: (self.h_min, self.h_max),
        };
        Ok(Trace {
            mode: cfg.stepper.id().to_string(),
            dim: self.problem.dim(),
            sigma,
            initial: self.initial,
            rows: self.rows,
            constants,
            h_bracket: (eps_v, m_v),
            summary,
        })
    }
}
