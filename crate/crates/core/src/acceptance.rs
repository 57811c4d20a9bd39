//! End-to-end acceptance checks. Each check runs small experiments and
//! compares against an independent oracle or a fixed tolerance.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{InitMomentum, InitPoint, OracleMode, RunConfig, StepperKind};
use crate::diagnostics::{interpolate, loglog_slope, shadow_step_check, stationarity_gap, PathFn};
use crate::disim::{brute_force_stationary, integrate_di_sgd, path_distance, SearchBox};
use crate::engine::{
    adam_coupled_step, adamw_step, afmdw_step, run_problem, run_with, single_timescale_step, StepRecord,
};
use crate::error::Result;
use crate::estimators::{bound_certificate, precondition, update_estimator, EstimatorKind, EstimatorScheme};
use crate::oracle::{ad_backward, finite_difference_grad, mlp, Problem, ProblemSpec, ReluMlp};
use crate::param::{dist, norm, OptimizerState, ParamVector};
use crate::schedule::StepsizeSchedule;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<26} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

/// Every check, in order.
pub const CRITERIA: [(u32, &str, Check); 10] = [
    (1, "residual bound", residual_bound),
    (2, "shadow identity", shadow_identity),
    (3, "decay-rate slope", decay_slope),
    (4, "stationarity", stationarity),
    (5, "certificates", certificates),
    (6, "boundedness constant", boundedness),
    (7, "lyapunov settling", lyapunov_settling),
    (8, "di tracking", di_tracking),
    (9, "ad correctness", ad_correctness),
    (10, "golden steps", golden_steps),
];

pub fn run_criterion(id: u32) -> Option<CriterionResult> {
    let (id, name, check) = *CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let (passed, detail) = match check() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Some(CriterionResult { id, name, passed, detail, elapsed: start.elapsed() })
}

pub fn run_all() -> Vec<CriterionResult> {
    CRITERIA.iter().filter_map(|c| run_criterion(c.0)).collect()
}

// ---------------------------------------------------------------- suite

/// Problems of the decoupled suite.
pub fn suite_problems() -> Vec<Problem> {
    vec![Problem::abs1d(), Problem::l1quad(1, &[-1.0, 1.0]).expect("valid instance"), Problem::maxpiece2d()]
}

pub fn suite_config(kind: EstimatorKind, seed: u64) -> RunConfig {
    RunConfig {
        stepper: StepperKind::Afmdw,
        estimator: kind,
        sigma: 0.1,
        epsilon: 0.1,
        eta: StepsizeSchedule::Constant(0.5),
        theta: StepsizeSchedule::Power { theta0: 0.1, gamma: 0.6 },
        beta: StepsizeSchedule::Constant(0.01),
        max_iters: 10_000,
        seed,
        gap_every: 0,
        ..RunConfig::default()
    }
}

struct SuiteStats {
    runs: usize,
    steps: usize,
    bound_violations: usize,
    unchecked: usize,
    shadow_checked: usize,
    shadow_failures: usize,
    q_violations: usize,
    q_missing: usize,
    elapsed: Duration,
}

fn run_suite() -> Result<SuiteStats> {
    let start = Instant::now();
    let mut s = SuiteStats {
        runs: 0,
        steps: 0,
        bound_violations: 0,
        unchecked: 0,
        shadow_checked: 0,
        shadow_failures: 0,
        q_violations: 0,
        q_missing: 0,
        elapsed: Duration::ZERO,
    };
    for problem in suite_problems() {
        for kind in EstimatorKind::FRAMEWORK {
            for seed in 0..3 {
                let cfg = suite_config(kind, seed);
                let mut shadow_failures = 0;
                let out = run_with(&cfg, &problem, |rec| {
                    if !shadow_step_check(rec, cfg.sigma) {
                        shadow_failures += 1;
                    }
                })?;
                let sum = &out.trace.summary;
                s.runs += 1;
                s.steps += out.trace.rows.len();
                s.shadow_checked += out.trace.rows.len();
                s.shadow_failures += shadow_failures;
                s.bound_violations += sum.bound_violations;
                s.unchecked += usize::from(!sum.bound_checked);
                s.q_violations += sum.q_violations;
                s.q_missing += usize::from(sum.q.is_none());
            }
        }
    }
    s.elapsed = start.elapsed();
    Ok(s)
}

fn residual_bound() -> Result<(bool, String)> {
    let s = run_suite()?;
    let ok = s.bound_violations == 0 && s.unchecked == 0 && s.elapsed < Duration::from_secs(60);
    Ok((
        ok,
        format!(
            "{} runs, {} steps, {} violations, {} runs without a usable bound, {:.1}s",
            s.runs,
            s.steps,
            s.bound_violations,
            s.unchecked,
            s.elapsed.as_secs_f64()
        ),
    ))
}

fn boundedness() -> Result<(bool, String)> {
    let s = run_suite()?;
    let ok = s.q_violations == 0 && s.q_missing == 0;
    Ok((ok, format!("{} runs, {} iterates above Q, {} runs without Q", s.runs, s.q_violations, s.q_missing)))
}

fn state1(x: f64, m: f64, v: f64) -> OptimizerState {
    OptimizerState::new(
        ParamVector::new(vec![x]).expect("finite"),
        ParamVector::new(vec![m]).expect("finite"),
        ParamVector::new(vec![v]).expect("finite"),
    )
    .expect("same dims")
}

/// A single coupled-Adam step whose shadow identity must fail.
pub fn coupled_counterexample() -> Result<StepRecord> {
    let before = state1(1.0, 0.0, 0.0);
    let after = adam_coupled_step(&before, &[2.0], 0.1, 0.5, 0.5, 0.1, 1e-8)?;
    Ok(StepRecord {
        k: 0,
        stepper: StepperKind::AdamCoupled,
        g: ParamVector::new(vec![2.0])?,
        index: Some(0),
        eta: 0.1,
        theta: 0.5,
        beta: 0.5,
        before,
        after,
    })
}

fn shadow_identity() -> Result<(bool, String)> {
    let s = run_suite()?;
    let counter = shadow_step_check(&coupled_counterexample()?, 0.1);
    let ok = s.shadow_failures == 0 && !counter;
    Ok((
        ok,
        format!(
            "{} failures over {} steps; coupled counterexample {}",
            s.shadow_failures,
            s.shadow_checked,
            if counter { "passed (wrong)" } else { "rejected" }
        ),
    ))
}

// ---------------------------------------------------------------- rates

pub const SLOPE_GAMMAS: [f64; 3] = [0.5, 0.8, 1.0];
pub const SLOPE_TOL: f64 = 0.15;

pub fn slope_config(gamma: f64) -> RunConfig {
    RunConfig {
        stepper: StepperKind::AdamD,
        estimator: EstimatorKind::Adam,
        sigma: 0.1,
        epsilon: 0.1,
        eta: StepsizeSchedule::Constant(1.0),
        theta: StepsizeSchedule::Power { theta0: 0.1, gamma },
        beta: StepsizeSchedule::Constant(1e-4),
        max_iters: 100_000,
        seed: 0,
        x0: InitPoint::Fixed(vec![1.0]),
        oracle: OracleMode::Full,
        gap_every: 0,
        ..RunConfig::default()
    }
}

fn decay_slope() -> Result<(bool, String)> {
    let start = Instant::now();
    let problem = Problem::abs1d();
    let mut slopes = Vec::new();
    for gamma in SLOPE_GAMMAS {
        let out = run_problem(&slope_config(gamma), &problem)?;
        slopes.push(loglog_slope(&out.trace.residuals(), 0.3)?);
    }
    let within = SLOPE_GAMMAS.iter().zip(&slopes).all(|(g, s)| (s + g).abs() <= SLOPE_TOL);
    let ordered = slopes.windows(2).all(|w| w[1] < w[0]);
    let fast = start.elapsed() < Duration::from_secs(30);
    let list: Vec<String> = SLOPE_GAMMAS.iter().zip(&slopes).map(|(g, s)| format!("gamma {g}: {s:.3}")).collect();
    Ok((within && ordered && fast, format!("{}; ordered {ordered}", list.join(", "))))
}

// ---------------------------------------------------------------- stationarity

pub const STATIONARY_TOL: f64 = 1e-2;

/// Problems of the stationarity check with their search boxes.
pub fn stationarity_problems() -> Vec<(Problem, SearchBox)> {
    vec![
        (Problem::abs1d(), SearchBox::cube(1, 5.0)),
        (Problem::l1quad(1, &[-1.0, 0.0, 1.0]).expect("valid instance"), SearchBox::cube(1, 5.0)),
    ]
}

pub fn stationarity_config(seed: u64) -> RunConfig {
    RunConfig {
        stepper: StepperKind::AdamD,
        estimator: EstimatorKind::Adam,
        sigma: 0.1,
        epsilon: 0.1,
        eta: StepsizeSchedule::Constant(0.5),
        theta: StepsizeSchedule::Power { theta0: 0.1, gamma: 0.9 },
        beta: StepsizeSchedule::Constant(1e-4),
        max_iters: 100_000,
        seed,
        gap_every: 0,
        ..RunConfig::default()
    }
}

fn stationarity() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (problem, search) in stationarity_problems() {
        let set = brute_force_stationary(&problem, &search, 0.1, 0.01)?;
        let mut local: f64 = 0.0;
        for seed in 0..5 {
            let out = run_problem(&stationarity_config(seed), &problem)?;
            local = local.max(set.distance(out.trace.final_x())?);
        }
        parts.push(format!("{}: max dist {local:.2e}", problem.id()));
        worst = worst.max(local);
    }
    Ok((worst <= STATIONARY_TOL, parts.join(", ")))
}

// ---------------------------------------------------------------- certificates

pub const STREAM_LEN: usize = 100_000;

/// Draws `STREAM_LEN` gradients with `|g_i| <= bound` and counts the
/// coordinates where `H(v_k)` leaves the certificate.
pub fn certificate_violations(kind: EstimatorKind, bound: f64, seed: u64) -> Result<(usize, f64, f64)> {
    let dim = 3;
    let scheme = EstimatorScheme::new(kind, 0.1, 0.1)?;
    let (eps_v, m_v) = bound_certificate(&scheme, bound, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = scheme.default_v0(dim);
    let mut m = ParamVector::zeros(dim);
    let mut violations = 0;
    for k in 0..STREAM_LEN {
        // mix of uniform draws and extreme values to probe the edges
        let g: Vec<f64> = (0..dim)
            .map(|_| match rng.gen_range(0..4) {
                0 => bound * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                1 => 0.0,
                _ => rng.gen_range(-bound..=bound),
            })
            .collect();
        m = m.zip_map(&ParamVector::new(g.clone())?, |mi, gi| 0.9 * mi + 0.1 * gi)?;
        v = update_estimator(&scheme, &v, &g, &m, k as u64)?;
        let h = precondition(&scheme, &v)?;
        violations += h.iter().filter(|&&hi| !(eps_v <= hi && hi <= m_v)).count();
    }
    Ok((violations, eps_v, m_v))
}

fn certificates() -> Result<(bool, String)> {
    let mut total = 0;
    let mut bad = Vec::new();
    let kinds = EstimatorKind::FRAMEWORK.iter().copied().chain([EstimatorKind::SingleTimescale]);
    for (i, kind) in kinds.enumerate() {
        for bound in [0.5, 1.0, 3.0] {
            let (viol, _, _) = certificate_violations(kind, bound, i as u64)?;
            total += viol;
            if viol > 0 {
                bad.push(format!("{kind}@{bound}: {viol}"));
            }
        }
    }
    let detail = if bad.is_empty() {
        format!("9 kinds x 3 bounds x {STREAM_LEN} steps, 0 violations")
    } else {
        format!("{total} violations ({})", bad.join(", "))
    };
    Ok((total == 0, detail))
}

// ---------------------------------------------------------------- lyapunov

pub const SETTLE_K0: usize = 20_000;
pub const SETTLE_TOL: f64 = 1e-8;
pub const SETTLE_GAP: f64 = 1e-3;

pub fn lyapunov_config() -> RunConfig {
    let eta = StepsizeSchedule::Power { theta0: 0.5, gamma: 0.6 };
    RunConfig {
        problem: ProblemSpec { id: "quadratic".into(), dim: 2, ..ProblemSpec::default() },
        stepper: StepperKind::SingleTimescale,
        estimator: EstimatorKind::SingleTimescale,
        sigma: 0.1,
        epsilon: 0.01,
        theta: StepsizeSchedule::LinearMultiple { tau: 1.0, base: Box::new(eta.clone()) },
        beta: StepsizeSchedule::LinearMultiple { tau: 4.0, base: Box::new(eta.clone()) },
        eta,
        max_iters: 100_000,
        x0: InitPoint::Fixed(vec![1.0, -0.5]),
        oracle: OracleMode::Full,
        gap_every: 0,
        ..RunConfig::default()
    }
}

fn lyapunov_settling() -> Result<(bool, String)> {
    let cfg = lyapunov_config();
    let problem = Problem::Quadratic { dim: 2 };
    let out = run_problem(&cfg, &problem)?;
    let h: Vec<f64> = out.trace.rows.iter().map(|r| r.lyapunov.unwrap_or(f64::NAN)).collect();
    let worst_jump = h[SETTLE_K0..].windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let gap = stationarity_gap(&problem, out.trace.final_x(), 0.0, cfg.sigma)?;
    let ok = worst_jump < SETTLE_TOL && gap < SETTLE_GAP;
    Ok((ok, format!("max |h_k - h_(k-1)| beyond k = {SETTLE_K0}: {worst_jump:.2e}; final gap {gap:.2e}")))
}

// ---------------------------------------------------------------- tracking

pub const TRACK_THETAS: [f64; 3] = [0.1, 0.05, 0.025];
pub const TRACK_T: f64 = 2.0;
pub const TRACK_DT: f64 = 1e-4;

pub fn tracking_config(theta0: f64) -> RunConfig {
    let sigma = 1.0;
    RunConfig {
        stepper: StepperKind::AdamD,
        estimator: EstimatorKind::Adam,
        sigma,
        epsilon: 0.1,
        eta: StepsizeSchedule::Constant(0.1),
        theta: StepsizeSchedule::Constant(theta0),
        beta: StepsizeSchedule::Constant(1e-4),
        max_iters: (TRACK_T * sigma / theta0).ceil() as u64 + 1,
        x0: InitPoint::Fixed(vec![1.0]),
        init_momentum: InitMomentum::Aligned,
        oracle: OracleMode::Full,
        // a constant theta does not satisfy the asymptotic hypotheses
        strict: false,
        gap_every: 0,
        ..RunConfig::default()
    }
}

/// The shadow sequence `y = -m / sigma` on the clock `sum theta_i / sigma`.
pub fn shadow_path(cfg: &RunConfig, problem: &Problem) -> Result<PathFn> {
    let out = run_problem(cfg, problem)?;
    let mut ys = vec![out.trace.initial.m.iter().map(|m| -m / cfg.sigma).collect::<Vec<_>>()];
    ys.extend(out.trace.rows.iter().map(|r| r.m.iter().map(|m| -m / cfg.sigma).collect::<Vec<_>>()));
    let steps: Vec<f64> = out.trace.rows.iter().map(|r| r.theta / cfg.sigma).collect();
    interpolate(&ys, &steps)
}

pub fn tracking_distances() -> Result<Vec<f64>> {
    let problem = Problem::abs1d();
    let mut out = Vec::new();
    for theta0 in TRACK_THETAS {
        let cfg = tracking_config(theta0);
        let w = shadow_path(&cfg, &problem)?;
        let y0 = w.eval(0.0)?;
        let di = integrate_di_sgd(&problem, &y0, cfg.sigma, TRACK_DT, TRACK_T)?;
        out.push(path_distance(&w, &di, TRACK_T)?);
    }
    Ok(out)
}

fn di_tracking() -> Result<(bool, String)> {
    let d = tracking_distances()?;
    let ok = d.windows(2).all(|w| w[1] < w[0]);
    let list: Vec<String> = TRACK_THETAS.iter().zip(&d).map(|(t, d)| format!("theta0 {t}: {d:.4}")).collect();
    Ok((ok, list.join(", ")))
}

// ---------------------------------------------------------------- autodiff

pub const AD_POINTS: usize = 100;
pub const AD_TOL: f64 = 1e-6;

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    dist(a, b) / norm(b).max(1e-12)
}

/// Largest relative error of reverse mode against central differences
/// over random points away from every kink.
pub fn ad_vs_fd(seed: u64) -> Result<f64> {
    let net = ReluMlp::new(4, 8, seed)?;
    let graph = net.objective_graph()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < AD_POINTS {
        let x: Vec<f64> = (0..net.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let margin =
            (0..net.samples()).flat_map(|i| net.pre_activations(i, &x)).fold(f64::INFINITY, |a, z| a.min(z.abs()));
        if margin < 1e-3 {
            continue;
        }
        taken += 1;
        let ad = ad_backward(&graph, &x)?;
        let fd = finite_difference_grad(|p| graph.eval(p).expect("matching arity"), &x, 1e-6);
        worst = worst.max(relative_error(&ad, &fd));
    }
    Ok(worst)
}

/// Places one hidden unit exactly at its kink for sample 0 and checks that
/// the reverse-mode gradient lies in the coordinatewise hull of the
/// gradients just on either side.
pub fn kink_in_hull(seed: u64) -> Result<bool> {
    let net = ReluMlp::new(4, 8, seed)?;
    let graph = net.component_graph(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let unit = rng.gen_range(0..net.hidden());
    let mut x: Vec<f64> = (0..net.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let a = net.inputs()[0];
    let b1 = mlp::b1_index(net.hidden(), unit);
    x[b1] = -(x[mlp::w1_index(unit, 0)] * a[0] + x[mlp::w1_index(unit, 1)] * a[1]);
    // exact zero is not guaranteed after rounding; nudge until it is
    let z = net.pre_activations(0, &x)[unit];
    x[b1] -= z;
    if net.pre_activations(0, &x)[unit] != 0.0 {
        return Ok(true);
    }
    let h = 1e-9;
    let mut lo_x = x.clone();
    lo_x[b1] -= h;
    let mut hi_x = x.clone();
    hi_x[b1] += h;
    let at = ad_backward(graph, &x)?;
    let left = ad_backward(graph, &lo_x)?;
    let right = ad_backward(graph, &hi_x)?;
    let slack = 1e-7;
    Ok(at.iter().zip(left.iter()).zip(right.iter()).all(|((&g, &l), &r)| {
        let scale = 1.0 + l.abs().max(r.abs());
        g >= l.min(r) - slack * scale && g <= l.max(r) + slack * scale
    }))
}

fn ad_correctness() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        worst = worst.max(ad_vs_fd(seed)?);
    }
    let mut hull_fail = 0;
    for seed in 0..20 {
        hull_fail += usize::from(!kink_in_hull(seed)?);
    }
    let ok = worst < AD_TOL && hull_fail == 0;
    Ok((ok, format!("max rel err {worst:.2e} over {} points; {hull_fail}/20 kinks outside hull", 3 * AD_POINTS)))
}

// ---------------------------------------------------------------- golden

pub const GOLDEN_TOL: f64 = 1e-12;

/// `(name, computed, expected)` for the hand-stepped examples; expected
/// values are recomputed here from the update formulas written out inline.
pub fn golden_values() -> Result<Vec<(&'static str, f64, f64)>> {
    let s = state1(1.0, 0.0, 0.0);
    let sgdw = EstimatorScheme::new(EstimatorKind::Sgdw, 0.5, 1e-8)?;
    let a = afmdw_step(&s, &[2.0], 0.1, 0.5, 0.5, &sgdw, 0.1)?;
    let st = single_timescale_step(&s, &[2.0], 0.1, 1.0, 4.0, 0.1, 0.01)?;
    let c = adam_coupled_step(&s, &[2.0], 0.1, 0.5, 0.5, 0.1, 1e-8)?;
    let w = adamw_step(&s, &[2.0], 0.1, 0.5, 0.5, 0.1, 1e-8)?;
    Ok(vec![
        ("afmdw x", a.x[0], 1.0 - 0.1 * (1.0 + 0.1)),
        ("afmdw m", a.m[0], 1.0),
        ("st m", st.m[0], 0.2),
        ("st v", st.v[0], 1.6),
        ("st x", st.x[0], 1.0 - 0.1 * (0.2 + 0.1) / 1.61f64.sqrt()),
        ("coupled m", c.m[0], 1.05),
        ("coupled v", c.v[0], 2.205),
        ("coupled x", c.x[0], 1.0 - 0.1 * 1.05 / (2.205f64.sqrt() + 1e-8)),
        ("adamw m", w.m[0], 1.0),
        ("adamw v", w.v[0], 2.0),
        ("adamw x", w.x[0], 1.0 - 0.1 / (2f64.sqrt() + 1e-8) - 0.01),
    ])
}

fn golden_steps() -> Result<(bool, String)> {
    let values = golden_values()?;
    let bad: Vec<String> = values
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > GOLDEN_TOL)
        .map(|(n, got, want)| format!("{n}: {got} vs {want}"))
        .collect();
    let detail = if bad.is_empty() { format!("{} values within {GOLDEN_TOL:e}", values.len()) } else { bad.join("; ") };
    Ok((bad.is_empty(), detail))
}
