//! Steppers and the run loop.
//!
//! Every stepper updates in the order momentum, estimator, iterate: the
//! estimator sees the new momentum and the iterate sees both.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{validate_config, InitMomentum, InitPoint, OracleMode, RunConfig, StepperKind, ValidationReport};
use crate::diagnostics::{Trace, TraceBuilder};
use crate::error::{check_dim, Error, Result};
use crate::estimators::{precondition, update_estimator, EstimatorKind, EstimatorScheme};
use crate::oracle::{full_subgradient, sample_subgradient, Problem};
use crate::param::{OptimizerState, ParamVector};

/// One step of the decoupled framework:
/// `m' = (1-theta) m + theta g`, `v' = U(v, g, m')`,
/// `x' = x - eta H(v') (m' + sigma x)`.
pub fn afmdw_step(
    state: &OptimizerState,
    g: &[f64],
    eta: f64,
    theta: f64,
    beta: f64,
    scheme: &EstimatorScheme,
    sigma: f64,
) -> Result<OptimizerState> {
    check_dim(state.dim(), g.len())?;
    let m = momentum(&state.m, g, theta);
    let scheme = EstimatorScheme { beta1: beta, ..*scheme };
    let v = update_estimator(&scheme, &state.v, g, &m, state.k)?;
    let h = precondition(&scheme, &v)?;
    let x = state
        .x
        .iter()
        .zip(h.iter())
        .zip(m.iter())
        .map(|((&xi, &hi), &mi)| xi - eta * (hi * (mi + sigma * xi)))
        .collect();
    Ok(OptimizerState { x: ParamVector::from_raw(x), m, v, k: state.k + 1 })
}

fn momentum(m: &ParamVector, g: &[f64], theta: f64) -> ParamVector {
    ParamVector::from_raw(m.iter().zip(g).map(|(&mi, &gi)| (1.0 - theta) * mi + theta * gi).collect())
}

/// Single-timescale step with `theta = tau1 eta`, `v' = v - tau2 eta (v - g^2)`
/// and `H(v) = (max(v, 0) + eps)^{-1/2}`.
pub fn single_timescale_step(
    state: &OptimizerState,
    g: &[f64],
    eta: f64,
    tau1: f64,
    tau2: f64,
    sigma: f64,
    epsilon: f64,
) -> Result<OptimizerState> {
    let scheme = EstimatorScheme {
        kind: EstimatorKind::SingleTimescale,
        beta1: tau2 * eta,
        epsilon,
        clamp: crate::estimators::Clamp { lower: 0.1, upper: 10.0 },
        literal_adabound: false,
    };
    afmdw_step(state, g, eta, tau1 * eta, tau2 * eta, &scheme, sigma)
}

/// Adam with the weight decay added to the gradient before both moment updates.
pub fn adam_coupled_step(
    state: &OptimizerState,
    g: &[f64],
    eta: f64,
    theta: f64,
    beta: f64,
    sigma: f64,
    epsilon: f64,
) -> Result<OptimizerState> {
    check_dim(state.dim(), g.len())?;
    let gc: Vec<f64> = g.iter().zip(state.x.iter()).map(|(&gi, &xi)| gi + sigma * xi).collect();
    let m = momentum(&state.m, &gc, theta);
    let v: Vec<f64> = state.v.iter().zip(&gc).map(|(&vi, &gi)| (1.0 - beta) * vi + beta * gi * gi).collect();
    let x = state
        .x
        .iter()
        .zip(&v)
        .zip(m.iter())
        .map(|((&xi, &vi), &mi)| xi - eta * ((1.0 / (vi.sqrt() + epsilon)) * mi))
        .collect();
    Ok(OptimizerState { x: ParamVector::from_raw(x), m, v: ParamVector::from_raw(v), k: state.k + 1 })
}

/// AdamW: the decay term `eta sigma x` is not preconditioned.
pub fn adamw_step(
    state: &OptimizerState,
    g: &[f64],
    eta: f64,
    theta: f64,
    rho: f64,
    sigma: f64,
    epsilon: f64,
) -> Result<OptimizerState> {
    check_dim(state.dim(), g.len())?;
    let m = momentum(&state.m, g, theta);
    let v: Vec<f64> = state.v.iter().zip(g).map(|(&vi, &gi)| (1.0 - rho) * vi + rho * gi * gi).collect();
    let x = state
        .x
        .iter()
        .zip(&v)
        .zip(m.iter())
        .map(|((&xi, &vi), &mi)| xi - eta * ((1.0 / (vi.sqrt() + epsilon)) * mi) - eta * sigma * xi)
        .collect();
    Ok(OptimizerState { x: ParamVector::from_raw(x), m, v: ParamVector::from_raw(v), k: state.k + 1 })
}

/// Everything needed to replay one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    pub stepper: StepperKind,
    pub g: ParamVector,
    /// Sampled component, or `None` for a full-gradient step.
    pub index: Option<usize>,
    pub eta: f64,
    pub theta: f64,
    pub beta: f64,
    pub before: OptimizerState,
    pub after: OptimizerState,
}

/// Applies the configured stepper to `state` with explicit stepsizes.
pub fn apply_stepper(
    config: &RunConfig,
    scheme: &EstimatorScheme,
    state: &OptimizerState,
    g: &[f64],
    eta: f64,
    theta: f64,
    beta: f64,
) -> Result<OptimizerState> {
    let sigma = config.sigma;
    match config.stepper {
        StepperKind::Afmdw | StepperKind::AdamD => afmdw_step(state, g, eta, theta, beta, scheme, sigma),
        StepperKind::SingleTimescale => {
            let (t1, t2) = (config.tau1().unwrap_or(f64::NAN), config.tau2().unwrap_or(f64::NAN));
            single_timescale_step(state, g, eta, t1, t2, sigma, config.epsilon)
        }
        StepperKind::AdamCoupled => adam_coupled_step(state, g, eta, theta, beta, sigma, config.epsilon),
        StepperKind::AdamW => adamw_step(state, g, eta, theta, beta, sigma, config.epsilon),
    }
}

/// Recomputes `record.after` from `record.before` and the recorded inputs.
pub fn replay(config: &RunConfig, record: &StepRecord) -> Result<OptimizerState> {
    let scheme = config.scheme()?;
    apply_stepper(config, &scheme, &record.before, &record.g, record.eta, record.theta, record.beta)
}

/// `(x_0, m_0, v_0)` for a run: `x_0` from the config (or uniform in
/// `[-1, 1]^n` from its own stream of the run seed), `m_0` zero or
/// `-sigma x_0`, and the estimator's default `v_0`.
pub fn initial_state(config: &RunConfig, problem: &Problem) -> Result<OptimizerState> {
    let n = problem.dim();
    let x = match &config.x0 {
        InitPoint::Fixed(x) => {
            check_dim(n, x.len())?;
            ParamVector::new(x.clone())?
        }
        InitPoint::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(1);
            ParamVector::new((0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())?
        }
    };
    let m = match config.init_momentum {
        InitMomentum::Zero => ParamVector::zeros(n),
        InitMomentum::Aligned => x.map(|xi| -config.sigma * xi),
    };
    let v = config.scheme()?.default_v0(n);
    OptimizerState::new(x, m, v)
}

/// Oracle bounds `(M_f, M_xi)` used by validation.
pub fn oracle_bounds(problem: &Problem, mode: OracleMode) -> (f64, f64) {
    let m_f = problem.lipschitz_bound().value;
    match mode {
        OracleMode::Stochastic => (m_f, problem.noise_bound()),
        OracleMode::Full => (m_f, 0.0),
    }
}

/// Drives one configured run step by step.
pub struct Runner<'a> {
    config: &'a RunConfig,
    problem: &'a Problem,
    scheme: EstimatorScheme,
    rng: ChaCha8Rng,
    state: OptimizerState,
    report: ValidationReport,
}

impl<'a> Runner<'a> {
    /// Validates the configuration; in strict mode a violated hypothesis
    /// is an error.
    pub fn new(config: &'a RunConfig, problem: &'a Problem) -> Result<Self> {
        config.check()?;
        let report = validate_config(config, oracle_bounds(problem, config.oracle));
        if config.strict && !report.passed() {
            let names: Vec<String> = report.violations().map(|i| format!("{} ({})", i.condition, i.detail)).collect();
            return Err(Error::ConfigViolation(names.join("; ")));
        }
        let state = initial_state(config, problem)?;
        Ok(Self {
            config,
            problem,
            scheme: config.scheme()?,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            state,
            report,
        })
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn scheme(&self) -> &EstimatorScheme {
        &self.scheme
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let k = self.state.k;
        let (g, index) = match self.config.oracle {
            OracleMode::Stochastic => {
                let s = sample_subgradient(self.problem, &self.state.x, &mut self.rng)?;
                (s.g, Some(s.index))
            }
            OracleMode::Full => (full_subgradient(self.problem, &self.state.x)?, None),
        };
        let eta = self.config.eta.eval(k);
        let theta = self.config.theta.eval(k);
        let beta = self.config.beta.eval(k);
        let after = apply_stepper(self.config, &self.scheme, &self.state, &g, eta, theta, beta)?;
        if !after.is_finite() {
            return Err(Error::NonFinite(format!("state after step {k}")));
        }
        let before = std::mem::replace(&mut self.state, after.clone());
        Ok(StepRecord { k, stepper: self.config.stepper, g, index, eta, theta, beta, before, after })
    }
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub report: ValidationReport,
    pub final_state: OptimizerState,
}

/// Builds the configured problem and runs it.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let problem = Problem::from_spec(&config.problem, config.seed)?;
    run_problem(config, &problem)
}

/// Runs `config.max_iters` steps on `problem`, recording the trace.
pub fn run_problem(config: &RunConfig, problem: &Problem) -> Result<RunOutput> {
    run_with(config, problem, |_| {})
}

/// As [`run_problem`], handing every step record to `on_record`.
pub fn run_with(config: &RunConfig, problem: &Problem, mut on_record: impl FnMut(&StepRecord)) -> Result<RunOutput> {
    let mut runner = Runner::new(config, problem)?;
    let mut builder = TraceBuilder::new(config, problem, *runner.scheme(), runner.state().clone());
    for _ in 0..config.max_iters {
        let rec = runner.step()?;
        builder.push(&rec)?;
        on_record(&rec);
    }
    Ok(RunOutput { trace: builder.finish()?, report: runner.report.clone(), final_state: runner.state })
}

/// Runs the AdamD method: the Adam estimator with a constant `eta`.
pub fn adamd_run(config: &RunConfig) -> Result<Trace> {
    if config.stepper != StepperKind::AdamD {
        return Err(Error::ConfigViolation(format!("adamd_run needs stepper = adamd, got {}", config.stepper)));
    }
    Ok(run(config)?.trace)
}
