//! Run configuration: an INI-style text format, `section.key=value`
//! overrides, and the hypothesis report checked before a run.
//!
//! ```text
//! [problem]
//! id = abs1d
//! [optimizer]
//! stepper = adamd
//! sigma = 0.1
//! [schedules]
//! eta = constant(0.5)
//! theta = power(0.1, 0.6)
//! ```
//!
//! Every key has a default (see [`RunConfig::default`]); unknown sections
//! and keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::{bound_certificate, Clamp, EstimatorKind, EstimatorScheme};
use crate::oracle::ProblemSpec;
use crate::schedule::{parse_schedule_with_base, StepsizeSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepperKind {
    /// Generic decoupled stepper with any of the eight framework estimators.
    Afmdw,
    /// Adam estimator, constant `eta`, `eta <= 1/(sigma eps)`.
    AdamD,
    /// Single-timescale variant: `theta = tau1 eta`, `beta = tau2 eta`.
    SingleTimescale,
    /// Weight decay folded into the gradient before both moment updates.
    AdamCoupled,
    /// Unpreconditioned decay term `- eta sigma x`.
    AdamW,
}

impl StepperKind {
    pub fn id(self) -> &'static str {
        match self {
            Self::Afmdw => "afmdw",
            Self::AdamD => "adamd",
            Self::SingleTimescale => "st",
            Self::AdamCoupled => "adam-coupled",
            Self::AdamW => "adamw",
        }
    }

    /// Steppers whose momentum sees only raw subgradients, so that
    /// `y = -m / sigma` follows an exact SGD recursion.
    pub fn is_decoupled(self) -> bool {
        matches!(self, Self::Afmdw | Self::AdamD | Self::SingleTimescale)
    }
}

impl fmt::Display for StepperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for StepperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "afmdw" => Self::Afmdw,
            "adamd" => Self::AdamD,
            "st" => Self::SingleTimescale,
            "adam-coupled" => Self::AdamCoupled,
            "adamw" => Self::AdamW,
            other => return Err(Error::InvalidParameter(format!("unknown stepper `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitPoint {
    /// Uniform in `[-1, 1]^n`, drawn from the run seed.
    Random,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMomentum {
    Zero,
    /// `m_0 = -sigma x_0`, which makes the residual vanish at the start.
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// One uniformly drawn component per step.
    Stochastic,
    /// The averaged subgradient over all components (no noise).
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub stepper: StepperKind,
    pub estimator: EstimatorKind,
    pub sigma: f64,
    pub epsilon: f64,
    pub clamp: Clamp,
    pub literal_adabound: bool,
    pub eta: StepsizeSchedule,
    pub theta: StepsizeSchedule,
    /// Estimator stepsize; `rho` for AdamW.
    pub beta: StepsizeSchedule,
    pub max_iters: u64,
    pub seed: u64,
    pub x0: InitPoint,
    pub init_momentum: InitMomentum,
    pub oracle: OracleMode,
    /// Refuse to run when a hypothesis check fails.
    pub strict: bool,
    /// Stationarity gap sampling period; 0 disables it.
    pub gap_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::default(),
            stepper: StepperKind::AdamD,
            estimator: EstimatorKind::Adam,
            sigma: 0.1,
            epsilon: 0.1,
            clamp: Clamp { lower: 0.1, upper: 10.0 },
            literal_adabound: false,
            eta: StepsizeSchedule::Constant(0.5),
            theta: StepsizeSchedule::Power { theta0: 0.1, gamma: 0.6 },
            beta: StepsizeSchedule::Constant(1e-4),
            max_iters: 10_000,
            seed: 0,
            x0: InitPoint::Random,
            init_momentum: InitMomentum::Zero,
            oracle: OracleMode::Stochastic,
            strict: true,
            gap_every: 100,
        }
    }
}

const SECTIONS: [&str; 4] = ["problem", "optimizer", "schedules", "diagnostics"];

type Raw = BTreeMap<(String, String), String>;

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

impl RunConfig {
    fn to_raw(&self) -> Raw {
        let mut raw = Raw::new();
        let mut put = |s: &str, k: &str, v: String| {
            raw.insert((s.to_string(), k.to_string()), v);
        };
        put("problem", "id", self.problem.id.clone());
        put("problem", "dim", self.problem.dim.to_string());
        put("problem", "centers", join(&self.problem.centers));
        put("problem", "hidden", self.problem.hidden.to_string());
        put("problem", "samples", self.problem.samples.to_string());
        put("optimizer", "stepper", self.stepper.to_string());
        put("optimizer", "estimator", self.estimator.to_string());
        put("optimizer", "sigma", format!("{:?}", self.sigma));
        put("optimizer", "epsilon", format!("{:?}", self.epsilon));
        put("optimizer", "clamp", join(&[self.clamp.lower, self.clamp.upper]));
        put("optimizer", "literal_adabound", self.literal_adabound.to_string());
        put("optimizer", "max_iters", self.max_iters.to_string());
        put("optimizer", "seed", self.seed.to_string());
        put(
            "optimizer",
            "x0",
            match &self.x0 {
                InitPoint::Random => "random".into(),
                InitPoint::Fixed(x) => join(x),
            },
        );
        put(
            "optimizer",
            "init_momentum",
            match self.init_momentum {
                InitMomentum::Zero => "zero",
                InitMomentum::Aligned => "aligned",
            }
            .into(),
        );
        put(
            "optimizer",
            "oracle",
            match self.oracle {
                OracleMode::Stochastic => "stochastic",
                OracleMode::Full => "full",
            }
            .into(),
        );
        put("optimizer", "strict", self.strict.to_string());
        put("schedules", "eta", self.eta.to_string());
        put("schedules", "theta", self.theta.to_string());
        put("schedules", "beta", self.beta.to_string());
        put("diagnostics", "gap_every", self.gap_every.to_string());
        raw
    }

    fn from_raw(raw: &Raw) -> std::result::Result<Self, (String, String)> {
        let get = |s: &str, k: &str| raw[&(s.to_string(), k.to_string())].trim().to_string();
        let err = |k: &str, e: String| (k.to_string(), e);
        let num =
            |s: &str, k: &str| get(s, k).parse::<f64>().map_err(|_| err(k, format!("`{}` is not a number", get(s, k))));
        let int = |s: &str, k: &str| {
            get(s, k).parse::<u64>().map_err(|_| err(k, format!("`{}` is not a nonnegative integer", get(s, k))))
        };
        let boolean = |s: &str, k: &str| {
            get(s, k).parse::<bool>().map_err(|_| err(k, format!("`{}` is not true/false", get(s, k))))
        };

        let problem = ProblemSpec {
            id: get("problem", "id"),
            dim: int("problem", "dim")? as usize,
            centers: parse_list(&get("problem", "centers")).map_err(|e| err("centers", e))?,
            hidden: int("problem", "hidden")? as usize,
            samples: int("problem", "samples")? as usize,
        };
        let clamp = parse_list(&get("optimizer", "clamp")).map_err(|e| err("clamp", e))?;
        if clamp.len() != 2 {
            return Err(err("clamp", "expected two numbers `lower, upper`".into()));
        }
        let x0 = match get("optimizer", "x0").as_str() {
            "random" => InitPoint::Random,
            other => InitPoint::Fixed(parse_list(other).map_err(|e| err("x0", e))?),
        };
        let init_momentum = match get("optimizer", "init_momentum").as_str() {
            "zero" => InitMomentum::Zero,
            "aligned" => InitMomentum::Aligned,
            other => return Err(err("init_momentum", format!("expected zero|aligned, got `{other}`"))),
        };
        let oracle = match get("optimizer", "oracle").as_str() {
            "stochastic" => OracleMode::Stochastic,
            "full" => OracleMode::Full,
            other => return Err(err("oracle", format!("expected stochastic|full, got `{other}`"))),
        };
        let eta = parse_schedule_with_base(&get("schedules", "eta"), None).map_err(|e| err("eta", e.to_string()))?;
        let theta = parse_schedule_with_base(&get("schedules", "theta"), Some(&eta))
            .map_err(|e| err("theta", e.to_string()))?;
        let beta =
            parse_schedule_with_base(&get("schedules", "beta"), Some(&eta)).map_err(|e| err("beta", e.to_string()))?;
        Ok(Self {
            problem,
            stepper: get("optimizer", "stepper").parse().map_err(|e: Error| err("stepper", e.to_string()))?,
            estimator: get("optimizer", "estimator").parse().map_err(|e: Error| err("estimator", e.to_string()))?,
            sigma: num("optimizer", "sigma")?,
            epsilon: num("optimizer", "epsilon")?,
            clamp: Clamp { lower: clamp[0], upper: clamp[1] },
            literal_adabound: boolean("optimizer", "literal_adabound")?,
            eta,
            theta,
            beta,
            max_iters: int("optimizer", "max_iters")?,
            seed: int("optimizer", "seed")?,
            x0,
            init_momentum,
            oracle,
            strict: boolean("optimizer", "strict")?,
            gap_every: int("diagnostics", "gap_every")?,
        })
    }

    /// Parses the text format on top of the defaults, then applies
    /// `section.key=value` overrides in order.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut raw = Self::default().to_raw();
        let mut lines = BTreeMap::new();
        let mut section: Option<String> = None;
        for (no, line) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Parse { line: line_no, msg: format!("unknown section [{name}]") });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: line_no, msg: "expected `key = value`".into() })?;
            let sec = section
                .clone()
                .ok_or_else(|| Error::Parse { line: line_no, msg: "key outside of any section".into() })?;
            set_raw(&mut raw, &sec, key.trim(), value.trim()).map_err(|msg| Error::Parse { line: line_no, msg })?;
            lines.insert(key.trim().to_string(), line_no);
        }
        let mut gamma = None;
        for o in overrides {
            let (path, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("override `{o}` is not key=value") })?;
            let path = path.trim();
            if path == "schedules.theta.gamma" {
                let g = value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { line: 0, msg: format!("override `{o}`: gamma is not a number") })?;
                gamma = Some(g);
                continue;
            }
            let (sec, key) = path
                .split_once('.')
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("override `{o}` needs section.key") })?;
            set_raw(&mut raw, sec, key, value.trim())
                .map_err(|msg| Error::Parse { line: 0, msg: format!("override `{o}`: {msg}") })?;
            lines.insert(key.to_string(), 0);
        }
        let mut cfg = Self::from_raw(&raw).map_err(|(key, msg)| Error::Parse {
            line: lines.get(&key).copied().unwrap_or(0),
            msg: format!("{key}: {msg}"),
        })?;
        if let Some(g) = gamma {
            cfg.theta = cfg.theta.with_gamma(g)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Basic invariants that make a configuration meaningful at all.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        if let InitPoint::Fixed(x) = &self.x0 {
            if x.iter().any(|c| !c.is_finite()) || x.is_empty() {
                return bad("x0 must be a nonempty list of finite numbers".into());
            }
        }
        for s in [&self.eta, &self.theta, &self.beta] {
            s.validate()?;
        }
        match self.stepper {
            StepperKind::SingleTimescale => {
                if self.tau1().is_none() || self.tau2().is_none() {
                    return bad("single-timescale stepper needs theta = linear(tau1) and beta = linear(tau2)".into());
                }
            }
            StepperKind::Afmdw if self.estimator == EstimatorKind::SingleTimescale => {
                return bad("estimator `st` is only available through the `st` stepper".into());
            }
            _ => {}
        }
        self.scheme()?;
        Ok(())
    }

    pub fn tau1(&self) -> Option<f64> {
        linear_tau(&self.theta)
    }

    pub fn tau2(&self) -> Option<f64> {
        linear_tau(&self.beta)
    }

    /// The estimator actually driven by the configured stepper.
    pub fn effective_estimator(&self) -> EstimatorKind {
        match self.stepper {
            StepperKind::Afmdw => self.estimator,
            StepperKind::SingleTimescale => EstimatorKind::SingleTimescale,
            StepperKind::AdamD | StepperKind::AdamCoupled | StepperKind::AdamW => EstimatorKind::Adam,
        }
    }

    /// Scheme with the first scheduled estimator stepsize as `beta1`.
    pub fn scheme(&self) -> Result<EstimatorScheme> {
        let mut s = EstimatorScheme::new(self.effective_estimator(), self.beta.eval(0), self.epsilon)?;
        if s.kind == EstimatorKind::AdaBound {
            s = s.with_clamp(self.clamp.lower, self.clamp.upper)?;
        }
        s.literal_adabound = self.literal_adabound;
        Ok(s)
    }
}

fn linear_tau(s: &StepsizeSchedule) -> Option<f64> {
    match s {
        StepsizeSchedule::LinearMultiple { tau, .. } => Some(*tau),
        _ => None,
    }
}

fn set_raw(raw: &mut Raw, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
    if !SECTIONS.contains(&section) {
        return Err(format!("unknown section [{section}]"));
    }
    match raw.get_mut(&(section.to_string(), key.to_string())) {
        Some(slot) => {
            *slot = value.to_string();
            Ok(())
        }
        None => Err(format!("unknown key `{key}` in [{section}]")),
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_overrides(s, &[])
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let raw = self.to_raw();
        for (i, section) in SECTIONS.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{section}]")?;
            for ((s, k), v) in &raw {
                if s == section {
                    writeln!(f, "{k} = {v}")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Satisfied,
    Violated,
    NotCheckable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// Part of the convergence hypotheses; blocks a strict run when violated.
    Hypothesis,
    /// Reported only.
    Advisory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub condition: String,
    pub status: CheckStatus,
    pub severity: Severity,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub stepper: StepperKind,
    pub eps_v: f64,
    pub m_v: f64,
    pub items: Vec<CheckItem>,
}

impl ValidationReport {
    pub fn violations(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| i.status == CheckStatus::Violated && i.severity == Severity::Hypothesis)
    }

    pub fn passed(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn status_of(&self, condition: &str) -> Option<CheckStatus> {
        self.items.iter().find(|i| i.condition == condition).map(|i| i.status)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stepper {}: eps_v = {:e}, M_v = {:e}", self.stepper, self.eps_v, self.m_v)?;
        for item in &self.items {
            let status = match item.status {
                CheckStatus::Satisfied => "ok",
                CheckStatus::Violated => "VIOLATED",
                CheckStatus::NotCheckable => "not checkable",
            };
            let sev = match item.severity {
                Severity::Hypothesis => "",
                Severity::Advisory => " (advisory)",
            };
            writeln!(f, "  [{status}]{sev} {}: {}", item.condition, item.detail)?;
        }
        Ok(())
    }
}

pub const COND_H_BOUNDED: &str = "eps_v <= H(v_k) <= M_v";
pub const COND_X_BOUNDED: &str = "sup ||x_k|| < inf";
pub const COND_ETA_INF: &str = "inf eta_k > 0";
pub const COND_ETA_SUP: &str = "sup eta_k < 2/(sigma M_v)";
pub const COND_THETA_SUM: &str = "sum theta_k = inf";
pub const COND_THETA_LOG: &str = "theta_k log k -> 0";
pub const COND_THETA_LE_ONE: &str = "sup theta_k <= 1";
pub const COND_EXACT_ORACLE: &str = "d_k in D_f^{delta_k}(x_k), delta_k -> 0";
pub const COND_NOISE: &str = "noise bounded, mean zero";
pub const COND_ADAMD_ESTIMATOR: &str = "Adam estimator with constant eta";
pub const COND_ADAMD_ETA: &str = "eta <= 1/(sigma eps)";
pub const COND_ST_TAU: &str = "tau1 >= tau2/4";
pub const COND_ST_STEP: &str = "tau2 eta_k <= 1";
pub const COND_BASELINE: &str = "baseline stepper";

/// Checks the configured run against the convergence hypotheses of its
/// mode. `(m_f, m_xi)` bound the subgradients and the sampling noise.
/// Violations are reported, never returned as errors.
pub fn validate_config(config: &RunConfig, oracle_bounds: (f64, f64)) -> ValidationReport {
    let (m_f, m_xi) = oracle_bounds;
    let scheme = config.scheme().unwrap_or_else(|_| {
        EstimatorScheme::new(config.effective_estimator(), 0.5, config.epsilon.max(f64::MIN_POSITIVE))
            .expect("fallback scheme")
    });
    let (eps_v, m_v) = bound_certificate(&scheme, m_f, m_xi);
    let mut items = Vec::new();
    let mut push = |condition: &str, ok: Option<bool>, severity: Severity, detail: String| {
        let status = match ok {
            Some(true) => CheckStatus::Satisfied,
            Some(false) => CheckStatus::Violated,
            None => CheckStatus::NotCheckable,
        };
        items.push(CheckItem { condition: condition.to_string(), status, severity, detail });
    };
    let bounds_finite = m_f.is_finite() && m_xi.is_finite();
    let theta = &config.theta;
    let eta = &config.eta;
    use Severity::{Advisory, Hypothesis};

    match config.stepper {
        StepperKind::Afmdw | StepperKind::AdamD => {
            push(
                COND_H_BOUNDED,
                if bounds_finite { Some(eps_v > 0.0 && eps_v <= m_v) } else { None },
                Hypothesis,
                if bounds_finite {
                    format!("certificate ({eps_v:e}, {m_v:e}) from M_f = {m_f}, M_xi = {m_xi}")
                } else {
                    "no finite subgradient bound, lower certificate unavailable".into()
                },
            );
            push(
                COND_X_BOUNDED,
                None,
                Hypothesis,
                "implied by a growth condition when the problem declares one; checked along the run".into(),
            );
            push(COND_ETA_INF, Some(eta.bounded_below()), Hypothesis, format!("eta = {eta}"));
            let limit = 2.0 / (config.sigma * m_v);
            push(
                COND_ETA_SUP,
                Some(eta.sup() < limit),
                Hypothesis,
                format!("sup eta_k = {} vs 2/(sigma M_v) = {limit:e}", eta.sup()),
            );
            push(COND_THETA_SUM, Some(theta.sum_diverges()), Hypothesis, format!("theta = {theta}"));
            push(
                COND_THETA_LOG,
                Some(theta.vanishes_faster_than_inverse_log()),
                Hypothesis,
                format!("decided for the {theta} family"),
            );
            push(COND_THETA_LE_ONE, Some(theta.sup() <= 1.0), Advisory, format!("sup theta_k = {}", theta.sup()));
            push(COND_EXACT_ORACLE, Some(true), Hypothesis, "exact selections, delta_k = 0".into());
            push(
                COND_NOISE,
                if bounds_finite { Some(true) } else { None },
                Hypothesis,
                format!("finite-sum sampling, ||xi|| <= {m_xi}"),
            );
            if config.stepper == StepperKind::AdamD {
                let constant = matches!(eta, StepsizeSchedule::Constant(_));
                push(
                    COND_ADAMD_ESTIMATOR,
                    Some(constant),
                    Hypothesis,
                    format!("eta = {eta}, estimator forced to adam"),
                );
                let cap = 1.0 / (config.sigma * config.epsilon);
                push(COND_ADAMD_ETA, Some(eta.sup() <= cap), Hypothesis, format!("eta = {} vs {cap:e}", eta.sup()));
            }
        }
        StepperKind::SingleTimescale => {
            let (t1, t2) = (config.tau1().unwrap_or(f64::NAN), config.tau2().unwrap_or(f64::NAN));
            push(COND_ST_TAU, Some(t1 >= t2 / 4.0), Hypothesis, format!("tau1 = {t1}, tau2 = {t2}"));
            push(
                COND_X_BOUNDED,
                None,
                Hypothesis,
                "no sufficient condition available for this mode; checked along the run".into(),
            );
            push(COND_THETA_SUM, Some(theta.sum_diverges()), Hypothesis, format!("theta = {theta}"));
            push(
                COND_THETA_LOG,
                Some(theta.vanishes_faster_than_inverse_log()),
                Hypothesis,
                format!("decided for the {theta} family"),
            );
            push(
                COND_ST_STEP,
                Some(t2 * eta.sup() <= 1.0),
                Advisory,
                format!("tau2 sup eta_k = {}; larger values let v leave the hull of its inputs", t2 * eta.sup()),
            );
            push(COND_EXACT_ORACLE, Some(true), Hypothesis, "exact selections, delta_k = 0".into());
            push(
                COND_NOISE,
                if bounds_finite { Some(true) } else { None },
                Hypothesis,
                format!("finite-sum sampling, ||xi|| <= {m_xi}"),
            );
        }
        StepperKind::AdamCoupled | StepperKind::AdamW => {
            push(COND_BASELINE, None, Advisory, "no convergence hypotheses are checked for baselines".into());
        }
    }
    ValidationReport { stepper: config.stepper, eps_v, m_v, items }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip() {
        let c = RunConfig::default();
        let text = c.to_string();
        let back: RunConfig = text.parse().unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = "[optimizer]\nsigmaa = 0.1\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!("[plots]\n".parse::<RunConfig>().is_err());
        assert!("sigma = 0.1\n".parse::<RunConfig>().is_err());
    }

    #[test]
    fn overrides_and_gamma() {
        let c = RunConfig::parse_with_overrides(
            "[optimizer]\nsigma = 0.2\n",
            &["optimizer.sigma=0.3".into(), "schedules.theta.gamma=0.8".into()],
        )
        .unwrap();
        assert_eq!(c.sigma, 0.3);
        assert_eq!(c.theta, StepsizeSchedule::Power { theta0: 0.1, gamma: 0.8 });
        assert!(RunConfig::parse_with_overrides("", &["optimizer.nope=1".into()]).is_err());
    }

    #[test]
    fn single_timescale_needs_linear_schedules() {
        let text =
            "[optimizer]\nstepper = st\n[schedules]\neta = power(0.5, 0.6)\ntheta = linear(1)\nbeta = linear(4)\n";
        let c: RunConfig = text.parse().unwrap();
        assert_eq!((c.tau1(), c.tau2()), (Some(1.0), Some(4.0)));
        assert_eq!(c.theta.eval(3), c.eta.eval(3));
        assert!("[optimizer]\nstepper = st\n".parse::<RunConfig>().is_err());
    }

    fn adam_cfg(eps: f64, eta: f64) -> RunConfig {
        RunConfig {
            stepper: StepperKind::Afmdw,
            estimator: EstimatorKind::Adam,
            epsilon: eps,
            eta: StepsizeSchedule::Constant(eta),
            ..RunConfig::default()
        }
    }

    #[test]
    fn adam_tiny_epsilon_violates_eta_bound() {
        let r = validate_config(&adam_cfg(1e-8, 0.5), (1.0, 0.0));
        assert_eq!(r.m_v, 1e8);
        assert_eq!(r.status_of(COND_ETA_SUP), Some(CheckStatus::Violated));
        assert!(!r.passed());
    }

    #[test]
    fn sgdw_large_eta_is_fine() {
        let c = RunConfig { estimator: EstimatorKind::Sgdw, ..adam_cfg(0.1, 1.0) };
        let r = validate_config(&c, (1.0, 0.0));
        assert_eq!((r.eps_v, r.m_v), (1.0, 1.0));
        assert_eq!(r.status_of(COND_ETA_SUP), Some(CheckStatus::Satisfied));
        assert!(r.passed());
    }

    #[test]
    fn tau_boundary_allowed() {
        let text =
            "[optimizer]\nstepper = st\n[schedules]\neta = power(0.5, 0.6)\ntheta = linear(1)\nbeta = linear(4)\n";
        let c: RunConfig = text.parse().unwrap();
        let r = validate_config(&c, (1.0, 0.0));
        assert_eq!(r.status_of(COND_ST_TAU), Some(CheckStatus::Satisfied));
        let bad = RunConfig::parse_with_overrides(text, &["schedules.beta=linear(4.5)".into()]).unwrap();
        assert_eq!(validate_config(&bad, (1.0, 0.0)).status_of(COND_ST_TAU), Some(CheckStatus::Violated));
    }

    #[test]
    fn validation_is_pure() {
        let c = RunConfig::default();
        assert_eq!(validate_config(&c, (1.0, 2.0)), validate_config(&c, (1.0, 2.0)));
    }
}
