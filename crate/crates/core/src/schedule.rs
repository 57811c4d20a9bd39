//! Stepsize schedules for the x, momentum and estimator updates.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A deterministic stepsize sequence indexed by the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub enum StepsizeSchedule {
    Constant(f64),
    /// `theta0 / (k + 1)^gamma`.
    Power {
        theta0: f64,
        gamma: f64,
    },
    /// `theta0 / ln(s + 2)^{3/2}` held constant within epoch `s = k / steps_per_epoch`.
    EpochLog {
        theta0: f64,
        steps_per_epoch: u64,
    },
    /// `tau * base(k)`, used to tie the momentum and estimator stepsizes
    /// to the x stepsize in the single-timescale regime.
    LinearMultiple {
        tau: f64,
        base: Box<StepsizeSchedule>,
    },
}

/// Family selector used by [`make_schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleFamily {
    Constant,
    Power,
    EpochLog,
    LinearMultiple,
}

/// Builds a schedule from a family tag and its numeric parameters.
///
/// Parameter layouts: constant `[value]`, power `[theta0, gamma]`,
/// epoch-log `[theta0, steps_per_epoch]`. The linear-multiple family needs
/// a base schedule, so `params` is `[tau]` and `base` must be given.
pub fn make_schedule(
    family: ScheduleFamily,
    params: &[f64],
    base: Option<StepsizeSchedule>,
) -> Result<StepsizeSchedule> {
    let want = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{family:?} schedule takes {n} parameter(s), got {}", params.len())))
        }
    };
    let schedule = match family {
        ScheduleFamily::Constant => {
            want(1)?;
            StepsizeSchedule::Constant(params[0])
        }
        ScheduleFamily::Power => {
            want(2)?;
            StepsizeSchedule::Power { theta0: params[0], gamma: params[1] }
        }
        ScheduleFamily::EpochLog => {
            want(2)?;
            if params[1] < 1.0 || params[1].fract() != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "steps_per_epoch must be a positive integer, got {}",
                    params[1]
                )));
            }
            StepsizeSchedule::EpochLog { theta0: params[0], steps_per_epoch: params[1] as u64 }
        }
        ScheduleFamily::LinearMultiple => {
            want(1)?;
            let base =
                base.ok_or_else(|| Error::InvalidParameter("linear-multiple schedule needs a base schedule".into()))?;
            StepsizeSchedule::LinearMultiple { tau: params[0], base: Box::new(base) }
        }
    };
    schedule.validate()?;
    Ok(schedule)
}

impl StepsizeSchedule {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match self {
            Self::Constant(v) => positive("constant stepsize", *v),
            Self::Power { theta0, gamma } => {
                positive("theta0", *theta0)?;
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(Error::InvalidParameter(format!("power schedule needs gamma in (0, 1], got {gamma}")));
                }
                Ok(())
            }
            Self::EpochLog { theta0, steps_per_epoch } => {
                positive("theta0", *theta0)?;
                if *steps_per_epoch == 0 {
                    return Err(Error::InvalidParameter("steps_per_epoch must be >= 1".into()));
                }
                Ok(())
            }
            Self::LinearMultiple { tau, base } => {
                positive("tau", *tau)?;
                base.validate()
            }
        }
    }

    pub fn eval(&self, k: u64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Power { theta0, gamma } => theta0 / ((k as f64) + 1.0).powf(*gamma),
            Self::EpochLog { theta0, steps_per_epoch } => {
                let s = (k / steps_per_epoch) as f64;
                theta0 / (s + 2.0).ln().powf(1.5)
            }
            Self::LinearMultiple { tau, base } => tau * base.eval(k),
        }
    }

    /// Supremum over all k; every family here is nonincreasing in k.
    pub fn sup(&self) -> f64 {
        self.eval(0)
    }

    /// Whether the infimum over all k is strictly positive.
    pub fn bounded_below(&self) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::Power { .. } | Self::EpochLog { .. } => false,
            Self::LinearMultiple { base, .. } => base.bounded_below(),
        }
    }

    /// Whether the series of stepsizes diverges.
    pub fn sum_diverges(&self) -> bool {
        match self {
            Self::Constant(_) | Self::EpochLog { .. } => true,
            Self::Power { gamma, .. } => *gamma <= 1.0,
            Self::LinearMultiple { base, .. } => base.sum_diverges(),
        }
    }

    /// Whether `value(k) * log(k) -> 0`, decided per family rather than by sampling.
    pub fn vanishes_faster_than_inverse_log(&self) -> bool {
        match self {
            Self::Constant(_) => false,
            Self::Power { gamma, .. } => *gamma > 0.0,
            // ln(s+2)^{-3/2} * ln(k) with s ~ k / epoch tends to 0.
            Self::EpochLog { .. } => true,
            Self::LinearMultiple { base, .. } => base.vanishes_faster_than_inverse_log(),
        }
    }

    /// Replaces the exponent of a power schedule (used by sweeps).
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        match self {
            Self::Power { theta0, .. } => {
                let s = Self::Power { theta0: *theta0, gamma };
                s.validate()?;
                Ok(s)
            }
            other => Err(Error::InvalidParameter(format!("gamma override needs a power schedule, found {other}"))),
        }
    }
}

impl fmt::Display for StepsizeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "constant({v:?})"),
            Self::Power { theta0, gamma } => write!(f, "power({theta0:?}, {gamma:?})"),
            Self::EpochLog { theta0, steps_per_epoch } => {
                write!(f, "epoch-log({theta0:?}, {steps_per_epoch})")
            }
            // The base is implicit (the eta schedule) in the config text format.
            Self::LinearMultiple { tau, .. } => write!(f, "linear({tau:?})"),
        }
    }
}

/// Parses `constant(v)`, `power(theta0, gamma)`, `epoch-log(theta0, steps)`.
/// `linear(tau)` cannot be parsed standalone because it needs a base; see
/// [`parse_schedule_with_base`].
impl FromStr for StepsizeSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_schedule_with_base(s, None)
    }
}

pub fn parse_schedule_with_base(s: &str, base: Option<&StepsizeSchedule>) -> Result<StepsizeSchedule> {
    let bad = |msg: &str| Error::InvalidParameter(format!("schedule `{s}`: {msg}"));
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| bad("expected name(args)"))?;
    if !s.ends_with(')') {
        return Err(bad("missing closing parenthesis"));
    }
    let name = s[..open].trim();
    let args: Vec<f64> = s[open + 1..s.len() - 1]
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| a.parse::<f64>().map_err(|_| bad(&format!("`{a}` is not a number"))))
        .collect::<Result<_>>()?;
    let family = match name {
        "constant" => ScheduleFamily::Constant,
        "power" => ScheduleFamily::Power,
        "epoch-log" => ScheduleFamily::EpochLog,
        "linear" => ScheduleFamily::LinearMultiple,
        other => return Err(bad(&format!("unknown family `{other}`"))),
    };
    make_schedule(family, &args, base.cloned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_constant() {
        let s = make_schedule(ScheduleFamily::Constant, &[0.1], None).unwrap();
        for k in [0, 1, 17, 1_000_000] {
            assert_eq!(s.eval(k), 0.1);
        }
    }

    #[test]
    fn power_uses_k_plus_one_offset() {
        let s = make_schedule(ScheduleFamily::Power, &[1.0, 1.0], None).unwrap();
        assert_eq!(s.eval(3), 0.25);
        assert_eq!(s.eval(0), 1.0);
    }

    #[test]
    fn epoch_log_first_epoch() {
        // 0.1 / ln(2)^1.5 evaluated independently.
        let s = make_schedule(ScheduleFamily::EpochLog, &[0.1, 100.0], None).unwrap();
        assert!((s.eval(0) - 0.173_285_334_265_681_77).abs() < 1e-15);
        assert_eq!(s.eval(0), s.eval(99));
        assert!(s.eval(100) < s.eval(99));
        let second = 0.1 / 3f64.ln().powf(1.5);
        assert_eq!(s.eval(100), second);
    }

    #[test]
    fn invalid_parameters() {
        assert!(make_schedule(ScheduleFamily::Power, &[1.0, 0.0], None).is_err());
        assert!(make_schedule(ScheduleFamily::Power, &[1.0, 1.5], None).is_err());
        assert!(make_schedule(ScheduleFamily::Power, &[0.0, 0.5], None).is_err());
        assert!(make_schedule(ScheduleFamily::EpochLog, &[-1.0, 10.0], None).is_err());
        assert!(make_schedule(ScheduleFamily::EpochLog, &[1.0, 0.0], None).is_err());
        assert!(make_schedule(ScheduleFamily::Constant, &[0.0], None).is_err());
        assert!(make_schedule(ScheduleFamily::LinearMultiple, &[1.0], None).is_err());
    }

    #[test]
    fn linear_multiple_scales_base() {
        let base = make_schedule(ScheduleFamily::Power, &[0.5, 0.6], None).unwrap();
        let s = make_schedule(ScheduleFamily::LinearMultiple, &[4.0], Some(base.clone())).unwrap();
        for k in [0, 5, 99] {
            assert_eq!(s.eval(k), 4.0 * base.eval(k));
        }
    }

    #[test]
    fn symbolic_log_condition_per_family() {
        assert!(!StepsizeSchedule::Constant(0.1).vanishes_faster_than_inverse_log());
        assert!(StepsizeSchedule::Power { theta0: 0.1, gamma: 0.5 }.vanishes_faster_than_inverse_log());
        assert!(StepsizeSchedule::EpochLog { theta0: 0.1, steps_per_epoch: 10 }.vanishes_faster_than_inverse_log());
    }

    #[test]
    fn power_times_log_vanishes() {
        for gamma in [0.3, 0.7, 1.0] {
            let s = StepsizeSchedule::Power { theta0: 1.0, gamma };
            let k = 1_000_000u64;
            let value = s.eval(k) * ((k + 2) as f64).ln();
            let closed = (1_000_001f64).powf(-gamma) * (1_000_002f64).ln();
            assert!(value <= 10.0 * closed);
            assert!(value < s.eval(1000) * (1002f64).ln());
        }
    }

    #[test]
    fn parse_and_display() {
        let s: StepsizeSchedule = "power(0.1, 0.7)".parse().unwrap();
        assert_eq!(s, StepsizeSchedule::Power { theta0: 0.1, gamma: 0.7 });
        let again: StepsizeSchedule = s.to_string().parse().unwrap();
        assert_eq!(s, again);
        assert!("power(0.1)".parse::<StepsizeSchedule>().is_err());
        assert!("cosine(1)".parse::<StepsizeSchedule>().is_err());
        let eta = StepsizeSchedule::Constant(0.5);
        let lin = parse_schedule_with_base("linear(4)", Some(&eta)).unwrap();
        assert_eq!(lin.eval(3), 2.0);
    }
}
