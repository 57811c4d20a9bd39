//! Second-moment estimator catalog: update rules for `v`, preconditioner
//! maps `H(v)`, and the `(eps_v, M_v)` bound certificates that bracket
//! `H(v_k)` along a run.
//!
//! There is no bias correction anywhere in this module.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::param::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Sgdw,
    Adam,
    AmsGrad,
    Adamax,
    /// Plain Adam update and preconditioner; no variance rectification.
    RAdam,
    AdaBelief,
    AdaBound,
    Yogi,
    /// `v <- v - beta (v - g^2)` with `H(v) = (max(v, 0) + eps)^{-1/2}`.
    SingleTimescale,
}

impl EstimatorKind {
    /// The eight kinds that plug into the generic decoupled stepper.
    pub const FRAMEWORK: [EstimatorKind; 8] =
        [Self::Sgdw, Self::Adam, Self::AmsGrad, Self::Adamax, Self::RAdam, Self::AdaBelief, Self::AdaBound, Self::Yogi];

    pub fn id(self) -> &'static str {
        match self {
            Self::Sgdw => "sgdw",
            Self::Adam => "adam",
            Self::AmsGrad => "amsgrad",
            Self::Adamax => "adamax",
            Self::RAdam => "radam",
            Self::AdaBelief => "adabelief",
            Self::AdaBound => "adabound",
            Self::Yogi => "yogi",
            Self::SingleTimescale => "st",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "sgdw" => Self::Sgdw,
            "adam" => Self::Adam,
            "amsgrad" => Self::AmsGrad,
            "adamax" => Self::Adamax,
            "radam" => Self::RAdam,
            "adabelief" => Self::AdaBelief,
            "adabound" => Self::AdaBound,
            "yogi" => Self::Yogi,
            "st" => Self::SingleTimescale,
            other => return Err(Error::InvalidParameter(format!("unknown estimator `{other}`"))),
        })
    }
}

/// AdaBound clamp bounds `0 < lower < upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamp {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorScheme {
    pub kind: EstimatorKind,
    /// Estimator stepsize; the steppers overwrite it with the scheduled value each step.
    pub beta1: f64,
    pub epsilon: f64,
    pub clamp: Clamp,
    /// Use the clamp in the order `min{c_l, max{c_u, v^{-1/2}}}` instead of
    /// the standard `min{c_u, max{c_l, v^{-1/2}}}`.
    /// With `c_l < c_u` the literal form is the constant `c_l`.
    pub literal_adabound: bool,
}

impl EstimatorScheme {
    pub fn new(kind: EstimatorKind, beta1: f64, epsilon: f64) -> Result<Self> {
        let scheme = Self { kind, beta1, epsilon, clamp: Clamp { lower: 0.1, upper: 10.0 }, literal_adabound: false };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn with_clamp(mut self, lower: f64, upper: f64) -> Result<Self> {
        self.clamp = Clamp { lower, upper };
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let beta_ok = if self.kind == EstimatorKind::SingleTimescale {
            self.beta1 > 0.0 && self.beta1.is_finite()
        } else {
            self.beta1 > 0.0 && self.beta1 < 1.0
        };
        if !beta_ok {
            return Err(Error::InvalidParameter(format!(
                "{} estimator needs beta1 in (0, 1), got {}",
                self.kind, self.beta1
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.kind == EstimatorKind::AdaBound
            && !(self.clamp.lower > 0.0 && self.clamp.lower < self.clamp.upper && self.clamp.upper.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "adabound clamp needs 0 < c_l < c_u, got ({}, {})",
                self.clamp.lower, self.clamp.upper
            )));
        }
        Ok(())
    }

    /// Initial estimator: zeros, except Adamax which starts at `eps` so
    /// that `H(v) = 1/v` is defined.
    pub fn default_v0(&self, dim: usize) -> ParamVector {
        match self.kind {
            EstimatorKind::Adamax => ParamVector::filled(dim, self.epsilon),
            _ => ParamVector::zeros(dim),
        }
    }

    /// Per-coordinate interval of `v` that is forward invariant when
    /// `|g_i| <= bound` and `|m_i| <= bound`. Starting inside it keeps
    /// `H(v)` within the bound certificate.
    pub fn invariant_region(&self, bound: f64) -> (f64, f64) {
        let sq = bound * bound;
        match self.kind {
            EstimatorKind::Adamax => (self.epsilon, bound + self.epsilon),
            EstimatorKind::AdaBelief => (0.0, 4.0 * sq),
            EstimatorKind::Yogi => (0.0, (1.0 + self.beta1) * sq),
            _ => (0.0, sq),
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Advances the second-moment estimator by one step. `m_next` is the
/// already-updated momentum (only AdaBelief reads it). The estimator
/// stepsize is `scheme.beta1`.
pub fn update_estimator(
    scheme: &EstimatorScheme,
    v: &ParamVector,
    g: &[f64],
    m_next: &[f64],
    _k: u64,
) -> Result<ParamVector> {
    check_dim(v.dim(), g.len())?;
    check_dim(v.dim(), m_next.len())?;
    let b = scheme.beta1;
    let eps = scheme.epsilon;
    let out = v
        .iter()
        .zip(g)
        .zip(m_next)
        .map(|((&vi, &gi), &mi)| match scheme.kind {
            EstimatorKind::Sgdw | EstimatorKind::Adam | EstimatorKind::RAdam | EstimatorKind::AdaBound => {
                (1.0 - b) * vi + b * gi * gi
            }
            EstimatorKind::AmsGrad => vi.max((1.0 - b) * vi + b * gi * gi),
            EstimatorKind::Adamax => (b * vi).max(gi.abs() + eps),
            EstimatorKind::AdaBelief => {
                let d = gi - mi;
                (1.0 - b) * vi + b * d * d
            }
            EstimatorKind::Yogi => {
                let g2 = gi * gi;
                vi - b * sign(vi - g2) * g2
            }
            EstimatorKind::SingleTimescale => vi - b * (vi - gi * gi),
        })
        .collect();
    Ok(ParamVector::from_raw(out))
}

/// Elementwise preconditioner `H(v)`.
pub fn precondition(scheme: &EstimatorScheme, v: &ParamVector) -> Result<ParamVector> {
    let eps = scheme.epsilon;
    match scheme.kind {
        EstimatorKind::Sgdw => Ok(ParamVector::filled(v.dim(), 1.0)),
        EstimatorKind::Adam
        | EstimatorKind::AmsGrad
        | EstimatorKind::RAdam
        | EstimatorKind::AdaBelief
        | EstimatorKind::Yogi => Ok(v.map(|vi| 1.0 / (vi.sqrt() + eps))),
        EstimatorKind::Adamax => {
            if let Some(i) = v.iter().position(|&vi| vi <= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "adamax preconditioner needs v > 0, coordinate {i} is {}",
                    v[i]
                )));
            }
            Ok(v.map(|vi| 1.0 / vi))
        }
        EstimatorKind::AdaBound => {
            let Clamp { lower, upper } = scheme.clamp;
            if scheme.literal_adabound {
                Ok(v.map(|vi| lower.min(upper.max(1.0 / vi.sqrt()))))
            } else {
                Ok(v.map(|vi| upper.min(lower.max(1.0 / vi.sqrt()))))
            }
        }
        EstimatorKind::SingleTimescale => Ok(v.map(|vi| 1.0 / (vi.max(0.0) + eps).sqrt())),
    }
}

/// Constants `(eps_v, M_v)` with `eps_v <= H(v_k) <= M_v` whenever every
/// gradient satisfies `|g_i| <= m_f + m_xi` and `v_0` lies in the
/// [`EstimatorScheme::invariant_region`].
///
/// Two lower bounds are wider than the naive `1/(M + eps)` form, which
/// does not hold in general: Adamax uses `max(M, M^2)` (the
/// estimator grows to `M + eps`, which exceeds `M^2 + eps` when `M < 1`),
/// and Yogi uses `sqrt(1 + beta1) M` (an additive step from just below
/// `g^2` can overshoot `M^2` by a factor `1 + beta1`).
pub fn bound_certificate(scheme: &EstimatorScheme, m_f: f64, m_xi: f64) -> (f64, f64) {
    let m = m_f + m_xi;
    let eps = scheme.epsilon;
    match scheme.kind {
        EstimatorKind::Sgdw => (1.0, 1.0),
        EstimatorKind::Adam | EstimatorKind::AmsGrad | EstimatorKind::RAdam => (1.0 / (m + eps), 1.0 / eps),
        EstimatorKind::Yogi => (1.0 / ((1.0 + scheme.beta1).sqrt() * m + eps), 1.0 / eps),
        EstimatorKind::Adamax => (1.0 / (m.max(m * m) + eps), 1.0 / eps),
        EstimatorKind::AdaBelief => (1.0 / (2.0 * m + eps), 1.0 / eps),
        EstimatorKind::AdaBound => (scheme.clamp.lower, scheme.clamp.upper),
        EstimatorKind::SingleTimescale => (1.0 / (m * m + eps).sqrt(), 1.0 / eps.sqrt()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn scheme(kind: EstimatorKind, beta1: f64, eps: f64) -> EstimatorScheme {
        EstimatorScheme::new(kind, beta1, eps).unwrap()
    }

    #[test]
    fn adam_update_plug_in() {
        let s = scheme(EstimatorKind::Adam, 0.5, 1e-8);
        let v = update_estimator(&s, &pv(&[1.0]), &[3.0], &[0.0], 0).unwrap();
        assert_eq!(v[0], 5.0);
    }

    #[test]
    fn amsgrad_keeps_max() {
        let s = scheme(EstimatorKind::AmsGrad, 0.5, 1e-8);
        let v = update_estimator(&s, &pv(&[10.0]), &[1.0], &[0.0], 0).unwrap();
        assert_eq!(v[0], 10.0);
    }

    #[test]
    fn yogi_sign_branch() {
        let s = scheme(EstimatorKind::Yogi, 0.5, 1e-8);
        let v = update_estimator(&s, &pv(&[4.0]), &[1.0], &[0.0], 0).unwrap();
        assert_eq!(v[0], 3.5);
        // v = g^2 is a fixed point because sign(0) = 0.
        let v = update_estimator(&s, &pv(&[4.0]), &[2.0], &[0.0], 0).unwrap();
        assert_eq!(v[0], 4.0);
        let v = update_estimator(&s, &pv(&[1.0]), &[2.0], &[0.0], 0).unwrap();
        assert_eq!(v[0], 3.0);
    }

    #[test]
    fn adamax_and_adabelief() {
        let s = scheme(EstimatorKind::Adamax, 0.5, 0.1);
        let v = update_estimator(&s, &pv(&[4.0, 0.1]), &[1.0, -3.0], &[0.0, 0.0], 0).unwrap();
        assert_eq!(v.as_slice(), &[2.0, 3.1]);
        let s = scheme(EstimatorKind::AdaBelief, 0.25, 0.1);
        let v = update_estimator(&s, &pv(&[4.0]), &[3.0], &[1.0], 0).unwrap();
        assert_eq!(v[0], 0.75 * 4.0 + 0.25 * 4.0);
        // m_next = g kills the increment.
        let v = update_estimator(&s, &pv(&[4.0]), &[3.0], &[3.0], 0).unwrap();
        assert_eq!(v[0], 3.0);
    }

    #[test]
    fn dimension_mismatch() {
        let s = scheme(EstimatorKind::Adam, 0.5, 1e-8);
        assert!(matches!(
            update_estimator(&s, &pv(&[1.0, 2.0]), &[3.0], &[0.0, 0.0], 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn preconditioners() {
        let adam = scheme(EstimatorKind::Adam, 0.5, 1e-8);
        let h = precondition(&adam, &pv(&[4.0])).unwrap();
        assert!((h[0] - 0.499_999_997_5).abs() < 1e-15);
        let sgdw = scheme(EstimatorKind::Sgdw, 0.5, 1e-8);
        assert_eq!(precondition(&sgdw, &pv(&[123.0, 0.0])).unwrap().as_slice(), &[1.0, 1.0]);
        let st = scheme(EstimatorKind::SingleTimescale, 0.5, 0.01);
        assert!((precondition(&st, &pv(&[-1.0])).unwrap()[0] - 10.0).abs() < 1e-12);
        let adamax = scheme(EstimatorKind::Adamax, 0.5, 0.01);
        assert!(precondition(&adamax, &pv(&[0.0])).is_err());
        assert_eq!(precondition(&adamax, &pv(&[4.0])).unwrap()[0], 0.25);
    }

    #[test]
    fn adabound_clamp_orientations() {
        let mut s = scheme(EstimatorKind::AdaBound, 0.5, 1e-8).with_clamp(0.1, 10.0).unwrap();
        let h = precondition(&s, &pv(&[1e-6, 1.0, 1e6])).unwrap();
        assert_eq!(h.as_slice(), &[10.0, 1.0, 0.1]);
        s.literal_adabound = true;
        let h = precondition(&s, &pv(&[1e-6, 1.0, 1e6])).unwrap();
        assert_eq!(h.as_slice(), &[0.1, 0.1, 0.1]);
        assert!(scheme(EstimatorKind::AdaBound, 0.5, 1e-8).with_clamp(1.0, 0.5).is_err());
    }

    #[test]
    fn certificates() {
        let adam = scheme(EstimatorKind::Adam, 0.5, 0.5);
        let (lo, hi) = bound_certificate(&adam, 1.0, 2.0);
        assert!((lo - 1.0 / 3.5).abs() < 1e-15);
        assert_eq!(hi, 2.0);
        let belief = scheme(EstimatorKind::AdaBelief, 0.5, 0.5);
        let (lo, hi) = bound_certificate(&belief, 1.0, 2.0);
        assert!((lo - 1.0 / 6.5).abs() < 1e-15);
        assert_eq!(hi, 2.0);
        let sgdw = scheme(EstimatorKind::Sgdw, 0.5, 0.5);
        assert_eq!(bound_certificate(&sgdw, 1.0, 2.0), (1.0, 1.0));
        // Adamax agrees with the squared form once M >= 1.
        let adamax = scheme(EstimatorKind::Adamax, 0.5, 0.5);
        assert_eq!(bound_certificate(&adamax, 1.0, 2.0).0, 1.0 / 9.5);
    }

    #[test]
    fn parse_ids() {
        for kind in EstimatorKind::FRAMEWORK {
            assert_eq!(kind.id().parse::<EstimatorKind>().unwrap(), kind);
        }
        assert_eq!("st".parse::<EstimatorKind>().unwrap(), EstimatorKind::SingleTimescale);
        assert!("lion".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn beta_range() {
        assert!(EstimatorScheme::new(EstimatorKind::Adam, 1.0, 0.1).is_err());
        assert!(EstimatorScheme::new(EstimatorKind::Adam, 0.5, 0.0).is_err());
        assert!(EstimatorScheme::new(EstimatorKind::SingleTimescale, 2.0, 0.1).is_ok());
    }
}
