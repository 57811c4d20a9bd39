//! Adaptive-moment optimizers that keep weight decay out of the moment
//! estimators, for nonsmooth quadratically regularized finite sums
//! `min_x f(x) + sigma/2 ||x||^2`, `f = (1/N) sum_i f_i`.
//!
//! The crate provides the steppers ([`engine`]), the estimator catalog
//! ([`estimators`]), subgradient oracles ([`oracle`]), online checks of the
//! residual bound, shadow sequence and Lyapunov function ([`diagnostics`]),
//! and a differential-inclusion simulator with exact stationary sets for
//! small piecewise-linear problems ([`disim`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod diagnostics;
pub mod disim;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod oracle;
pub mod param;
pub mod schedule;

pub use error::{Error, Result};
pub use param::{OptimizerState, ParamVector};
