use afmdw::engine::{adam_coupled_step, adamw_step, afmdw_step, single_timescale_step};
use afmdw::estimators::{EstimatorKind, EstimatorScheme};
use afmdw::{OptimizerState, ParamVector};

const TOL: f64 = 1e-12;

fn start() -> OptimizerState {
    let one = |v: f64| ParamVector::new(vec![v]).unwrap();
    OptimizerState::new(one(1.0), one(0.0), one(0.0)).unwrap()
}

#[test]
fn sgdw_step() {
    let s = EstimatorScheme::new(EstimatorKind::Sgdw, 0.5, 1e-8).unwrap();
    let out = afmdw_step(&start(), &[2.0], 0.1, 0.5, 0.5, &s, 0.1).unwrap();
    assert!((out.m[0] - 1.0).abs() < TOL);
    assert!((out.x[0] - 0.89).abs() < TOL);
}

#[test]
fn single_timescale_hand_step() {
    let out = single_timescale_step(&start(), &[2.0], 0.1, 1.0, 4.0, 0.1, 0.01).unwrap();
    assert!((out.m[0] - 0.2).abs() < TOL);
    assert!((out.v[0] - 1.6).abs() < TOL);
    let want = 1.0 - 0.1 * 0.3 / 1.61f64.sqrt();
    assert!((out.x[0] - want).abs() < TOL);
    assert!((out.x[0] - 0.97635).abs() < 1e-5);
}

#[test]
fn coupled_adam_hand_step() {
    let out = adam_coupled_step(&start(), &[2.0], 0.1, 0.5, 0.5, 0.1, 1e-8).unwrap();
    assert!((out.m[0] - 1.05).abs() < TOL);
    assert!((out.v[0] - 2.205).abs() < TOL);
    let want = 1.0 - 0.1 * 1.05 / (2.205f64.sqrt() + 1e-8);
    assert!((out.x[0] - want).abs() < TOL);
    assert!((out.x[0] - 0.92929).abs() < 1e-5);
}

#[test]
fn adamw_hand_step() {
    let out = adamw_step(&start(), &[2.0], 0.1, 0.5, 0.5, 0.1, 1e-8).unwrap();
    assert!((out.m[0] - 1.0).abs() < TOL);
    assert!((out.v[0] - 2.0).abs() < TOL);
    let want = 1.0 - 0.1 / (2f64.sqrt() + 1e-8) - 0.01;
    assert!((out.x[0] - want).abs() < TOL);
    assert!((out.x[0] - 0.91929).abs() < 1e-5);
}

/// AdaBelief must read the updated momentum. A variant that reads the old
/// one produces a different estimator value on the same hand example.
#[test]
fn adabelief_uses_new_momentum() {
    let s = EstimatorScheme::new(EstimatorKind::AdaBelief, 0.5, 1e-8).unwrap();
    let out = afmdw_step(&start(), &[2.0], 0.1, 0.5, 0.5, &s, 0.1).unwrap();
    // m' = 1, (g - m')^2 = 1
    assert!((out.v[0] - 0.5).abs() < TOL);
    let wrong_order = 0.5 * (2.0f64 - 0.0).powi(2);
    assert!((out.v[0] - wrong_order).abs() > 1.0);
    let want_x = 1.0 - 0.1 * (1.0 + 0.1) / (0.5f64.sqrt() + 1e-8);
    assert!((out.x[0] - want_x).abs() < TOL);
}
