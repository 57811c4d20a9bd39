use afmdw::config::{InitPoint, OracleMode, RunConfig, StepperKind, COND_ETA_SUP};
use afmdw::diagnostics::loglog_slope;
use afmdw::engine::{adamd_run, run};
use afmdw::estimators::EstimatorKind;
use afmdw::schedule::StepsizeSchedule;
use afmdw::Error;

fn adamd(theta: StepsizeSchedule, eta: f64) -> RunConfig {
    RunConfig {
        stepper: StepperKind::AdamD,
        estimator: EstimatorKind::Adam,
        sigma: 0.1,
        eta: StepsizeSchedule::Constant(eta),
        theta,
        beta: StepsizeSchedule::Constant(1e-4),
        max_iters: 100_000,
        gap_every: 0,
        ..RunConfig::default()
    }
}

#[test]
fn adamd_reaches_origin_on_abs() {
    let cfg = adamd(StepsizeSchedule::Power { theta0: 0.1, gamma: 0.7 }, 0.05);
    let trace = adamd_run(&cfg).unwrap();
    assert!(trace.final_x()[0].abs() <= 1e-2);
}

#[test]
fn deterministic_residual_vanishes_with_expected_rate() {
    let mut cfg = adamd(StepsizeSchedule::Power { theta0: 0.1, gamma: 0.8 }, 1.0);
    cfg.oracle = OracleMode::Full;
    cfg.x0 = InitPoint::Fixed(vec![1.0]);
    let trace = adamd_run(&cfg).unwrap();
    assert!(trace.summary.final_residual < 1e-3);
    let slope = loglog_slope(&trace.residuals(), 0.3).unwrap();
    assert!((-0.95..=-0.65).contains(&slope), "slope {slope}");
}

#[test]
fn strict_mode_rejects_large_stepsize() {
    let mut cfg = adamd(StepsizeSchedule::Power { theta0: 0.1, gamma: 0.6 }, 0.5);
    cfg.epsilon = 1e-8;
    match run(&cfg) {
        Err(Error::ConfigViolation(msg)) => assert!(msg.contains(COND_ETA_SUP), "{msg}"),
        other => panic!("expected a violation, got {other:?}"),
    }
    cfg.strict = false;
    cfg.max_iters = 10;
    let out = run(&cfg).unwrap();
    assert!(!out.report.passed());
}

#[test]
fn same_config_gives_identical_trace() {
    let mut cfg = adamd(StepsizeSchedule::Power { theta0: 0.1, gamma: 0.6 }, 0.5);
    cfg.max_iters = 2_000;
    cfg.gap_every = 100;
    let a = run(&cfg).unwrap().trace.to_csv_string();
    let b = run(&cfg).unwrap().trace.to_csv_string();
    assert_eq!(a, b);
    cfg.seed = 1;
    assert_ne!(a, run(&cfg).unwrap().trace.to_csv_string());
}

#[test]
fn config_text_round_trip() {
    let mut cfg = adamd(StepsizeSchedule::EpochLog { theta0: 0.1, steps_per_epoch: 100 }, 0.25);
    cfg.problem.id = "maxpiece2d".into();
    cfg.problem.dim = 2;
    let text = cfg.to_string();
    let back: RunConfig = text.parse().unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn unknown_key_is_rejected() {
    let err = "[optimizer]\nsigmaa = 0.1\n".parse::<RunConfig>().unwrap_err();
    assert!(matches!(err, Error::Parse { .. }), "{err:?}");
}
