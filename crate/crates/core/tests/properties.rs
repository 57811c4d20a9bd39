use afmdw::config::StepperKind;
use afmdw::diagnostics::{bound_series, interpolate, shadow_step_check, BoundConstants};
use afmdw::engine::{adam_coupled_step, afmdw_step, StepRecord};
use afmdw::estimators::{EstimatorKind, EstimatorScheme};
use afmdw::oracle::{sample_subgradient, Problem};
use afmdw::{OptimizerState, ParamVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(x: Vec<f64>, m: Vec<f64>, v: Vec<f64>) -> OptimizerState {
    OptimizerState::new(ParamVector::new(x).unwrap(), ParamVector::new(m).unwrap(), ParamVector::new(v).unwrap())
        .unwrap()
}

fn kind() -> impl Strategy<Value = EstimatorKind> {
    prop::sample::select(EstimatorKind::FRAMEWORK.to_vec())
}

fn vec3(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, 3)
}

proptest! {
    #[test]
    fn decoupled_steps_satisfy_shadow_identity(
        kind in kind(),
        x in vec3(-5.0, 5.0),
        m in vec3(-2.0, 2.0),
        v in vec3(0.1, 4.0),
        g in vec3(-2.0, 2.0),
        theta in 0.0f64..1.0,
        eta in 0.0f64..1.0,
        sigma in 0.01f64..2.0,
    ) {
        let s = EstimatorScheme::new(kind, 0.1, 0.1).unwrap();
        let before = state(x, m, v);
        let after = afmdw_step(&before, &g, eta, theta, 0.1, &s, sigma).unwrap();
        let rec = StepRecord {
            k: 0,
            stepper: StepperKind::Afmdw,
            g: ParamVector::new(g).unwrap(),
            index: Some(0),
            eta,
            theta,
            beta: 0.1,
            before,
            after,
        };
        prop_assert!(shadow_step_check(&rec, sigma));
    }

    #[test]
    fn unregularized_coupled_adam_matches_decoupled(
        x in vec3(-5.0, 5.0),
        m in vec3(-2.0, 2.0),
        v in vec3(0.0, 4.0),
        g in vec3(-2.0, 2.0),
        theta in 0.0f64..1.0,
        beta in 0.0f64..1.0,
    ) {
        let s = EstimatorScheme::new(EstimatorKind::Adam, beta, 1e-3).unwrap();
        let before = state(x, m, v);
        let a = afmdw_step(&before, &g, 0.1, theta, beta, &s, 0.0).unwrap();
        let b = adam_coupled_step(&before, &g, 0.1, theta, beta, 0.0, 1e-3).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn aligned_momentum_is_a_fixed_point(kind in kind(), x in vec3(-5.0, 5.0), v in vec3(0.1, 4.0), sigma in 0.01f64..1.0) {
        let s = EstimatorScheme::new(kind, 0.1, 0.1).unwrap();
        let m: Vec<f64> = x.iter().map(|xi| -sigma * xi).collect();
        let after = afmdw_step(&state(x.clone(), m.clone(), v), &m, 0.3, 0.5, 0.1, &s, sigma).unwrap();
        prop_assert_eq!(after.x.as_slice(), x.as_slice());
    }

    #[test]
    fn bound_recursion_matches_closed_form(
        sigma in 0.01f64..2.0,
        m_x in 0.0f64..5.0,
        m_d in 0.0f64..5.0,
        eta_tilde in 0.01f64..1.0,
        theta in prop::collection::vec(0.0f64..1.0, 1..200),
    ) {
        let c = BoundConstants { sigma, m_x, m_d, eta_tilde };
        let series = bound_series(&c, &theta);
        let r = 1.0 - eta_tilde;
        for (k, got) in series.iter().enumerate() {
            let mut want = r.powi(k as i32 + 1) * (sigma * m_x + m_d);
            for (i, t) in theta[..=k].iter().enumerate() {
                want += 2.0 * m_d * r.powi((k - i) as i32) * t;
            }
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn samples_bounded_by_lipschitz_constant(x in vec3(-4.0, 4.0), seed in 0u64..1000) {
        let p = Problem::l1quad(3, &[1.0, 0.0, -1.0, 0.5, 0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_subgradient(&p, &ParamVector::new(x).unwrap(), &mut rng).unwrap();
        prop_assert!(s.g.norm() <= p.lipschitz_bound().value + 1e-12);
    }

    #[test]
    fn interpolation_hits_knots(xs in prop::collection::vec(-3.0f64..3.0, 2..30), step in 0.01f64..1.0) {
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let steps = vec![step; pts.len() - 1];
        let w = interpolate(&pts, &steps).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let t = w.knot_times()[i];
            prop_assert!((t - step * i as f64).abs() <= 1e-12 * (1.0 + t));
            let got = w.eval(t).unwrap()[0];
            prop_assert!((got - p[0]).abs() <= 1e-12 * (1.0 + p[0].abs()));
        }
    }
}
