use afmdw::diagnostics::stationarity_gap;
use afmdw::disim::{
    brute_force_stationary, integrate_di_sgd, integrate_di_st, path_distance, selection_sensitive, SearchBox, StParams,
};
use afmdw::oracle::Problem;
use afmdw::Error;

#[test]
fn euler_is_first_order() {
    let q = Problem::Quadratic { dim: 1 };
    let err = |dt: f64| {
        let p = integrate_di_sgd(&q, &[1.0], 0.0, dt, 1.0).unwrap();
        (p.x.last().unwrap()[0] - (-1.0f64).exp()).abs()
    };
    let ratio = err(1e-2) / err(5e-3);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn quadratic_decay_matches_exponential() {
    let q = Problem::Quadratic { dim: 2 };
    let p = integrate_di_sgd(&q, &[2.0, -1.0], 0.0, 1e-4, 1.0).unwrap();
    let e = (-1.0f64).exp();
    let last = p.x.last().unwrap();
    assert!((last[0] - 2.0 * e).abs() < 1e-3 && (last[1] + e).abs() < 1e-3);
}

#[test]
fn lyapunov_nonincreasing_on_smooth_problem() {
    let q = Problem::Quadratic { dim: 2 };
    let params = StParams { sigma: 0.1, tau1: 1.0, tau2: 4.0, epsilon: 0.01 };
    let p = integrate_di_st(&q, &[1.0, -2.0], &[0.3, 0.0], &[0.0, 0.5], params, 1e-4, 5.0).unwrap();
    for w in p.lyapunov.windows(2) {
        assert!(w[1].unwrap() <= w[0].unwrap() + 1e-9);
    }
}

fn stationary_points_have_zero_gap(problem: &Problem, sigma: f64, half: f64) {
    let set = brute_force_stationary(problem, &SearchBox::cube(problem.dim(), half), sigma, 0.05).unwrap();
    assert!(!set.is_empty());
    for p in &set.points {
        let gap = stationarity_gap(problem, p, 0.0, sigma).unwrap();
        assert!(gap <= 1e-10, "{} at {p:?}: gap {gap}", problem.id());
    }
}

#[test]
fn brute_force_points_are_stationary() {
    stationary_points_have_zero_gap(&Problem::abs1d(), 0.1, 3.0);
    stationary_points_have_zero_gap(&Problem::l1quad(1, &[-1.0, 1.0]).unwrap(), 0.1, 3.0);
    stationary_points_have_zero_gap(&Problem::l1quad(2, &[-1.0, 0.5, 1.0, -0.5, 0.0, 0.0]).unwrap(), 0.1, 3.0);
    stationary_points_have_zero_gap(&Problem::maxpiece2d(), 0.0, 2.0);
    stationary_points_have_zero_gap(&Problem::maxpiece2d(), 0.2, 2.0);
}

#[test]
fn l1quad_symmetric_centers_give_origin() {
    let p = Problem::l1quad(1, &[-1.0, 1.0]).unwrap();
    let set = brute_force_stationary(&p, &SearchBox::cube(1, 5.0), 0.1, 0.1).unwrap();
    assert_eq!(set.points, vec![vec![0.0]]);
    assert!((set.distance(&[0.5]).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn l1quad_without_regularization_gives_interval() {
    let p = Problem::l1quad(1, &[-1.0, 1.0]).unwrap();
    let set = brute_force_stationary(&p, &SearchBox::cube(1, 5.0), 0.0, 0.1).unwrap();
    assert!(set.distance(&[-1.0]).unwrap() < 1e-12 && set.distance(&[0.3]).unwrap() < 1e-12);
    assert!((set.distance(&[2.0]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn equilibria_stay_put() {
    let cases =
        [(Problem::abs1d(), 0.1), (Problem::maxpiece2d(), 0.0), (Problem::l1quad(1, &[-1.0, 1.0]).unwrap(), 0.0)];
    let mut checked = 0;
    for (problem, sigma) in cases {
        let set = brute_force_stationary(&problem, &SearchBox::cube(problem.dim(), 2.0), sigma, 0.25).unwrap();
        for p in &set.points {
            if selection_sensitive(&problem, p, sigma).unwrap() {
                continue;
            }
            let path = integrate_di_sgd(&problem, p, sigma, 1e-3, 1.0).unwrap();
            for x in &path.x {
                assert!(x.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-9));
            }
            checked += 1;
        }
    }
    assert!(checked >= 3);
}

#[test]
fn rejects_unsupported_inputs() {
    let q = Problem::Quadratic { dim: 1 };
    assert!(matches!(
        brute_force_stationary(&q, &SearchBox::cube(1, 1.0), 0.1, 0.1),
        Err(Error::UnsupportedProblem(_))
    ));
    let a = integrate_di_sgd(&Problem::abs1d(), &[1.0], 0.1, 0.01, 1.0).unwrap();
    let b = integrate_di_sgd(&Problem::abs1d(), &[1.0], 0.1, 0.01, 0.5).unwrap();
    assert!(matches!(path_distance(&b.to_path_fn(), &a, 1.0), Err(Error::DomainMismatch(_))));
    assert_eq!(path_distance(&a.to_path_fn(), &a, 1.0).unwrap(), 0.0);
}

#[test]
fn path_csv_has_trace_columns() {
    let p = integrate_di_sgd(&Problem::abs1d(), &[1.0], 0.1, 0.5, 1.0).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    let header_cols = lines[0].split(',').count();
    assert!(lines[1..].iter().all(|l| l.split(',').count() == header_cols));
    assert!(lines[1].starts_with("di-sgd,0,"));
}
