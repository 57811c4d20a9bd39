use afmdw::acceptance::{ad_vs_fd, kink_in_hull};
use afmdw::diagnostics::stationarity_gap;
use afmdw::oracle::{ad_backward, full_subgradient, Problem, ProblemSpec, ReluMlp};

#[test]
fn reverse_mode_matches_central_differences() {
    assert!(ad_vs_fd(7).unwrap() < 1e-6);
}

#[test]
fn kink_gradient_within_one_sided_hull() {
    for seed in 100..110 {
        assert!(kink_in_hull(seed).unwrap(), "seed {seed}");
    }
}

#[test]
fn objective_gradient_is_mean_of_components() {
    let net = ReluMlp::new(3, 5, 11).unwrap();
    let x: Vec<f64> = (0..net.dim()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
    let whole = ad_backward(&net.objective_graph().unwrap(), &x).unwrap();
    let mut mean = vec![0.0; net.dim()];
    for i in 0..net.samples() {
        for (a, b) in mean.iter_mut().zip(net.subgrad_component(i, &x)) {
            *a += b / net.samples() as f64;
        }
    }
    for (a, b) in whole.iter().zip(&mean) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn mlp_problem_reports_estimated_lipschitz() {
    let spec = ProblemSpec { id: "relu_mlp".into(), ..ProblemSpec::default() };
    let p = Problem::from_spec(&spec, 3).unwrap();
    let l = p.lipschitz_bound();
    assert!(!l.certified && l.value.is_finite() && l.value > 0.0);
}

#[test]
fn maxpiece_kink_gap_is_zero() {
    let p = Problem::maxpiece2d();
    assert_eq!(stationarity_gap(&p, &[0.0, -1.0], 0.0, 0.0).unwrap(), 0.0);
    assert!((stationarity_gap(&p, &[1.0, -1.0], 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn abs_selection_at_kink_is_zero() {
    assert_eq!(full_subgradient(&Problem::abs1d(), &[0.0]).unwrap().as_slice(), &[0.0]);
}
