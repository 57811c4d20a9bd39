use crate::param::ParamVector;

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` per coordinate.
///
/// # Panics
/// If `h` is not strictly positive.
pub fn finite_difference_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> ParamVector {
    assert!(h > 0.0, "finite difference step must be positive");
    let mut probe = x.to_vec();
    let grad = (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect();
    ParamVector::from_raw(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let g = finite_difference_grad(|x| x[0] * x[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn abs_locally_linear() {
        let g = finite_difference_grad(|x| x[0].abs(), &[1.0], 1e-5);
        assert!((g[0] - 1.0).abs() < 1e-10);
    }
}
