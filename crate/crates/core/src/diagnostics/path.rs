//! Piecewise-linear paths through iterates on a stepsize clock.

use crate::error::{Error, Result};

/// `w(lambda_i + s) = x_i + (s / eta_i)(x_{i+1} - x_i)` with
/// `lambda_i = sum_{j < i} eta_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFn {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

/// Builds the interpolated path. `steps` has one entry per segment; an
/// extra trailing entry is ignored.
pub fn interpolate(trace_x: &[Vec<f64>], steps: &[f64]) -> Result<PathFn> {
    if trace_x.is_empty() {
        return Err(Error::Degenerate("empty trace".into()));
    }
    let segments = trace_x.len() - 1;
    if steps.len() < segments || steps.len() > segments + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} points need {segments} steps, got {}",
            trace_x.len(),
            steps.len()
        )));
    }
    let dim = trace_x[0].len();
    if trace_x.iter().any(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: 0 });
    }
    let mut times = Vec::with_capacity(trace_x.len());
    let mut t = 0.0;
    times.push(t);
    for &s in &steps[..segments] {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("steps must be positive, got {s}")));
        }
        t += s;
        times.push(t);
    }
    Ok(PathFn { times, values: trace_x.to_vec() })
}

impl PathFn {
    pub fn from_knots(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter("need as many knot times as values".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("knot times must increase strictly".into()));
        }
        Ok(Self { times, values })
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    pub fn knot_values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Value at `t` in `[start, end]`; knots are returned exactly.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = (self.start(), self.end());
        if !(t >= lo && t <= hi) {
            return Err(Error::QueryOutOfRange { t, lo, hi });
        }
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return Ok(self.values[0].clone());
        }
        let i = i - 1;
        if self.times[i] == t || i + 1 == self.times.len() {
            return Ok(self.values[i].clone());
        }
        let s = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok(self.values[i].iter().zip(&self.values[i + 1]).map(|(a, b)| a + s * (b - a)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knots_and_midpoints() {
        let xs = vec![vec![0.0], vec![2.0], vec![-1.0]];
        let w = interpolate(&xs, &[0.5, 0.25]).unwrap();
        assert_eq!(w.eval(0.0).unwrap(), vec![0.0]);
        assert_eq!(w.eval(0.5).unwrap(), vec![2.0]);
        assert_eq!(w.eval(0.75).unwrap(), vec![-1.0]);
        assert_eq!(w.eval(0.25).unwrap(), vec![1.0]);
        assert_eq!(w.eval(0.625).unwrap(), vec![0.5]);
        assert!(matches!(w.eval(0.8), Err(Error::QueryOutOfRange { .. })));
    }

    #[test]
    fn constant_trace() {
        let xs = vec![vec![3.0, 1.0]; 4];
        let w = interpolate(&xs, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        for t in [0.0, 0.05, 0.3, 0.6] {
            assert_eq!(w.eval(t).unwrap(), vec![3.0, 1.0]);
        }
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(interpolate(&[vec![0.0], vec![1.0]], &[]).is_err());
        assert!(interpolate(&[vec![0.0], vec![1.0]], &[0.0]).is_err());
    }
}
