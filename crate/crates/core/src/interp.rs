//! Piecewise-cubic Hermite interpolation, including the shape-preserving
//! (PCHIP) slope choice of Fritsch and Carlson.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CubicHermite {
    x: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
}

impl CubicHermite {
    /// Interpolant through (x, y) with prescribed slopes `dy`; `x` strictly
    /// increasing.
    pub fn new(x: Vec<f64>, y: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || y.len() != x.len() || dy.len() != x.len() {
            return Err(Error::InvalidParams(
                "hermite interpolation needs at least two matching samples".into(),
            ));
        }
        if let Some(k) = x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams(format!(
                "abscissae not strictly increasing at index {}",
                k + 1
            )));
        }
        Ok(Self { x, y, dy })
    }

    /// Monotone interpolant with Fritsch–Carlson slopes.
    pub fn pchip(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let dy = pchip_slopes(&x, &y);
        Self::new(x, y, dy)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Value and first derivative at `t`; outside the domain the end
    /// segment's cubic is continued.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (m0, m1) = (self.dy[k] * h, self.dy[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let dv = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;
        (v, dv)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).1
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// One-sided three-point slope, limited to keep the end segment monotone.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

/// Linear interpolation on a sorted grid, clamped at the ends.
pub fn linear(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if t <= x[0] {
        return y[0];
    }
    if t >= x[n - 1] {
        return y[n - 1];
    }
    let k = x.partition_point(|&v| v <= t) - 1;
    let s = (t - x[k]) / (x[k + 1] - x[k]);
    y[k] + s * (y[k + 1] - y[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_with_exact_slopes() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let x: Vec<f64> = (0..7).map(|i| -1.0 + 0.4 * i as f64).collect();
        let h = CubicHermite::new(
            x.clone(),
            x.iter().map(|&v| f(v)).collect(),
            x.iter().map(|&v| df(v)).collect(),
        )
        .unwrap();
        for t in [-0.93, -0.2, 0.0, 0.77, 1.3] {
            let (v, d) = h.eval_with_derivative(t);
            assert!((v - f(t)).abs() < 1e-12);
            assert!((d - df(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn pchip_is_monotone_on_monotone_data() {
        let x = vec![0.0, 1.0, 1.5, 3.0, 3.1, 5.0];
        let y = vec![0.0, 0.1, 2.0, 2.05, 4.0, 4.0];
        let p = CubicHermite::pchip(x, y).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=500 {
            let v = p.eval(5.0 * i as f64 / 500.0);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
        assert!(p.derivative(4.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(CubicHermite::pchip(vec![0.0, 0.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn linear_clamps() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 10.0, 0.0];
        assert_eq!(linear(&x, &y, -1.0), 0.0);
        assert_eq!(linear(&x, &y, 0.5), 5.0);
        assert_eq!(linear(&x, &y, 3.0), 0.0);
    }
}
