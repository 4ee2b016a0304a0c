//! C² cubic splines through scattered (strictly increasing) abscissae.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndCondition {
    /// Zero second derivative at both ends.
    Natural,
    /// Continuous third derivative across the second and penultimate knots.
    NotAKnot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Builds the interpolant. Requires at least 2 points and strictly
    /// increasing `x`; with 2 points the result is linear, with 3 points
    /// under `NotAKnot` it is the interpolating parabola.
    pub fn new(x: &[f64], y: &[f64], end: EndCondition) -> Option<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        let x = x.to_vec();
        let y = y.to_vec();
        if n == 2 {
            return Some(Self { m: vec![0.0; 2], x, y });
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        if n == 3 && end == EndCondition::NotAKnot {
            let c = (delta[1] - delta[0]) / (x[2] - x[0]);
            return Some(Self { m: vec![2.0 * c; 3], x, y });
        }
        // Unknowns M_1..M_{n-2}; tridiagonal system.
        let k = n - 2;
        let mut sub = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut sup = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for j in 0..k {
            let i = j + 1;
            sub[j] = h[i - 1];
            diag[j] = 2.0 * (h[i - 1] + h[i]);
            sup[j] = h[i];
            rhs[j] = 6.0 * (delta[i] - delta[i - 1]);
        }
        if end == EndCondition::NotAKnot {
            let (h0, h1) = (h[0], h[1]);
            diag[0] = 3.0 * h0 + 2.0 * h1 + h0 * h0 / h1;
            sup[0] = h1 - h0 * h0 / h1;
            let (ha, hb) = (h[n - 3], h[n - 2]);
            sub[k - 1] = ha - hb * hb / ha;
            diag[k - 1] = 2.0 * ha + 3.0 * hb + hb * hb / ha;
        }
        let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        let mut m = vec![0.0; n];
        m[1..n - 1].copy_from_slice(&inner);
        if end == EndCondition::NotAKnot {
            let (h0, h1) = (h[0], h[1]);
            m[0] = (1.0 + h0 / h1) * m[1] - (h0 / h1) * m[2];
            let (ha, hb) = (h[n - 3], h[n - 2]);
            m[n - 1] = (1.0 + hb / ha) * m[n - 2] - (hb / ha) * m[n - 3];
        }
        Some(Self { x, y, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `t` (cubic extrapolation outside).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
        let d = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) * h * mi / 6.0 + (3.0 * b * b - 1.0) * h * mj / 6.0;
        let dd = a * mi + b * mj;
        (v, d, dd)
    }
}

/// Thomas algorithm. `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
