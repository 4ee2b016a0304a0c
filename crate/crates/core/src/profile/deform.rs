//! Reparametrizations τ ↦ τ + ψ(τ) of the meridian interval.
//!
//! ψ is stored as a finite sine series ψ(τ) = Σ_k b_k sin(kπτ/m). For the
//! admissible family generated by an odd function f, ψ(τ) = ∫₀^τ f(cos(πs/m)) ds
//! and the series is exact: writing f(cos x) = Σ a_k cos(kx) (the Chebyshev
//! expansion of f) gives b_k = a_k·m/(kπ).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RevspecError};
use crate::numeric::roots::newton_bracketed;

/// How a deformation was specified; kept for round-tripping configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformationSource {
    /// Power-basis coefficients of f: f(u) = Σ c_k u^k.
    Polynomial(Vec<f64>),
    /// Sine coefficients of ψ given directly (not necessarily admissible).
    SineSeries(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    m: f64,
    /// b_k for k = 1, 2, ...
    sine: Vec<f64>,
    source: DeformationSource,
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Chebyshev coefficients a_k of a polynomial in the power basis, so that
/// p(cos x) = Σ a_k cos(kx).
pub fn power_to_cosine(poly: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; poly.len().max(1)];
    for (n, &c) in poly.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if n == 0 {
            a[0] += c;
            continue;
        }
        // cos^n x = 2^{1-n} Σ_{j < n/2} C(n,j) cos((n-2j)x) + [n even] 2^{-n} C(n, n/2)
        let scale = 2f64.powi(1 - n as i32);
        for j in 0..=(n / 2) {
            let q = n - 2 * j;
            if q == 0 {
                a[0] += c * binomial(n, j) * scale * 0.5;
            } else {
                a[q] += c * binomial(n, j) * scale;
            }
        }
    }
    a
}

pub fn eval_poly(poly: &[f64], u: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &c in poly.iter().rev() {
        d = d * u + v;
        v = v * u + c;
    }
    (v, d)
}

impl Deformation {
    pub fn identity(m: f64) -> Self {
        Self { m, sine: Vec::new(), source: DeformationSource::Polynomial(Vec::new()) }
    }

    /// The admissible deformation generated by f (power-basis coefficients),
    /// after checking that f is odd, f(1) = 0 and max |f| < 1 on [-1, 1].
    pub fn from_polynomial(m: f64, poly: &[f64]) -> Result<Self> {
        let scale = poly.iter().fold(1.0f64, |s, c| s.max(c.abs()));
        if let Some((k, _)) = poly.iter().enumerate().find(|(k, c)| k % 2 == 0 && c.abs() > 1e-14 * scale) {
            return Err(RevspecError::ConstraintViolation {
                constraint: format!("f is not odd (coefficient of u^{k} is nonzero)"),
            });
        }
        let f1 = eval_poly(poly, 1.0).0;
        if f1.abs() > 1e-12 * scale {
            return Err(RevspecError::ConstraintViolation { constraint: format!("f(1) = {f1} is not 0") });
        }
        let max_f = (0..=4000).map(|i| eval_poly(poly, -1.0 + i as f64 / 2000.0).0.abs()).fold(0.0, f64::max);
        if max_f >= 1.0 {
            return Err(RevspecError::ConstraintViolation { constraint: format!("max |f| = {max_f} is not < 1") });
        }
        let cheb = power_to_cosine(poly);
        let sine = (1..cheb.len()).map(|k| if k % 2 == 1 { cheb[k] * m / (k as f64 * PI) } else { 0.0 }).collect();
        let d = Self { m, sine, source: DeformationSource::Polynomial(poly.to_vec()) };
        d.check_admissible()?;
        Ok(d)
    }

    /// The deformation generated by an arbitrary odd f, through its Chebyshev
    /// expansion truncated at `degree`. Constraints are checked on f itself.
    pub fn from_function<F: Fn(f64) -> f64>(m: f64, f: F, degree: usize) -> Result<Self> {
        let n = (2 * degree + 2).max(64);
        let nodes: Vec<f64> = (0..n).map(|j| PI * (j as f64 + 0.5) / n as f64).collect();
        let vals: Vec<f64> = nodes.iter().map(|t| f(t.cos())).collect();
        let mut a = vec![0.0; degree + 1];
        for (k, ak) in a.iter_mut().enumerate() {
            *ak = 2.0 / n as f64 * nodes.iter().zip(&vals).map(|(t, v)| v * (k as f64 * t).cos()).sum::<f64>();
        }
        // Coefficients at rounding level are aliasing noise; dropping them
        // keeps polynomial inputs exact and emitted configs short.
        let scale = a.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        for ak in a.iter_mut().filter(|x| x.abs() <= 64.0 * f64::EPSILON * scale) {
            *ak = 0.0;
        }
        for (k, ak) in a.iter().enumerate() {
            if k % 2 == 0 && ak.abs() > 1e-12 {
                return Err(RevspecError::ConstraintViolation { constraint: "f is not odd".into() });
            }
        }
        if f(1.0).abs() > 1e-12 {
            return Err(RevspecError::ConstraintViolation { constraint: format!("f(1) = {} is not 0", f(1.0)) });
        }
        let max_f = (0..=4000).map(|i| f(-1.0 + i as f64 / 2000.0).abs()).fold(0.0, f64::max);
        if max_f >= 1.0 {
            return Err(RevspecError::ConstraintViolation { constraint: format!("max |f| = {max_f} is not < 1") });
        }
        let mut sine: Vec<f64> = (1..a.len()).map(|k| if k % 2 == 1 { a[k] * m / (k as f64 * PI) } else { 0.0 }).collect();
        while sine.last() == Some(&0.0) {
            sine.pop();
        }
        let d = Self { m, sine: sine.clone(), source: DeformationSource::SineSeries(sine) };
        d.check_admissible()?;
        Ok(d)
    }

    /// A raw sine series for ψ, with only the bijectivity requirement
    /// |ψ'| < 1 enforced. Used for non-admissible controls.
    pub fn from_sine_series(m: f64, sine: &[f64]) -> Result<Self> {
        let d = Self { m, sine: sine.to_vec(), source: DeformationSource::SineSeries(sine.to_vec()) };
        let max_dpsi = d.max_abs_dpsi();
        if max_dpsi >= 1.0 {
            return Err(RevspecError::ConstraintViolation { constraint: format!("max |psi'| = {max_dpsi} is not < 1") });
        }
        Ok(d)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn source(&self) -> &DeformationSource {
        &self.source
    }

    pub fn sine_coefficients(&self) -> &[f64] {
        &self.sine
    }

    pub fn is_identity(&self) -> bool {
        self.sine.iter().all(|b| *b == 0.0)
    }

    /// ψ, ψ′, ψ″ at τ.
    pub fn psi(&self, tau: f64) -> (f64, f64, f64) {
        let w = PI / self.m;
        let mut v = 0.0;
        let mut d = 0.0;
        let mut dd = 0.0;
        for (i, b) in self.sine.iter().enumerate() {
            if *b == 0.0 {
                continue;
            }
            let k = (i + 1) as f64 * w;
            let (s, c) = (k * tau).sin_cos();
            v += b * s;
            d += b * k * c;
            dd -= b * k * k * s;
        }
        (v, d, dd)
    }

    fn bound(&self) -> f64 {
        self.sine.iter().map(|b| b.abs()).sum()
    }

    fn max_abs_dpsi(&self) -> f64 {
        (0..=4096).map(|i| self.psi(self.m * i as f64 / 4096.0).1.abs()).fold(0.0, f64::max)
    }

    /// Checks ψ(m−τ)=ψ(τ), oddness, 2m-periodicity, ψ′(0)=0 and |ψ′|<1.
    pub fn check_admissible(&self) -> Result<()> {
        let m = self.m;
        let tol = 1e-12 * m.max(1.0);
        for i in 0..=64 {
            let t = m * i as f64 / 64.0;
            let p = self.psi(t).0;
            if (self.psi(m - t).0 - p).abs() > tol {
                return Err(RevspecError::ConstraintViolation { constraint: "psi(m - tau) != psi(tau)".into() });
            }
            if (self.psi(-t).0 + p).abs() > tol {
                return Err(RevspecError::ConstraintViolation { constraint: "psi is not odd".into() });
            }
            if (self.psi(t + 2.0 * m).0 - p).abs() > tol {
                return Err(RevspecError::ConstraintViolation { constraint: "psi is not 2m-periodic".into() });
            }
        }
        if self.psi(0.0).1.abs() > 1e-12 {
            return Err(RevspecError::ConstraintViolation { constraint: "psi'(0) != 0".into() });
        }
        let max_dpsi = self.max_abs_dpsi();
        if max_dpsi >= 1.0 {
            return Err(RevspecError::ConstraintViolation { constraint: format!("max |psi'| = {max_dpsi} is not < 1") });
        }
        Ok(())
    }

    /// The map τ ↦ τ + ψ(τ).
    pub fn forward(&self, tau: f64) -> f64 {
        tau + self.psi(tau).0
    }

    /// Its inverse σ ↦ τ, by guarded Newton iteration.
    pub fn inverse(&self, sigma: f64) -> f64 {
        if self.is_identity() || sigma <= 0.0 || sigma >= self.m {
            return sigma.clamp(0.0, self.m);
        }
        let b = self.bound() + 1e-12;
        let lo = (sigma - b).max(0.0);
        let hi = (sigma + b).min(self.m);
        newton_bracketed(
            |t| {
                let (p, dp, _) = self.psi(t);
                (t + p - sigma, 1.0 + dp)
            },
            lo,
            hi,
            Some(sigma - self.psi(sigma).0),
            1e-15 * self.m,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_example_matches_symbolic_integral() {
        // f(u) = eps*u*(u^2-1) integrates to psi = -(eps m / 3pi) sin^3(pi tau / m).
        let m = PI;
        let eps = 0.5;
        let d = Deformation::from_polynomial(m, &[0.0, -eps, 0.0, eps]).unwrap();
        for i in 0..=20 {
            let t = m * i as f64 / 20.0;
            let expect = -(eps * m / (3.0 * PI)) * (PI * t / m).sin().powi(3);
            assert!((d.psi(t).0 - expect).abs() < 1e-15);
            // psi' = f(cos(pi tau / m))
            let u = (PI * t / m).cos();
            assert!((d.psi(t).1 - eps * u * (u * u - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn constraint_violations_are_named() {
        let e = Deformation::from_polynomial(PI, &[0.0, 1.0]).unwrap_err();
        assert!(matches!(e, RevspecError::ConstraintViolation { ref constraint } if constraint.contains("f(1)")));
        let e = Deformation::from_polynomial(PI, &[0.1, 0.0, -0.1]).unwrap_err();
        assert!(matches!(e, RevspecError::ConstraintViolation { ref constraint } if constraint.contains("odd")));
        let e = Deformation::from_polynomial(PI, &[0.0, -3.0, 0.0, 3.0]).unwrap_err();
        assert!(matches!(e, RevspecError::ConstraintViolation { ref constraint } if constraint.contains("max")));
    }

    #[test]
    fn general_function_route_matches_polynomial_route() {
        let m = 2.0;
        let p = Deformation::from_polynomial(m, &[0.0, -0.3, 0.0, 0.1, 0.0, 0.2]).unwrap();
        let g = Deformation::from_function(m, |u| -0.3 * u + 0.1 * u.powi(3) + 0.2 * u.powi(5), 15).unwrap();
        for i in 0..=10 {
            let t = m * i as f64 / 10.0;
            assert!((p.psi(t).0 - g.psi(t).0).abs() < 1e-14);
        }
    }

    #[test]
    fn sine_series_control_is_not_admissible() {
        let d = Deformation::from_sine_series(PI, &[0.0, 0.1]).unwrap();
        assert!(d.check_admissible().is_err());
        assert!(Deformation::from_sine_series(PI, &[0.0, 0.6]).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let d = Deformation::from_polynomial(PI, &[0.0, -0.45, 0.0, 0.45]).unwrap();
        for i in 0..=50 {
            let s = PI * i as f64 / 50.0;
            assert!((d.forward(d.inverse(s)) - s).abs() < 1e-14);
        }
    }
}
