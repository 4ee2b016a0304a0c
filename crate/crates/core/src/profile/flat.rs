//! A sphere whose equator has curvature vanishing to infinite order.
//!
//! Near the equator the profile is r = a·(1 − Φ(|σ − m/2|/a)) with
//!
//! Φ(s) = A·λ·Σ_{j=1}^{J} j^{-j} 4^{-j} X(4^j (s/λ − 4^{-j}))  +  H·exp(−b (λ/s)^p)
//!
//! where X is the primitive of a normalized C^∞ bump supported in (0, 1).
//! The first sum is a staircase: on each interval [λ 4^{-k}/2, λ 4^{-k}] the
//! staircase is constant, so the profile there changes only through the
//! second, much smaller term. Away from the equator Φ is blended into
//! 1 − cos s so that the poles are those of a round sphere of radius a.
//!
//! Both terms and all their derivatives vanish at s = 0.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::numeric::quadrature::{integrate, QuadOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlatEquatorParams {
    /// A: amplitude of the staircase.
    pub f_amplitude: f64,
    /// λ: horizontal scale of the staircase and of the exponential term.
    pub length_scale: f64,
    /// H: amplitude of the exponential term.
    pub h_amplitude: f64,
    /// b: rate of the exponential term.
    pub h_rate: f64,
    /// p: power of the exponential term.
    pub h_power: f64,
    /// J: number of staircase steps kept.
    pub j_max: u32,
    /// Blend interval [s0, s1] (in units of the scale a = m/π) into 1 − cos s.
    pub blend_start: f64,
    pub blend_end: f64,
}

impl Default for FlatEquatorParams {
    fn default() -> Self {
        Self {
            f_amplitude: 1.0,
            length_scale: 1.0,
            h_amplitude: 1e6,
            h_rate: 20.5,
            h_power: 0.25,
            j_max: 12,
            blend_start: 0.9,
            blend_end: 1.4,
        }
    }
}

fn bump_raw(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        (-1.0 / (x * (1.0 - x))).exp()
    }
}

fn bump_norm() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| {
        let opts = QuadOptions { rel_tol: 1e-15, abs_tol: 0.0, ..Default::default() };
        2.0 * integrate(bump_raw, 0.0, 0.5, &opts).expect("bump normalization")
    })
}

/// χ(x): the normalized bump.
pub fn bump(x: f64) -> f64 {
    bump_raw(x) / bump_norm()
}

/// χ′(x).
pub fn bump_derivative(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let q = x * (1.0 - x);
    bump(x) * (1.0 - 2.0 * x) / (q * q)
}

/// X(y) = ∫₀^y χ, computed with relative accuracy even where it is tiny.
pub fn bump_cdf(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    if y > 0.5 {
        return 1.0 - bump_cdf(1.0 - y);
    }
    let z = 1.0 / y;
    if z > CDF_Z_MAX {
        return bump_cdf_direct(y);
    }
    cdf_table().eval(z)
}

fn bump_cdf_direct(y: f64) -> f64 {
    let opts = QuadOptions { rel_tol: 1e-14, abs_tol: 1e-300, initial_panels: 2, ..Default::default() };
    integrate(bump_raw, 0.0, y, &opts).unwrap_or(f64::NAN) / bump_norm()
}

const CDF_Z_MAX: f64 = 600.0;
const CDF_DV: f64 = 0.002;

/// M = ln X(1/z) + z tabulated with dM/dv and d²M/dv² on a uniform grid in
/// v = ln(z − 1), z ∈ [2, 600]. In v the singularity of the bump exponent at
/// z = 1 is pushed off to −∞ and M is smooth and of moderate size, so
/// quintic Hermite interpolation reproduces X to near machine precision in
/// relative terms.
struct CdfTable {
    m: Vec<[f64; 3]>,
}

fn cdf_table() -> &'static CdfTable {
    static T: OnceLock<CdfTable> = OnceLock::new();
    T.get_or_init(CdfTable::build)
}

impl CdfTable {
    fn build() -> Self {
        let n = ((CDF_Z_MAX - 1.0).ln() / CDF_DV).ceil() as usize;
        let z_at = |i: usize| 1.0 + (CDF_DV * i as f64).exp();
        let opts = QuadOptions { rel_tol: 1e-14, abs_tol: 0.0, initial_panels: 1, ..Default::default() };
        // Accumulate from the small end so that every partial sum is a sum
        // of positive terms, with compensation for the rounding.
        let mut x = vec![0.0; n + 1];
        x[n] = bump_cdf_direct(1.0 / z_at(n));
        let (mut sum, mut carry) = (x[n], 0.0);
        for i in (0..n).rev() {
            let piece = integrate(bump_raw, 1.0 / z_at(i + 1), 1.0 / z_at(i), &opts).expect("bump cdf table") / bump_norm();
            let t = sum + piece;
            carry += if sum.abs() >= piece.abs() { (sum - t) + piece } else { (piece - t) + sum };
            sum = t;
            x[i] = sum + carry;
        }
        let m = (0..=n)
            .map(|i| {
                let z = z_at(i);
                let y = 1.0 / z;
                let l1 = bump(y) / x[i];
                let l2 = bump_derivative(y) / x[i] - l1 * l1;
                let y2 = y * y;
                let (mz, mzz) = (1.0 - y2 * l1, y2 * y2 * l2 + 2.0 * y2 * y * l1);
                let e = z - 1.0;
                [x[i].ln() + z, mz * e, mzz * e * e + mz * e]
            })
            .collect();
        Self { m }
    }

    fn eval(&self, z: f64) -> f64 {
        let u = (z - 1.0).ln() / CDF_DV;
        let i = (u.floor().max(0.0) as usize).min(self.m.len() - 2);
        let t = u - i as f64;
        let (a, b) = (self.m[i], self.m[i + 1]);
        let h = CDF_DV;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let g0 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let g1 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let g2 = 0.5 * (t3 - 2.0 * t4 + t5);
        let m = h0 * a[0] + h * h1 * a[1] + h * h * h2 * a[2] + g0 * b[0] + h * g1 * b[1] + h * h * g2 * b[2];
        m.exp() * (-z).exp()
    }
}

/// Smooth step: 0 for t ≤ 0, 1 for t ≥ 1, C^∞. Returns value and two derivatives.
fn smooth_step(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let e = |x: f64| (-1.0 / x).exp();
    let u = 1.0 - t;
    let a = e(t);
    let a1 = a / (t * t);
    let a2 = a * (1.0 / t.powi(4) - 2.0 / t.powi(3));
    let b = e(u);
    let b1 = -b / (u * u);
    let b2 = b * (1.0 / u.powi(4) - 2.0 / u.powi(3));
    let s = a + b;
    let s1 = a1 + b1;
    let num = a1 * b - a * b1;
    (a / s, num / (s * s), (a2 * b - a * b2) / (s * s) - 2.0 * num * s1 / (s * s * s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatShape {
    pub params: FlatEquatorParams,
    weights: Vec<f64>,
}

/// Value with two derivatives.
type Jet = (f64, f64, f64);

impl FlatShape {
    pub fn new(params: FlatEquatorParams) -> Self {
        let weights = (1..=params.j_max).map(|j| (j as f64).powi(-(j as i32))).collect();
        Self { params, weights }
    }

    /// Staircase term and its derivatives at s.
    fn staircase(&self, s: f64) -> Jet {
        let p = &self.params;
        let t = s / p.length_scale;
        let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
        for (i, w) in self.weights.iter().enumerate() {
            let q = 4f64.powi(i as i32 + 1);
            let y = q * t - 1.0;
            v += w / q * bump_cdf(y);
            if y > 0.0 && y < 1.0 {
                d += w * bump(y);
                dd += w * q * bump_derivative(y);
            }
        }
        let a = p.f_amplitude;
        (a * p.length_scale * v, a * d, a * dd / p.length_scale)
    }

    /// Staircase difference f(s1) − f(s2) without cancellation between
    /// identical plateau values.
    fn staircase_difference(&self, s1: f64, s2: f64) -> f64 {
        let p = &self.params;
        let (t1, t2) = (s1 / p.length_scale, s2 / p.length_scale);
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            let q = 4f64.powi(i as i32 + 1);
            let (y1, y2) = (q * t1 - 1.0, q * t2 - 1.0);
            // Near the top of a step use the upper tail 1 − X(y) = X(1 − y).
            let diff = if y1.min(y2) > 0.5 { bump_cdf(1.0 - y2) - bump_cdf(1.0 - y1) } else { bump_cdf(y1) - bump_cdf(y2) };
            if diff != 0.0 {
                acc += w / q * diff;
            }
        }
        p.f_amplitude * p.length_scale * acc
    }

    fn exponential(&self, s: f64) -> Jet {
        let p = &self.params;
        if s <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let g = p.h_rate * (p.length_scale / s).powf(p.h_power);
        let h = p.h_amplitude * (-g).exp();
        // d/ds of g = -p g / s
        let gs = p.h_power * g / s;
        let h1 = h * gs;
        let h2 = h * (gs * gs - (p.h_power + 1.0) * gs / s);
        (h, h1, h2)
    }

    /// Φ and derivatives (the pre-blend drop function).
    pub fn phi(&self, s: f64) -> Jet {
        let a = self.staircase(s);
        let b = self.exponential(s);
        (a.0 + b.0, a.1 + b.1, a.2 + b.2)
    }

    /// G(s) = blended drop, for s ∈ [0, π/2], so that r = a (1 − G).
    pub fn drop_jet(&self, s: f64) -> Jet {
        let p = &self.params;
        let s = s.clamp(0.0, FRAC_PI_2);
        let far = (1.0 - s.cos(), s.sin(), s.cos());
        if s >= p.blend_end {
            // 1 - cos s, written to keep precision near the pole too.
            let half = (0.5 * s).sin();
            return (2.0 * half * half, far.1, far.2);
        }
        let near = self.phi(s);
        if s <= p.blend_start {
            return near;
        }
        let width = p.blend_end - p.blend_start;
        let (b, b1, b2) = smooth_step((s - p.blend_start) / width);
        let (b1, b2) = (b1 / width, b2 / (width * width));
        let diff = far.0 - near.0;
        let v = near.0 + b * diff;
        let d = (1.0 - b) * near.1 + b * far.1 + b1 * diff;
        let dd = (1.0 - b) * near.2 + b * far.2 + 2.0 * b1 * (far.1 - near.1) + b2 * diff;
        (v, d, dd)
    }

    /// G(s1) − G(s2) with the staircase differenced term by term.
    pub fn drop_difference(&self, s1: f64, s2: f64) -> f64 {
        let p = &self.params;
        if s1.max(s2) <= p.blend_start {
            let h = self.exponential(s1).0 - self.exponential(s2).0;
            return self.staircase_difference(s1, s2) + h;
        }
        self.drop_jet(s1).0 - self.drop_jet(s2).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_normalized_and_symmetric() {
        assert!((bump_cdf(0.5) - 0.5).abs() < 1e-14);
        assert!((bump_cdf(0.3) + bump_cdf(0.7) - 1.0).abs() < 1e-14);
        let opts = QuadOptions { rel_tol: 1e-13, ..Default::default() };
        let total = integrate(bump, 0.0, 1.0, &opts).unwrap();
        assert!((total - 1.0).abs() < 1e-13);
        // relative accuracy deep in the left tail
        let tiny = bump_cdf(0.04);
        assert!(tiny > 0.0 && tiny < 1e-9);
        let direct = integrate(bump, 0.0, 0.04, &QuadOptions { rel_tol: 1e-12, abs_tol: 0.0, ..Default::default() }).unwrap();
        assert!(((tiny - direct) / direct).abs() < 1e-10);
    }

    #[test]
    fn cdf_table_matches_direct_quadrature() {
        let mut worst = 0.0f64;
        for i in 1..400 {
            let y = 0.0015 + 0.4985 * (i as f64 / 400.0).powi(2) + 1e-5 * (i as f64).sin();
            let (t, d) = (bump_cdf(y), bump_cdf_direct(y));
            worst = worst.max(((t - d) / d).abs());
        }
        assert!(worst < 1e-12, "{worst}");
        let mut worst_abs = 0.0f64;
        for i in 0..=20000 {
            let y = 0.3 + 0.4 * i as f64 / 20000.0;
            let d = if y <= 0.5 { bump_cdf_direct(y) } else { 1.0 - bump_cdf_direct(1.0 - y) };
            worst_abs = worst_abs.max((bump_cdf(y) - d).abs());
        }
        assert!(worst_abs < 1e-14, "{worst_abs}");
    }

    #[test]
    fn derivatives_are_consistent() {
        let shape = FlatShape::new(FlatEquatorParams::default());
        for s in [0.02, 0.07, 0.1, 0.3, 0.45, 0.95, 1.2, 1.5] {
            let h = 1e-6;
            let (v, d, dd) = shape.drop_jet(s);
            let (vp, dp, _) = shape.drop_jet(s + h);
            let (vm, dm, _) = shape.drop_jet(s - h);
            assert!(((vp - vm) / (2.0 * h) - d).abs() < 1e-6 * (1.0 + d.abs()), "G' at {s}");
            assert!(((dp - dm) / (2.0 * h) - dd).abs() < 1e-4 * (1.0 + dd.abs()), "G'' at {s}");
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn drop_is_increasing_and_flat_at_zero() {
        let shape = FlatShape::new(FlatEquatorParams::default());
        let mut prev = 0.0;
        for i in 1..=2000 {
            let s = FRAC_PI_2 * i as f64 / 2000.0;
            let d = shape.drop_jet(s).1;
            assert!(d > 0.0, "G' vanishes at {s}");
            assert!(shape.drop_difference(s, prev) > 0.0, "G not increasing at {s}");
            prev = s;
        }
        let (v, d, dd) = shape.drop_jet(3e-8);
        assert!(v == 0.0 && d == 0.0 && dd == 0.0);
    }

    #[test]
    fn plateau_differences_keep_the_small_term() {
        let shape = FlatShape::new(FlatEquatorParams::default());
        let s = 4f64.powi(-4);
        let diff = shape.drop_difference(s, 0.75 * s);
        let h = shape.exponential(s).0 - shape.exponential(0.75 * s).0;
        assert!(h > 0.0);
        assert!((diff - h).abs() < 1e-12 * h);
    }
}
