//! Gauss–Legendre rules and a globally adaptive integrator.
//!
//! Each panel is evaluated with the 15- and 31-point rules; their difference
//! is the panel's error estimate, and the panel with the largest estimate is
//! halved until the total estimate meets the tolerance or the panel budget
//! runs out.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Result, RevspecError};

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the n-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Applies the rule on [a, b] to a vector-valued integrand.
    pub fn apply<const N: usize, F>(&self, f: &F, a: f64, b: f64) -> [f64; N]
    where
        F: Fn(f64) -> [f64; N],
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [0.0; N];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            for k in 0..N {
                acc[k] += w * v[k];
            }
        }
        for a in acc.iter_mut() {
            *a *= half;
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static G15: OnceLock<GaussLegendre> = OnceLock::new();
    static G20: OnceLock<GaussLegendre> = OnceLock::new();
    static G31: OnceLock<GaussLegendre> = OnceLock::new();
    match n {
        15 => G15.get_or_init(|| GaussLegendre::new(15)),
        20 => G20.get_or_init(|| GaussLegendre::new(20)),
        31 => G31.get_or_init(|| GaussLegendre::new(31)),
        _ => panic!("no cached Gauss-Legendre rule of order {n}"),
    }
}

/// Controls for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of panels ever evaluated.
    pub max_panels: usize,
    /// Number of equal panels the interval is cut into before adapting.
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, max_panels: 10_000, initial_panels: 4 }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
    pub panels: usize,
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn eval_panel<const N: usize, F>(f: &F, a: f64, b: f64) -> Result<Panel<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let lo = gauss_legendre(15).apply(f, a, b);
    let hi = gauss_legendre(31).apply(f, a, b);
    let mut error = 0.0f64;
    for k in 0..N {
        if !hi[k].is_finite() {
            return Err(RevspecError::QuadratureFailure { estimate: f64::INFINITY });
        }
        error = error.max((hi[k] - lo[k]).abs());
    }
    Ok(Panel { a, b, value: hi, error })
}

/// Integrates a vector-valued function over [a, b] (breakpoints optional).
///
/// The tolerance test is `error <= max(abs_tol, rel_tol * max_k |value_k|)`.
pub fn integrate_vec<const N: usize, F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if a == b {
        return Ok(Estimate { value: [0.0; N], error: 0.0, panels: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(hi);

    let mut heap = BinaryHeap::new();
    let mut panels = 0usize;
    for w in cuts.windows(2) {
        let n0 = opts.initial_panels.max(1);
        let h = (w[1] - w[0]) / n0 as f64;
        for i in 0..n0 {
            let pa = w[0] + h * i as f64;
            let pb = if i + 1 == n0 { w[1] } else { pa + h };
            heap.push(eval_panel(&f, pa, pb)?);
            panels += 1;
        }
    }

    let mut total = [0.0; N];
    let mut error = 0.0;
    for p in heap.iter() {
        for k in 0..N {
            total[k] += p.value[k];
        }
        error += p.error;
    }
    loop {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if error <= opts.abs_tol.max(opts.rel_tol * scale) {
            // Re-sum from scratch so running-update drift does not leak out.
            let mut value = [0.0; N];
            for p in heap.iter() {
                for k in 0..N {
                    value[k] += p.value[k];
                }
            }
            for v in value.iter_mut() {
                *v *= sign;
            }
            return Ok(Estimate { value, error, panels });
        }
        if panels + 2 > opts.max_panels {
            return Err(RevspecError::QuadratureFailure { estimate: error });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(RevspecError::QuadratureFailure { estimate: error });
        }
        let left = eval_panel(&f, worst.a, mid)?;
        let right = eval_panel(&f, mid, worst.b)?;
        for k in 0..N {
            total[k] += left.value[k] + right.value[k] - worst.value[k];
        }
        error = (error + left.error + right.error - worst.error).max(0.0);
        heap.push(left);
        heap.push(right);
        panels += 2;
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|x| [f(x)], a, b, &[], opts).map(|e| e.value[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [15usize, 20, 31] {
            let g = gauss_legendre(n);
            let sum: f64 = g.weights.iter().sum();
            assert!((sum - 2.0).abs() < 1e-14, "weights of order {n}");
            // degree 2n-1 is exact
            let deg = 2 * n as i32 - 2;
            let v = g.apply(&|x: f64| [x.powi(deg)], -1.0, 1.0)[0];
            assert!((v - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_sqrt() {
        let v = integrate(|x| x.sqrt(), 0.0, 1.0, &QuadOptions::default()).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_handles_interior_kink_and_reversed_limits() {
        let v = integrate(|x| (x - 0.3).abs(), 1.0, 0.0, &QuadOptions::default()).unwrap();
        assert!((v + (0.3 * 0.3 + 0.7 * 0.7) / 2.0).abs() < 1e-11);
    }

    #[test]
    fn vector_integrand_shares_evaluations() {
        let e = integrate_vec(|x| [x.sin(), x.cos()], 0.0, PI, &[], &QuadOptions::default()).unwrap();
        assert!((e.value[0] - 2.0).abs() < 1e-13);
        assert!(e.value[1].abs() < 1e-13);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions { max_panels: 8, ..Default::default() };
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &QuadOptions { rel_tol: 1e-15, ..opts });
        assert!(matches!(r, Err(RevspecError::QuadratureFailure { .. })));
    }
}
