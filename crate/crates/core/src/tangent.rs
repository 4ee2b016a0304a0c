//! Tangent-line sets of graphs and Legendre duality.
//!
//! The tangent line of f at x is recorded as (slope, param) = (f′(x), x f′(x) − f(x)),
//! the line y = slope·x − param. On a piece where f′ is strictly monotone the
//! map slope ↦ param is the Legendre dual f*, and d(param)/d(slope) = x, so f is
//! recovered from its tangent lines by dualizing again.

use serde::Serialize;

use crate::error::{Result, RevspecError};
use crate::numeric::roots::polish_root;
use crate::numeric::spline::{CubicSpline, EndCondition};
use crate::spectral::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentLine {
    pub slope: f64,
    pub param: f64,
}

impl TangentLine {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x - self.param
    }
}

/// Tangent lines of f at the grid points; `f` returns (f(x), f′(x)).
pub fn tangent_set<F: Fn(f64) -> (f64, f64)>(f: F, grid: &[f64]) -> Vec<TangentLine> {
    grid.iter()
        .map(|&x| {
            let (v, d) = f(x);
            TangentLine { slope: d, param: x * d - v }
        })
        .collect()
}

/// Uniform grid of n points on [a, b].
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Solves f′(x) = y on [a, b] (f′ strictly monotone there) and returns
/// (f*(y), x) with f*(y) = x·y − f(x).
pub fn legendre_point<F: Fn(f64) -> (f64, f64)>(f: F, interval: (f64, f64), y: f64) -> Result<(f64, f64)> {
    let (a, b) = interval;
    let ga = f(a).1 - y;
    let gb = f(b).1 - y;
    if ga == 0.0 {
        return Ok((a * y - f(a).0, a));
    }
    if gb == 0.0 {
        return Ok((b * y - f(b).0, b));
    }
    if (ga < 0.0) == (gb < 0.0) || !ga.is_finite() || !gb.is_finite() {
        let (sa, sb) = (ga + y, gb + y);
        return Err(RevspecError::OutOfRange { value: y, lo: sa.min(sb), hi: sa.max(sb) });
    }
    let xtol = 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    let (x, _) = polish_root(|x| f(x).1 - y, a, b, xtol, 400);
    Ok((x * y - f(x).0, x))
}

pub fn legendre<F: Fn(f64) -> (f64, f64)>(f: F, interval: (f64, f64), y: f64) -> Result<f64> {
    legendre_point(f, interval, y).map(|(v, _)| v)
}

/// f* as an evaluable function, with (f*, f*′) = (x y − f(x), x) and the
/// slope interval f′(I) as its domain.
pub fn dual<F: Fn(f64) -> (f64, f64)>(f: F, interval: (f64, f64)) -> (impl Fn(f64) -> (f64, f64), (f64, f64)) {
    let (sa, sb) = (f(interval.0).1, f(interval.1).1);
    let dom = (sa.min(sb), sa.max(sb));
    let g = move |y: f64| legendre_point(&f, interval, y).unwrap_or((f64::NAN, f64::NAN));
    (g, dom)
}

/// An estimate of f built from its tangent lines on one monotone piece.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    dual: CubicSpline,
    /// Whether the fitted f*′ is monotone at the knots. When false the fit
    /// has wiggles and x(slope) is not single valued everywhere.
    pub derivative_monotone: bool,
    /// With fewer than four lines the fit is at most quadratic and the
    /// interpolation error is uncontrolled.
    pub underdetermined: bool,
}

/// Fits slope ↦ param by a not-a-knot cubic (an estimate of f*) and
/// dualizes it. Slopes must be strictly monotone in the given order.
pub fn reconstruct(lines: &[TangentLine]) -> Result<Reconstruction> {
    if lines.len() < 2 {
        return Err(RevspecError::NonMonotoneSlopes { index: lines.len() });
    }
    let increasing = lines[1].slope > lines[0].slope;
    for (i, w) in lines.windows(2).enumerate() {
        let ok = if increasing { w[1].slope > w[0].slope } else { w[1].slope < w[0].slope };
        if !ok || !w[1].slope.is_finite() {
            return Err(RevspecError::NonMonotoneSlopes { index: i + 1 });
        }
    }
    let mut pts: Vec<(f64, f64)> = lines.iter().map(|l| (l.slope, l.param)).collect();
    if !increasing {
        pts.reverse();
    }
    let (ys, ps): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let dual = CubicSpline::new(&ys, &ps, EndCondition::NotAKnot).ok_or(RevspecError::NonMonotoneSlopes { index: 0 })?;
    let xs: Vec<f64> = ys.iter().map(|&y| dual.eval(y).1).collect();
    let inc = xs.windows(2).all(|w| w[1] > w[0]);
    let dec = xs.windows(2).all(|w| w[1] < w[0]);
    Ok(Reconstruction { dual, derivative_monotone: inc || dec, underdetermined: lines.len() < 4 })
}

impl Reconstruction {
    /// The range of slopes covered.
    pub fn slope_range(&self) -> (f64, f64) {
        self.dual.domain()
    }

    /// The x-range on which f is estimated.
    pub fn domain(&self) -> (f64, f64) {
        let (a, b) = self.dual.domain();
        let (xa, xb) = (self.dual.eval(a).1, self.dual.eval(b).1);
        (xa.min(xb), xa.max(xb))
    }

    /// f*(slope) and x(slope) from the fit.
    pub fn dual_at(&self, slope: f64) -> (f64, f64) {
        let (v, d, _) = self.dual.eval(slope);
        (v, d)
    }

    /// (f(x), f′(x)) for x in [`Self::domain`].
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let (a, b) = self.dual.domain();
        let g = |y: f64| self.dual.eval(y).1 - x;
        let (ga, gb) = (g(a), g(b));
        let y = if ga == 0.0 {
            a
        } else if gb == 0.0 {
            b
        } else if (ga < 0.0) != (gb < 0.0) {
            polish_root(g, a, b, 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0), 400).0
        } else {
            let (lo, hi) = self.domain();
            return Err(RevspecError::OutOfRange { value: x, lo, hi });
        };
        Ok((x * y - self.dual.eval(y).0, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    Convex,
    Concave,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub kind: PieceKind,
}

/// Below this |f″| a sample is counted as affine.
pub const AFFINE_THRESHOLD: f64 = 1e-8;

/// Splits a grid into maximal runs of constant sign of f″ (given as
/// samples). Adjacent pieces share their boundary sample.
pub fn split_pieces(grid: &[f64], f2: &[f64]) -> Vec<Piece> {
    let kind = |v: f64| {
        if v.abs() < AFFINE_THRESHOLD {
            PieceKind::Affine
        } else if v > 0.0 {
            PieceKind::Convex
        } else {
            PieceKind::Concave
        }
    };
    let mut out: Vec<Piece> = Vec::new();
    for (i, (&x, &v)) in grid.iter().zip(f2).enumerate() {
        let k = kind(v);
        match out.last_mut() {
            Some(last) if last.kind == k => last.end = x,
            Some(last) => {
                let start = if i > 0 { grid[i - 1] } else { x };
                last.end = last.end.max(start);
                out.push(Piece { start, end: x, kind: k });
            }
            None => out.push(Piece { start: x, end: x, kind: k }),
        }
    }
    out
}

/// Whether `slope/(2π)` equals some p/q with q ≤ `q_max` (within `tol`).
pub fn is_rational_slope(slope: f64, q_max: u32, tol: f64) -> bool {
    let s = slope / std::f64::consts::TAU;
    (1..=q_max).any(|q| {
        let p = (s * q as f64).round();
        (s * q as f64 - p).abs() <= tol * q as f64
    })
}

/// Keeps only lines whose slope is a rational multiple of 2π with small denominator.
pub fn filter_rational_slopes(lines: &[TangentLine], q_max: u32, tol: f64) -> Vec<TangentLine> {
    lines.iter().copied().filter(|l| is_rational_slope(l.slope, q_max, tol)).collect()
}

/// Tangent lines of f at the points where f′ = 2πp/q, q ≤ `q_max`, on a
/// monotone piece [a, b]; sorted by slope.
pub fn rational_slope_lines<F: Fn(f64) -> (f64, f64)>(f: F, interval: (f64, f64), q_max: u32) -> Vec<TangentLine> {
    let (sa, sb) = (f(interval.0).1, f(interval.1).1);
    let (lo, hi) = (sa.min(sb), sa.max(sb));
    let tau = std::f64::consts::TAU;
    let mut slopes: Vec<f64> = Vec::new();
    for q in 1..=q_max {
        let pmin = (lo / tau * q as f64).ceil() as i64;
        let pmax = (hi / tau * q as f64).floor() as i64;
        for p in pmin..=pmax {
            if gcd(p.unsigned_abs(), q as u64) == 1 {
                slopes.push(tau * p as f64 / q as f64);
            }
        }
    }
    slopes.sort_by(f64::total_cmp);
    slopes.dedup();
    slopes
        .into_iter()
        .filter_map(|y| legendre_point(&f, interval, y).ok().map(|(v, _)| TangentLine { slope: y, param: v }))
        .collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Tangent lines of the generating function read off a length spectrum:
/// each length L of type (p, q) gives the line of slope 2πp/q with
/// param L/(q·r_max). Sorted by slope.
pub fn lines_from_spectrum(spectrum: &Spectrum, r_max: f64) -> Vec<TangentLine> {
    let mut out: Vec<TangentLine> = spectrum
        .entries
        .iter()
        .flat_map(|e| {
            let slope = std::f64::consts::TAU * e.p as f64 / e.q as f64;
            e.lengths.iter().map(move |l| TangentLine { slope, param: l / (e.q as f64 * r_max) })
        })
        .collect();
    out.sort_by(|a, b| a.slope.total_cmp(&b.slope).then(a.param.total_cmp(&b.param)));
    out
}

/// sup over the common slope range of the distance between the two fitted
/// dual graphs; `None` if the slope ranges do not overlap.
pub fn dual_distance(a: &Reconstruction, b: &Reconstruction, samples: usize) -> Option<f64> {
    let (a0, a1) = a.slope_range();
    let (b0, b1) = b.slope_range();
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if !(hi > lo) {
        return None;
    }
    Some(uniform_grid(lo, hi, samples.max(2)).into_iter().map(|y| (a.dual_at(y).0 - b.dual_at(y).0).abs()).fold(0.0, f64::max))
}

/// Strictly convex test functions on their intervals, as (name, f, interval).
pub fn convex_panel() -> Vec<(&'static str, fn(f64) -> (f64, f64), (f64, f64))> {
    vec![
        ("square", |x| (x * x, 2.0 * x), (-1.0, 1.0)),
        ("half_square", |x| (0.5 * x * x, x), (-2.0, 2.0)),
        ("exp", |x| (x.exp(), x.exp()), (-2.0, 2.0)),
        ("cosh", |x| (x.cosh(), x.sinh()), (-1.5, 1.5)),
        ("quartic_plus", |x| (x.powi(4) + x * x, 4.0 * x.powi(3) + 2.0 * x), (-1.0, 1.0)),
        ("neg_log", |x| (-x.ln(), -1.0 / x), (0.5, 3.0)),
        ("softplus", |x| ((1.0 + x.exp()).ln(), 1.0 / (1.0 + (-x).exp())), (-3.0, 3.0)),
    ]
}

pub fn panel_function(name: &str) -> Option<(fn(f64) -> (f64, f64), (f64, f64))> {
    convex_panel().into_iter().find(|(n, _, _)| *n == name).map(|(_, f, i)| (f, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_examples() {
        let l = tangent_set(|x| (x * x, 2.0 * x), &[0.5]);
        assert_eq!(l[0], TangentLine { slope: 1.0, param: 0.25 });
        let l = tangent_set(|x| (3.0 * x - 2.0, 3.0), &[-1.0, 0.0, 0.7]);
        assert!(l.iter().all(|t| (t.slope - 3.0).abs() < 1e-15 && (t.param - 2.0).abs() < 1e-15));
        let l = tangent_set(|x| (x.powi(3), 3.0 * x * x), &[0.0]);
        assert_eq!(l[0], TangentLine { slope: 0.0, param: 0.0 });
    }

    #[test]
    fn legendre_examples() {
        assert!((legendre(|x| (0.5 * x * x, x), (-3.0, 3.0), 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((legendre(|x| (x.exp(), x.exp()), (-2.0, 2.0), 1.0).unwrap() + 1.0).abs() < 1e-14);
        assert_eq!(legendre(|x| (x.exp(), x.exp()), (-2.0, 2.0), 100.0).unwrap_err().name(), "OutOfRange");
    }

    #[test]
    fn involution_on_panel() {
        for (name, f, (a, b)) in convex_panel() {
            let (fs, _) = dual(f, (a, b));
            for x in uniform_grid(a + 0.05 * (b - a), b - 0.05 * (b - a), 32) {
                let v = legendre(&fs, (f(a).1, f(b).1), x).unwrap();
                assert!((v - f(x).0).abs() < 1e-9, "{name} at {x}: {v} vs {}", f(x).0);
            }
        }
    }

    #[test]
    fn reconstruct_square() {
        let grid = uniform_grid(-1.0, 1.0, 64);
        let r = reconstruct(&tangent_set(|x| (x * x, 2.0 * x), &grid)).unwrap();
        for x in uniform_grid(-0.9, 0.9, 101) {
            assert!((r.eval(x).unwrap().0 - x * x).abs() < 1e-6);
        }
        let concave = reconstruct(&tangent_set(|x| (-x.exp(), -x.exp()), &uniform_grid(-1.0, 1.0, 64))).unwrap();
        assert!((concave.eval(0.3).unwrap().0 + 0.3f64.exp()).abs() < 1e-8);
        let two = reconstruct(&tangent_set(|x| (x * x, 2.0 * x), &[0.0, 1.0])).unwrap();
        assert!(two.underdetermined);
        let bad = tangent_set(|x| (x.powi(3), 3.0 * x * x), &uniform_grid(-1.0, 1.0, 8));
        assert!(matches!(reconstruct(&bad), Err(RevspecError::NonMonotoneSlopes { .. })));
    }

    #[test]
    fn pieces_of_a_cubic() {
        let grid = uniform_grid(-1.0, 1.0, 21);
        let f2: Vec<f64> = grid.iter().map(|x| 6.0 * x).collect();
        let p = split_pieces(&grid, &f2);
        assert_eq!(p.iter().map(|p| p.kind).collect::<Vec<_>>(), [PieceKind::Concave, PieceKind::Affine, PieceKind::Convex]);
        assert_eq!((p[0].start, p[2].end), (-1.0, 1.0));
    }

    #[test]
    fn rational_lines_reconstruct() {
        let f = |x: f64| (x * x * 10.0, 20.0 * x);
        let lines = rational_slope_lines(f, (0.0, 1.0), 6);
        assert!(lines.iter().all(|l| is_rational_slope(l.slope, 6, 1e-12)));
        let r = reconstruct(&lines).unwrap();
        assert!((r.eval(0.5).unwrap().0 - 2.5).abs() < 1e-9);
        assert_eq!(filter_rational_slopes(&tangent_set(f, &[0.01, std::f64::consts::PI / 20.0]), 6, 1e-12).len(), 1);
    }

    proptest::proptest! {
        #[test]
        fn distinct_functions_have_distinct_duals(c in 0.1f64..2.0) {
            let g = uniform_grid(-1.0, 1.0, 64);
            let a = reconstruct(&tangent_set(|x| (x * x, 2.0 * x), &g)).unwrap();
            let b = reconstruct(&tangent_set(move |x| (x * x + c * x.powi(4), 2.0 * x + 4.0 * c * x.powi(3)), &g)).unwrap();
            proptest::prop_assert!(dual_distance(&a, &b, 200).unwrap() > 1e-6);
        }
    }
}
