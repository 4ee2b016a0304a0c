//! Abel transform 𝒜f(y) = ∫_y^1 f(x)/√(x − y) dx and the closed forms of the
//! return data built from it.
//!
//! With C = r_max cos β the Clairaut constant of a section point and
//! k(u) = σ_S′(ρ) − σ_N′(ρ) at ρ = r_max√u (derivatives of the partial
//! inverses), the return time and angle shift are
//!
//! τ = r_max · 𝒜k(cos²β),   Θ = cos β · 𝒜(k/u)(cos²β).
//!
//! When the equator has positive curvature, k ~ 1/√(1 − u) at u = 1. The
//! substitution x = y + (1 − y) sin²φ removes both square-root endpoints at
//! once: dx/√(x − y) = 2√(1 − y) cos φ dφ and √(1 − x) = √(1 − y) cos φ.
//!
//! When the equator curvature vanishes the kernel is no longer of that type
//! (it has tall narrow spikes wherever r′ is nearly zero), so the same
//! integrals are evaluated after changing variables from u back to σ:
//!
//! τ = 2∫ r/√(r² − C²) dσ,   Θ = 2C ∫ dσ / (r√(r² − C²)),
//!
//! over {r ≥ |C|}, with σ = σ_e ∓ w² at each turning point σ_e.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Result, RevspecError};
use crate::numeric::quadrature::{integrate, integrate_vec, QuadOptions};
use crate::profile::{Branch, ProfileFunction, ProfileKind};

/// Distance of β from 0 or π inside which closed forms are refused on
/// profiles with a flat equator.
pub const BETA_FLAT_GUARD: f64 = 1e-6;

fn abel_opts() -> QuadOptions {
    QuadOptions { rel_tol: 1e-10, abs_tol: 1e-15, ..Default::default() }
}

fn closed_form_opts() -> QuadOptions {
    QuadOptions { rel_tol: 1e-12, abs_tol: 1e-15, max_panels: 10_000, initial_panels: 4 }
}

/// Closed-form quadrature at 1e-12, retried at 1e-9 when roundoff in the
/// kernel (tiny β, where the u-interval has width sin²β) makes the tighter
/// request unreachable.
fn integrate_closed<const N: usize, F: Fn(f64) -> [f64; N]>(g: F, a: f64, b: f64) -> Result<[f64; N]> {
    match integrate_vec(&g, a, b, &[], &closed_form_opts()) {
        Ok(est) => Ok(est.value),
        Err(RevspecError::QuadratureFailure { .. }) => {
            Ok(integrate_vec(&g, a, b, &[], &QuadOptions { rel_tol: 1e-9, ..closed_form_opts() })?.value)
        }
        Err(e) => Err(e),
    }
}

/// The σ-form integrand loses a few digits where r is close to C, so it
/// is held to a slightly looser tolerance.
fn sigma_form_opts() -> QuadOptions {
    QuadOptions { rel_tol: 1e-10, initial_panels: 1, ..closed_form_opts() }
}

fn check_y(y: f64) -> Result<()> {
    if !(y >= 0.0 && y < 1.0) {
        return Err(RevspecError::DomainError { detail: format!("y = {y} is not in [0, 1)") });
    }
    Ok(())
}

/// 𝒜f(y), with x = y + s² so that the integrand becomes 2 f(y + s²).
/// `breakpoints` are x-values where f is not smooth.
pub fn abel_transform_with<F: Fn(f64) -> f64>(f: F, y: f64, breakpoints: &[f64]) -> Result<f64> {
    check_y(y)?;
    let top = (1.0 - y).sqrt();
    let bps: Vec<f64> = breakpoints.iter().filter(|&&b| b > y && b < 1.0).map(|b| (b - y).sqrt()).collect();
    let est = integrate_vec(|s| [2.0 * f(y + s * s)], 0.0, top, &bps, &abel_opts())?;
    Ok(est.value[0])
}

/// 𝒜f(y) for f smooth on (y, 1].
pub fn abel_transform<F: Fn(f64) -> f64>(f: F, y: f64) -> Result<f64> {
    abel_transform_with(f, y, &[])
}

/// 𝒜f(y) for f with an inverse square-root singularity at 1. `f` receives
/// (x, 1 − x) so that the second argument keeps full precision.
pub fn abel_transform_endpoint<F: Fn(f64, f64) -> f64>(f: F, y: f64) -> Result<f64> {
    check_y(y)?;
    let a = 1.0 - y;
    let g = |phi: f64| {
        let (s, c) = phi.sin_cos();
        let x = y + a * s * s;
        [2.0 * a.sqrt() * c * f(x, a * c * c)]
    };
    Ok(integrate_vec(g, 0.0, FRAC_PI_2, &[], &abel_opts())?.value[0])
}

/// |𝒜(𝒜f)(y) − π ∫_y^1 f|.
pub fn abel_square_residual<F: Fn(f64) -> f64>(f: F, y: f64, breakpoints: &[f64]) -> Result<f64> {
    check_y(y)?;
    let inner = |x: f64| {
        if x >= 1.0 {
            return 0.0;
        }
        abel_transform_with(&f, x, breakpoints).unwrap_or(f64::NAN)
    };
    let lhs = abel_transform_with(inner, y, breakpoints)?;
    if !lhs.is_finite() {
        return Err(RevspecError::QuadratureFailure { estimate: f64::NAN });
    }
    let mut cuts: Vec<f64> = vec![y];
    cuts.extend(breakpoints.iter().copied().filter(|&b| b > y && b < 1.0));
    cuts.push(1.0);
    let mut rhs = 0.0;
    for w in cuts.windows(2) {
        rhs += integrate(&f, w[0], w[1], &abel_opts())?;
    }
    Ok((lhs - std::f64::consts::PI * rhs).abs())
}

/// k at u with 1 − u supplied separately: 1/r′(σ_S) − 1/r′(σ_N) at the two
/// points of drop r_max(1 − √u).
fn kernel_at(p: &ProfileFunction, u: f64, one_minus_u: f64) -> f64 {
    let d = p.r_max() * one_minus_u / (1.0 + u.sqrt());
    let (_, s) = p.branch_point(d, Branch::South);
    let (_, n) = p.branch_point(d, Branch::North);
    1.0 / s.dr - 1.0 / n.dr
}

/// The kernel u ↦ (σ_S′ − σ_N′)(r_max√u).
pub fn kernel(p: &ProfileFunction, u: f64) -> f64 {
    kernel_at(p, u, 1.0 - u)
}

/// Return time and angle shift of a section point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnData {
    pub tau: f64,
    pub theta: f64,
}

/// True when the closed forms must avoid the kernel and work in σ.
pub fn uses_sigma_form(p: &ProfileFunction) -> bool {
    p.is_flat_equator() || p.smoothness_unverified_at_midpoint()
}

fn check_beta(p: &ProfileFunction, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < std::f64::consts::PI) || beta == FRAC_PI_2 {
        return Err(RevspecError::DomainError { detail: format!("beta = {beta} is not in (0, pi) minus pi/2") });
    }
    if uses_sigma_form(p) && beta.min(std::f64::consts::PI - beta) < BETA_FLAT_GUARD {
        return Err(RevspecError::KernelSingularity {
            detail: format!("flat equator: beta = {beta} is within {BETA_FLAT_GUARD} of the section boundary"),
        });
    }
    Ok(())
}

/// τ(β) and Θ(β) from the closed forms.
pub fn return_data_closed_form(p: &ProfileFunction, beta: f64) -> Result<ReturnData> {
    check_beta(p, beta)?;
    let cb = beta.cos();
    if uses_sigma_form(p) {
        let c = p.r_max() * cb.abs();
        let n = sigma_arc(p, c, Branch::North, None)?;
        let s = sigma_arc(p, c, Branch::South, None)?;
        let theta = 2.0 * (n.theta + s.theta);
        return Ok(ReturnData { tau: 2.0 * (n.length + s.length), theta: if cb < 0.0 { -theta } else { theta } });
    }
    let y = cb * cb;
    let a = 1.0 - y;
    let ra = a.sqrt();
    let g = |phi: f64| {
        let (s, c) = phi.sin_cos();
        let x = y + a * s * s;
        let w = 2.0 * ra * c * kernel_at(p, x, a * c * c);
        [w, w / x]
    };
    let value = integrate_closed(g, 0.0, FRAC_PI_2)?;
    Ok(ReturnData { tau: p.r_max() * value[0], theta: cb * value[1] })
}

pub fn return_time_closed_form(p: &ProfileFunction, beta: f64) -> Result<f64> {
    Ok(return_data_closed_form(p, beta)?.tau)
}

pub fn angle_shift_closed_form(p: &ProfileFunction, beta: f64) -> Result<f64> {
    Ok(return_data_closed_form(p, beta)?.theta)
}

/// Length, θ-shift and discrepancy accumulated along part of a half-arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    pub length: f64,
    pub theta: f64,
    /// θ-shift − (C/r_max²)·length, computed without cancellation.
    pub discrepancy: f64,
}

/// Integrals over σ between the equator and the point of drop `d_end` on
/// `branch`, for the geodesic with Clairaut constant c (0 < c < r_max).
/// `d_end = None` means up to the turning point.
fn sigma_arc(p: &ProfileFunction, c: f64, branch: Branch, d_end: Option<f64>) -> Result<Arc> {
    let dc = p.r_max() - c;
    let (se, _) = p.branch_point(dc, branch);
    let sign = match branch {
        Branch::North => 1.0,
        Branch::South => -1.0,
    };
    let w_lo = match d_end {
        None => 0.0,
        Some(d) if d >= dc => 0.0,
        Some(d) => (sign * (se - p.branch_point(d, branch).0)).max(0.0).sqrt(),
    };
    sigma_arc_from(p, se, c, branch, w_lo)
}

/// As [`sigma_arc`], with the turning point σ_e given. c should be r(σ_e).
fn sigma_arc_from(p: &ProfileFunction, se: f64, c: f64, branch: Branch, w_lo: f64) -> Result<Arc> {
    let rm = p.r_max();
    let sm = p.sigma_max();
    let sign = match branch {
        Branch::North => 1.0,
        Branch::South => -1.0,
    };
    // σ = σ_e − sign·w², w from w_lo to w_hi (at the equator).
    let w_hi = (sign * (se - sm)).max(0.0).sqrt();
    // Very close to σ_e the computed gap r(σ) − r(σ_e) is mostly roundoff;
    // there its Taylor expansion in w² is used instead.
    let ve = p.eval(se);
    let (a1, a2) = (-sign * ve.dr, 0.5 * ve.d2r);
    let g = |w: f64| {
        let sigma = se - sign * w * w;
        let v = p.eval(sigma);
        let drop = p.drop_at(sigma);
        let w2 = w * w;
        let gap = if a1 > 0.0 && a1 * w2 < 1e-8 * rm && a2.abs() * w2 < 1e-4 * a1 {
            w2 * (a1 + a2 * w2)
        } else if ve.r < 0.5 * rm {
            // Near a pole both radii are small and their difference is exact
            // to working precision; going through drops would lose it.
            (v.r - ve.r).max(0.0)
        } else {
            p.drop_difference(se, sigma).max(0.0)
        };
        let root = (gap * (v.r + c)).sqrt();
        if root == 0.0 || !root.is_finite() {
            return [0.0; 3];
        }
        let jac = 2.0 * w;
        [jac * v.r / root, jac * c / (v.r * root), jac * c / (rm * rm) * drop * (2.0 * rm - drop) / (v.r * root)]
    };
    let bps = sigma_breakpoints(p, se, sign, w_lo, w_hi);
    let est = match integrate_vec(g, w_lo, w_hi, &bps, &sigma_form_opts()) {
        // A turning point next to a pole is located in σ only to about
        // ε·m, a relative error of ε·m/c in r there.
        Err(RevspecError::QuadratureFailure { .. }) if c < 1e-3 * rm => {
            let floor = 16.0 * f64::EPSILON * p.m() / c;
            integrate_vec(g, w_lo, w_hi, &bps, &QuadOptions { rel_tol: floor.max(1e-10), ..sigma_form_opts() })?
        }
        other => other?,
    };
    Ok(Arc { length: est.value[0], theta: est.value[1], discrepancy: est.value[2] })
}

/// Breakpoints for the σ-form integrand in w. Near a turning point where r′
/// is tiny the integrand behaves like 1/w down to a very small scale, so the
/// interval is cut geometrically towards w_lo; on the flat-equator profile
/// the ends of the staircase plateaus are added as well.
fn sigma_breakpoints(p: &ProfileFunction, se: f64, sign: f64, w_lo: f64, w_hi: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (1..=60).map(|i| w_lo + (w_hi - w_lo) * 0.5f64.powi(i)).collect();
    if let ProfileKind::FlatEquator(shape) = p.kind() {
        let scale = p.r_max() * shape.params.length_scale;
        for j in 1..=shape.params.j_max as i32 + 1 {
            for knot in [scale * 4f64.powi(-j), 0.5 * scale * 4f64.powi(-j), 0.75 * scale * 4f64.powi(-j)] {
                let sigma = p.sigma_max() + sign * knot;
                let w2 = sign * (se - sigma);
                if w2 > 0.0 {
                    out.push(w2.sqrt());
                }
            }
        }
    }
    out.retain(|w| *w > w_lo && *w < w_hi);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Length and θ-shift from the section point with angle β0 ∈ (0, π/2) to the
/// point where ρ = r_max√u_end on the northern half, as Abel-type integrals
/// with the σ_N′ kernel over [u_end, 1]. At u_end = cos²β0 this is the arc
/// up to the first turning point.
pub fn arc_integrals(p: &ProfileFunction, beta0: f64, u_end: f64) -> Result<(f64, f64)> {
    if !(beta0 > 0.0 && beta0 < FRAC_PI_2) {
        return Err(RevspecError::DomainError { detail: format!("beta0 = {beta0} is not in (0, pi/2)") });
    }
    let cb = beta0.cos();
    let y = cb * cb;
    if !(u_end >= y * (1.0 - 1e-14) && u_end <= 1.0) {
        return Err(RevspecError::DomainError { detail: format!("u_end = {u_end} is not in [{y}, 1]") });
    }
    let u_end = u_end.max(y);
    if u_end == 1.0 {
        return Ok((0.0, 0.0));
    }
    if uses_sigma_form(p) {
        let d_end = p.r_max() * (1.0 - u_end) / (1.0 + u_end.sqrt());
        let arc = sigma_arc(p, p.r_max() * cb, Branch::North, Some(d_end))?;
        return Ok((arc.length, arc.theta));
    }
    let a = 1.0 - y;
    let phi0 = ((u_end - y) / a).sqrt().min(1.0).asin();
    let rm = p.r_max();
    let g = |phi: f64| {
        let (s, c) = phi.sin_cos();
        let x = y + a * s * s;
        let d = rm * a * c * c / (1.0 + x.sqrt());
        let kn = -1.0 / p.branch_point(d, Branch::North).1.dr;
        let w = 2.0 * a.sqrt() * c * kn;
        [w, w / x]
    };
    let value = integrate_closed(g, phi0, FRAC_PI_2)?;
    Ok((0.5 * rm * value[0], 0.5 * cb * value[1]))
}

/// The arc from the section point with angle β0 to its first turning point,
/// integrated in σ. Works for any equator curvature, including flat ones,
/// and returns Δ(τ₁(β0), β0) without cancellation.
pub fn turning_arc(p: &ProfileFunction, beta0: f64) -> Result<Arc> {
    if !(beta0 > 0.0 && beta0 < FRAC_PI_2) {
        return Err(RevspecError::DomainError { detail: format!("beta0 = {beta0} is not in (0, pi/2)") });
    }
    sigma_arc(p, p.r_max() * beta0.cos(), Branch::North, None)
}

/// Turning arc at Clairaut drop D = r_max − C, for drops too small to be
/// represented through cos β.
pub fn turning_arc_at_drop(p: &ProfileFunction, drop: f64) -> Result<Arc> {
    if !(drop > 0.0 && drop < p.r_max()) {
        return Err(RevspecError::DomainError { detail: format!("drop = {drop} is not in (0, r_max)") });
    }
    sigma_arc(p, p.r_max() - drop, Branch::North, None)
}

/// Turning arc of the geodesic whose turning point is σ_e > σ_max. On a
/// nearly flat stretch of the profile the turning point is far better
/// determined by σ_e than by the Clairaut constant.
pub fn turning_arc_at_sigma(p: &ProfileFunction, sigma_e: f64) -> Result<Arc> {
    let sm = p.sigma_max();
    if !(sigma_e > sm && sigma_e < p.m()) {
        return Err(RevspecError::DomainError { detail: format!("sigma_e = {sigma_e} is not in ({sm}, m)") });
    }
    let c = p.r_max() - p.drop_at(sigma_e);
    sigma_arc_from(p, sigma_e, c, Branch::North, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::builtins;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn transform_examples() {
        for y in [0.0, 0.3, 0.9] {
            assert!((abel_transform(|_| 1.0, y).unwrap() - 2.0 * (1.0 - y).sqrt()).abs() < 1e-12);
        }
        assert!((abel_transform(|x| x, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        for c in [0.1, 0.5, 0.8] {
            let v = abel_transform_endpoint(|_, om| 1.0 / om.sqrt(), c * c).unwrap();
            assert!((v - PI).abs() < 1e-11, "{v}");
        }
        assert!(abel_transform(|x| x, 1.0).is_err());
        assert!(abel_transform(|x| x, -0.1).is_err());
    }

    #[test]
    fn square_identity_on_smooth_and_broken_kernels() {
        assert!(abel_square_residual(|_| 1.0, 0.0, &[]).unwrap() < 1e-8);
        assert!(abel_square_residual(|x| x * x, 0.25, &[]).unwrap() < 1e-8);
        let step = |x: f64| if x < 0.5 { 1.0 } else { 2.0 };
        assert!(abel_square_residual(step, 0.1, &[0.5]).unwrap() < 1e-6);
    }

    #[test]
    fn round_sphere_closed_forms() {
        let p = builtins::round();
        for beta in [PI / 3.0, PI / 5.0, 0.01, 1.5, 2.5] {
            let r = return_data_closed_form(&p, beta).unwrap();
            assert!((r.tau - TAU).abs() < 1e-10, "{beta}: {r:?}");
            let expect = if beta < FRAC_PI_2 { TAU } else { -TAU };
            assert!((r.theta - expect).abs() < 1e-10, "{beta}: {r:?}");
        }
        let (len, th) = arc_integrals(&p, PI / 3.0, 0.25).unwrap();
        assert!((len - FRAC_PI_2).abs() < 1e-10 && (th - FRAC_PI_2).abs() < 1e-10);
        assert_eq!(arc_integrals(&p, PI / 3.0, 1.0).unwrap(), (0.0, 0.0));
        let arc = turning_arc(&p, PI / 3.0).unwrap();
        assert!((arc.length - FRAC_PI_2).abs() < 1e-10 && (arc.discrepancy - 0.25 * PI).abs() < 1e-10);
    }

    #[test]
    fn meridian_limit() {
        let p = builtins::two_harmonic_deformed();
        let r = return_time_closed_form(&p, FRAC_PI_2 - 1e-7).unwrap();
        assert!((r - 2.0 * p.m()).abs() < 1e-5);
    }

    #[test]
    fn sigma_form_agrees_with_kernel_form() {
        for p in builtins::positive_curvature_panel() {
            for beta in [0.2, 0.7, 1.2] {
                let a = return_data_closed_form(&p, beta).unwrap();
                let c = p.r_max() * beta.cos();
                let n = sigma_arc(&p, c, Branch::North, None).unwrap();
                let s = sigma_arc(&p, c, Branch::South, None).unwrap();
                assert!((a.tau - 2.0 * (n.length + s.length)).abs() < 1e-9, "{}", p.kind_name());
                assert!((a.theta - 2.0 * (n.theta + s.theta)).abs() < 1e-9, "{}", p.kind_name());
                let (len, th) = arc_integrals(&p, beta, beta.cos().powi(2)).unwrap();
                assert!((len - n.length).abs() < 1e-9 && (th - n.theta).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deformation_leaves_return_data_unchanged() {
        let base = builtins::two_harmonic();
        let def = builtins::two_harmonic_deformed();
        for i in 1..=16 {
            let beta = 0.05 + 1.4 * i as f64 / 16.0;
            let a = return_data_closed_form(&base, beta).unwrap();
            let b = return_data_closed_form(&def, beta).unwrap();
            assert!((a.tau - b.tau).abs() < 1e-8 && (a.theta - b.theta).abs() < 1e-8);
        }
    }

    #[test]
    fn flat_equator_guard() {
        let p = builtins::flat_equator();
        let e = return_data_closed_form(&p, 1e-7).unwrap_err();
        assert_eq!(e.name(), "KernelSingularity");
        assert!(return_data_closed_form(&p, 0.01).is_ok());
        assert!(return_data_closed_form(&p, 0.5).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn transform_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, y in 0.0f64..0.95) {
            let f = |x: f64| (3.0 * x).sin();
            let g = |x: f64| x.exp() - x * x;
            let lhs = abel_transform(|x| a * f(x) + b * g(x), y).unwrap();
            let rhs = a * abel_transform(f, y).unwrap() + b * abel_transform(g, y).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
