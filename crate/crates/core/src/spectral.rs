//! Generating function, marked length spectrum and the isospectrality test.
//!
//! Section points are parametrized by η = cos β ∈ (−1, 1). On (0, 1) the
//! generating function satisfies F′(η) = Θ(η) and F(η) = ηF′(η) − τ(η)/r_max.
//! For η < 0 the raw angle shift of the ODE (negative, since the geodesic
//! runs westward) is shifted by 4π; this is the lift in which F′ is
//! continuous through the meridian value F′(0) = 2π, and it gives
//! F′(−η) = 4π − F′(η).
//!
//! A closed geodesic of type (p, q) sits at a root of F′(η) = 2πp/q and
//! has length q·τ(η) = r_max·q·(ηF′(η) − F(η)).

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::abel::{self, ReturnData};
use crate::error::{Result, RevspecError};
use crate::flow::{self, FlowOptions};
use crate::numeric::par::{self, Execution};
use crate::numeric::roots::polish_root;
use crate::profile::{Branch, ProfileFunction, ProfileKind};

/// How a sample of the return data was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Ode,
    Meridian,
}

/// τ and Θ at a section angle: the closed form when it is usable, the ODE
/// (with a raised time cap) otherwise.
pub fn return_sample(p: &ProfileFunction, beta: f64, opts: &FlowOptions) -> Result<(ReturnData, Provenance)> {
    if beta == std::f64::consts::FRAC_PI_2 {
        return Ok((ReturnData { tau: 2.0 * p.m(), theta: TAU }, Provenance::Meridian));
    }
    match abel::return_data_closed_form(p, beta) {
        Ok(r) => Ok((r, Provenance::ClosedForm)),
        Err(RevspecError::KernelSingularity { .. }) | Err(RevspecError::QuadratureFailure { .. }) => {
            let mut o = *opts;
            o.tau_cap = Some(opts.tau_cap.unwrap_or(1e6 * p.m()));
            let r = flow::first_return(p, beta, &o)?;
            Ok((ReturnData { tau: r.tau, theta: r.theta }, Provenance::Ode))
        }
        Err(e) => Err(e),
    }
}

/// F′(η) and τ(η) at a single point, continuous in η.
pub fn generating_point(p: &ProfileFunction, eta: f64, opts: &FlowOptions) -> Result<(f64, f64, Provenance)> {
    if !(eta > -1.0 && eta < 1.0) {
        return Err(RevspecError::DomainError { detail: format!("eta = {eta} is not in (-1, 1)") });
    }
    if eta == 0.0 {
        return Ok((TAU, 2.0 * p.m(), Provenance::Meridian));
    }
    let (r, prov) = return_sample(p, eta.acos(), opts)?;
    let fp = if eta < 0.0 { r.theta + 2.0 * TAU } else { r.theta };
    Ok((fp, r.tau, prov))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfOptions {
    pub n_grid: usize,
    pub eps_edge: f64,
    pub exec: Execution,
    pub flow: FlowOptions,
}

impl Default for GfOptions {
    fn default() -> Self {
        Self { n_grid: 512, eps_edge: 1e-3, exec: Execution::Parallel, flow: FlowOptions::default() }
    }
}

/// Samples of F and F′ on a Chebyshev grid in (−1 + ε, 1 − ε), plus η = 0.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratingFunction {
    pub eta: Vec<f64>,
    pub f: Vec<f64>,
    pub fprime: Vec<f64>,
    pub tau: Vec<f64>,
    pub provenance: Vec<Provenance>,
    pub eps_edge: f64,
    pub m: f64,
    pub r_max: f64,
    pub low_accuracy: bool,
    #[serde(skip)]
    profile: ProfileFunction,
    #[serde(skip)]
    flow: FlowOptions,
}

pub fn build_generating_function(p: &ProfileFunction, opts: &GfOptions) -> Result<GeneratingFunction> {
    let n = opts.n_grid.max(2);
    let mut eta: Vec<f64> =
        (0..n).map(|i| (1.0 - opts.eps_edge) * (PI * (2 * i + 1) as f64 / (2 * n) as f64).cos()).collect();
    eta.push(0.0);
    eta.sort_by(f64::total_cmp);
    eta.dedup();
    let samples = par::map(opts.exec, &eta, |&e| generating_point(p, e, &opts.flow));
    let rm = p.r_max();
    let mut gf = GeneratingFunction {
        eta: Vec::with_capacity(eta.len()),
        f: Vec::with_capacity(eta.len()),
        fprime: Vec::with_capacity(eta.len()),
        tau: Vec::with_capacity(eta.len()),
        provenance: Vec::with_capacity(eta.len()),
        eps_edge: opts.eps_edge,
        m: p.m(),
        r_max: rm,
        low_accuracy: p.low_accuracy(),
        profile: p.clone(),
        flow: opts.flow,
    };
    for (e, s) in eta.into_iter().zip(samples) {
        let (fp, tau, prov) = s?;
        gf.eta.push(e);
        gf.fprime.push(fp);
        gf.f.push(if e == 0.0 { -2.0 * p.m() / rm } else { e * fp - tau / rm });
        gf.tau.push(tau);
        gf.provenance.push(prov);
    }
    Ok(gf)
}

impl GeneratingFunction {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn profile(&self) -> &ProfileFunction {
        &self.profile
    }

    /// (F(η), F′(η), τ(η)) at an arbitrary η, off the grid.
    pub fn eval(&self, eta: f64) -> Result<(f64, f64, f64)> {
        let (fp, tau, _) = generating_point(&self.profile, eta, &self.flow)?;
        let f = if eta == 0.0 { -2.0 * self.m / self.r_max } else { eta * fp - tau / self.r_max };
        Ok((f, fp, tau))
    }

    fn zero_index(&self) -> usize {
        self.eta.iter().position(|&e| e == 0.0).expect("grid contains 0")
    }

    /// |F(0) + 2m/r_max| and |F′(0) − 2π|, using the closed forms at
    /// η = ±`h` (so the meridian values are approached, not assumed).
    pub fn normalization_residual(&self, h: f64) -> Result<(f64, f64)> {
        let (fa, fpa, _) = self.eval(h)?;
        let (fb, fpb, _) = self.eval(-h)?;
        let f0 = 0.5 * (fa + fb);
        let fp0 = 0.5 * (fpa + fpb);
        Ok(((f0 + 2.0 * self.m / self.r_max).abs(), (fp0 - TAU).abs()))
    }

    /// max over the grid of |(F(η) − 2πη) − (F(−η) + 2πη)|.
    pub fn evenness_residual(&self) -> f64 {
        let z = self.zero_index();
        let n = self.len();
        (1..=z.min(n - 1 - z))
            .map(|k| {
                let (i, j) = (z + k, z - k);
                debug_assert!((self.eta[i] + self.eta[j]).abs() < 1e-15);
                ((self.f[i] - TAU * self.eta[i]) - (self.f[j] - TAU * self.eta[j])).abs()
            })
            .fold(0.0, f64::max)
    }

    /// max |r_max(ηF′ − F) − τ_ref(η)| over grid points, τ_ref supplied.
    pub fn tau_reconstruction_residual<G: Fn(f64) -> Result<f64>>(&self, indices: &[usize], tau_ref: G) -> Result<f64> {
        let mut worst = 0.0f64;
        for &i in indices {
            let rec = self.r_max * (self.eta[i] * self.fprime[i] - self.f[i]);
            worst = worst.max((rec - tau_ref(self.eta[i])?).abs());
        }
        Ok(worst)
    }

    /// max − min of F′ over the grid.
    pub fn fprime_spread(&self) -> f64 {
        let (lo, hi) = self.fprime.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    }

    /// Finite-difference F″ on the grid (one-sided at the ends).
    pub fn fsecond(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (self.fprime[b] - self.fprime[a]) / (self.eta[b] - self.eta[a])
            })
            .collect()
    }
}

/// Lengths of closed geodesics of a given type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub p: u32,
    pub q: u32,
    pub lengths: Vec<f64>,
    pub roots: Vec<f64>,
    /// Roots where F″ is too small to rule out a tangency.
    pub multiplicity_flags: Vec<bool>,
    /// F′ was constant on the grid and the exact branch was used.
    pub degenerate: bool,
}

pub const DEGENERATE_SPREAD: f64 = 1e-9;
const TANGENCY_THRESHOLD: f64 = 1e-4;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The entry 𝓛(p, q). With `include_meridians`, the meridian root η = 0 of
/// F′ = 2π is kept in 𝓛(1, 1); by default it is reported only as the
/// separate meridian length.
pub fn length_spectrum(gf: &GeneratingFunction, p: u32, q: u32, include_meridians: bool) -> Result<SpectrumEntry> {
    if p == 0 || q == 0 || gcd(p, q) != 1 {
        return Err(RevspecError::CoprimalityError { p, q });
    }
    let target = TAU * p as f64 / q as f64;
    let mut entry = SpectrumEntry { p, q, lengths: vec![], roots: vec![], multiplicity_flags: vec![], degenerate: false };
    if gf.fprime_spread() < DEGENERATE_SPREAD {
        entry.degenerate = true;
        let z = gf.zero_index();
        let k = if z + 1 < gf.len() { z + 1 } else { z };
        if (gf.fprime[k] - target).abs() < DEGENERATE_SPREAD {
            entry.lengths.push(q as f64 * gf.r_max * (gf.eta[k] * gf.fprime[k] - gf.f[k]));
        }
        return Ok(entry);
    }
    let g = |eta: f64| gf.eval(eta).map(|(_, fp, _)| fp - target).unwrap_or(f64::NAN);
    let fsec = gf.fsecond();
    let scale = fsec.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let vals: Vec<f64> = gf.fprime.iter().map(|v| v - target).collect();
    let mut roots = Vec::new();
    for i in 0..gf.len() {
        if vals[i] == 0.0 {
            roots.push((gf.eta[i], i));
        } else if i + 1 < gf.len() && vals[i + 1] != 0.0 && (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
            let (r, _) = polish_root(g, gf.eta[i], gf.eta[i + 1], 1e-11, 60);
            roots.push((r, i));
        }
    }
    for (root, i) in roots {
        if root == 0.0 && !include_meridians {
            continue;
        }
        let (_, fp, tau) = gf.eval(root)?;
        let h = 1e-5 * (1.0 - root.abs()).min(1.0);
        let fsec_root = if root.abs() + h < 1.0 {
            (gf.eval(root + h)?.1 - gf.eval(root - h)?.1) / (2.0 * h)
        } else {
            fsec[i]
        };
        let _ = fp;
        entry.roots.push(root);
        entry.lengths.push(q as f64 * tau);
        entry.multiplicity_flags.push(fsec_root.abs() < TANGENCY_THRESHOLD * scale);
    }
    let mut order: Vec<usize> = (0..entry.lengths.len()).collect();
    order.sort_by(|&a, &b| entry.lengths[a].total_cmp(&entry.lengths[b]));
    entry.lengths = order.iter().map(|&k| entry.lengths[k]).collect();
    entry.roots = order.iter().map(|&k| entry.roots[k]).collect();
    entry.multiplicity_flags = order.iter().map(|&k| entry.multiplicity_flags[k]).collect();
    Ok(entry)
}

/// The whole spectrum up to p, q ≤ `pq_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub equator_length: f64,
    pub meridian_length: f64,
    pub entries: Vec<SpectrumEntry>,
    /// Set when F′ has flat spots: the detected lengths may then be incomplete.
    pub incomplete: bool,
}

pub fn spectrum(gf: &GeneratingFunction, pq_max: u32, include_meridians: bool, exec: Execution) -> Result<Spectrum> {
    let pairs: Vec<(u32, u32)> =
        (1..=pq_max).flat_map(|q| (1..=pq_max).map(move |p| (p, q))).filter(|&(p, q)| gcd(p, q) == 1).collect();
    let entries: Result<Vec<SpectrumEntry>> =
        par::map(exec, &pairs, |&(p, q)| length_spectrum(gf, p, q, include_meridians)).into_iter().collect();
    let entries = entries?;
    let incomplete = entries.iter().any(|e| e.multiplicity_flags.iter().any(|&f| f));
    Ok(Spectrum { equator_length: TAU * gf.r_max, meridian_length: 2.0 * gf.m, entries, incomplete })
}

/// Largest distance between two spectra, matching entries by (p, q); an
/// entry whose length sets differ in size counts as infinitely far.
pub fn spectrum_distance(a: &Spectrum, b: &Spectrum) -> f64 {
    let mut worst = (a.equator_length - b.equator_length).abs().max((a.meridian_length - b.meridian_length).abs());
    for ea in &a.entries {
        let Some(eb) = b.entries.iter().find(|e| e.p == ea.p && e.q == ea.q) else {
            return f64::INFINITY;
        };
        if ea.lengths.len() != eb.lengths.len() {
            return f64::INFINITY;
        }
        for (x, y) in ea.lengths.iter().zip(&eb.lengths) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct IsospectralReport {
    pub isospectral: bool,
    pub tol: f64,
    pub m_difference: f64,
    pub r_max_difference: f64,
    /// max |L₁(ρ) − L₂(ρ)| over the ρ grid.
    pub superlevel_residual: f64,
    /// (ρ, L₁(ρ) − L₂(ρ)).
    pub superlevel_curve: Vec<(f64, f64)>,
    pub return_time_residual: Option<f64>,
    pub angle_shift_residual: Option<f64>,
    /// Whether τ and Θ agree within 10·tol (corroboration only).
    pub secondary_agrees: Option<bool>,
    pub secondary_error: Option<String>,
}

/// Equal superlevel-set lengths (and equal m, r_max) decide isospectrality;
/// the return data is compared as corroboration.
pub fn isospectral_check(p1: &ProfileFunction, p2: &ProfileFunction, tol: f64) -> IsospectralReport {
    let m_difference = (p1.m() - p2.m()).abs();
    let r_max_difference = (p1.r_max() - p2.r_max()).abs();
    let top = p1.r_max().min(p2.r_max());
    let n = 256;
    let superlevel_curve: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let d = top * (1.0 - i as f64 / n as f64);
            let rho = top - d;
            let l1 = p1.superlevel_length_at_drop(p1.r_max() - rho);
            let l2 = p2.superlevel_length_at_drop(p2.r_max() - rho);
            (rho, l1 - l2)
        })
        .collect();
    let superlevel_residual = superlevel_curve.iter().fold(0.0f64, |a, (_, v)| a.max(v.abs()));
    let isospectral = superlevel_residual <= tol && m_difference <= tol && r_max_difference <= tol;

    let mut report = IsospectralReport {
        isospectral,
        tol,
        m_difference,
        r_max_difference,
        superlevel_residual,
        superlevel_curve,
        return_time_residual: None,
        angle_shift_residual: None,
        secondary_agrees: None,
        secondary_error: None,
    };
    let betas: Vec<f64> = (0..32).map(|i| 0.1 + (std::f64::consts::FRAC_PI_2 - 0.2) * i as f64 / 31.0).collect();
    let mut dt = 0.0f64;
    let mut dth = 0.0f64;
    for &b in &betas {
        match (abel::return_data_closed_form(p1, b), abel::return_data_closed_form(p2, b)) {
            (Ok(a), Ok(c)) => {
                dt = dt.max((a.tau - c.tau).abs());
                dth = dth.max((a.theta - c.theta).abs());
            }
            (Err(e), _) | (_, Err(e)) => {
                report.secondary_error = Some(e.name().to_string());
                return report;
            }
        }
    }
    report.return_time_residual = Some(dt);
    report.angle_shift_residual = Some(dth);
    report.secondary_agrees = Some(dt <= 10.0 * tol && dth <= 10.0 * tol);
    report
}

/// Return time at the boundary of the section (the equator orbits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryReturn {
    Finite { tau: f64 },
    Divergent,
}

/// 2π/√K_eq, the second zero of the Jacobi field along the equator; divergent
/// when the equator curvature vanishes.
pub fn boundary_return_time(p: &ProfileFunction) -> BoundaryReturn {
    if p.is_flat_equator() {
        return BoundaryReturn::Divergent;
    }
    BoundaryReturn::Finite { tau: TAU / p.equator_curvature().sqrt() }
}

/// Order of vanishing of the curvature at the equator.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VanishingOrder {
    /// K vanishes to order `order` (even); `leading_value` = ∂_σ^order K at σ_max.
    Finite { order: u32, leading_value: f64, slope: f64 },
    InfiniteOrder { last_slope: f64 },
}

/// Apparent orders above this are reported as infinite.
pub const MAX_FINITE_ORDER: f64 = 20.0;

fn local_slopes(lengths: &[(f64, f64)]) -> Vec<f64> {
    lengths.windows(2).map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln()).collect()
}

/// Reads the order of vanishing of r_max − r off the growth of the superlevel
/// length L(d) ~ 2(d/f₀)^{1/(2h)} of {r ≥ r_max − d}, and the leading
/// coefficient f₀ off the limit of L(d)/d^{1/(2h)}.
pub fn vanishing_order(p: &ProfileFunction) -> Result<VanishingOrder> {
    let rm = p.r_max();
    let sample = |j: f64| {
        let d = rm * 10f64.powf(-j);
        (d, p.superlevel_length_at_drop(d))
    };
    let shallow: Vec<(f64, f64)> = (2..=6).map(|j| sample(j as f64)).collect();
    let slopes = local_slopes(&shallow);
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let spread = slopes.iter().fold(0.0f64, |a, s| a.max((s - mean).abs())) / mean.abs();
    if !(spread <= 0.1) {
        let exact = !matches!(p.kind(), ProfileKind::Tabulated { .. });
        let deepest = if exact { 60 } else { 13 };
        let deep: Vec<(f64, f64)> = (2..=deepest).map(|j| sample(j as f64)).filter(|s| s.1 > 0.0).collect();
        let ds = local_slopes(&deep);
        if let Some(&low) = ds.iter().find(|&&s| s < 1.0 / MAX_FINITE_ORDER) {
            return Ok(VanishingOrder::InfiniteOrder { last_slope: low });
        }
        return Err(RevspecError::FitUnstable { detail: format!("local slopes {slopes:?} do not settle") });
    }
    let slope = *slopes.last().expect("four slopes");
    let inv = 1.0 / slope;
    if inv > MAX_FINITE_ORDER {
        return Ok(VanishingOrder::InfiniteOrder { last_slope: slope });
    }
    let two_h = (2.0 * (inv / 2.0).round()).max(2.0);
    let e = 1.0 / two_h;
    // Aitken extrapolation of L(d)/d^e along d = r_max·10^{-j}.
    let ratios: Vec<f64> = (4..=7).map(|j| sample(j as f64)).map(|(d, l)| l / d.powf(e)).collect();
    let n = ratios.len();
    let (a, b, c) = (ratios[n - 3], ratios[n - 2], ratios[n - 1]);
    let den = c - 2.0 * b + a;
    let limit = if den.abs() > 1e-14 * c.abs() { c - (c - b) * (c - b) / den } else { c };
    let f0 = (2.0 / limit).powf(two_h);
    let factorial: f64 = (1..=two_h as u32).map(f64::from).product();
    let leading_value = factorial * f0 / rm;
    Ok(VanishingOrder::Finite { order: two_h as u32 - 2, leading_value, slope })
}

/// σ_S′ − σ_N′ at ρ, the quantity shared by all profiles of an isospectral class.
pub fn kernel_at_rho(p: &ProfileFunction, rho: f64) -> f64 {
    let d = p.r_max() - rho;
    1.0 / p.branch_point(d, Branch::South).1.dr - 1.0 / p.branch_point(d, Branch::North).1.dr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::builtins;

    fn small() -> GfOptions {
        GfOptions { n_grid: 64, ..Default::default() }
    }

    #[test]
    fn round_generating_function() {
        let gf = build_generating_function(&builtins::round(), &small()).unwrap();
        for i in 0..gf.len() {
            assert!((gf.fprime[i] - TAU).abs() < 1e-9);
            assert!((gf.f[i] - (TAU * gf.eta[i] - TAU)).abs() < 1e-9);
        }
        let e = length_spectrum(&gf, 1, 1, false).unwrap();
        assert!(e.degenerate && e.lengths.len() == 1 && (e.lengths[0] - TAU).abs() < 1e-9);
        assert!(length_spectrum(&gf, 2, 3, false).unwrap().lengths.is_empty());
        assert_eq!(length_spectrum(&gf, 2, 4, false).unwrap_err().name(), "CoprimalityError");
    }

    #[test]
    fn generating_function_contract() {
        let gf = build_generating_function(&builtins::two_harmonic(), &small()).unwrap();
        assert!(gf.evenness_residual() < 1e-8);
        let (a, b) = gf.normalization_residual(1e-7).unwrap();
        assert!(a < 1e-6 && b < 1e-6, "{a} {b}");
    }

    #[test]
    fn boundary_times() {
        assert_eq!(boundary_return_time(&builtins::round()), BoundaryReturn::Finite { tau: TAU });
        assert_eq!(boundary_return_time(&builtins::flat_equator()), BoundaryReturn::Divergent);
        let BoundaryReturn::Finite { tau } = boundary_return_time(&ProfileFunction::round(0.5)) else { panic!() };
        assert!((tau - PI).abs() < 1e-12);
    }

    #[test]
    fn vanishing_orders() {
        match vanishing_order(&builtins::round()).unwrap() {
            VanishingOrder::Finite { order, leading_value, .. } => {
                assert_eq!(order, 0);
                assert!((leading_value - 1.0).abs() < 1e-3);
            }
            v => panic!("{v:?}"),
        }
        match vanishing_order(&builtins::quartic_flat()).unwrap() {
            VanishingOrder::Finite { order, leading_value, .. } => {
                assert_eq!(order, 2);
                assert!((leading_value - 9.0).abs() < 0.05 * 9.0, "{leading_value}");
            }
            v => panic!("{v:?}"),
        }
        assert!(matches!(vanishing_order(&builtins::flat_equator()).unwrap(), VanishingOrder::InfiniteOrder { .. }));
    }

    #[test]
    fn negative_control_fails_the_check() {
        let base = builtins::round();
        let m = base.m();
        let bad = crate::profile::Deformation::from_sine_series(m, &[0.0, 0.1]).unwrap();
        let q = ProfileFunction::deformed(base.clone(), bad);
        let rep = isospectral_check(&base, &q, 1e-8);
        assert!(!rep.isospectral && rep.superlevel_residual > 1e-3, "{}", rep.superlevel_residual);
        let z = builtins::zoll(0.5);
        let ok = isospectral_check(&base, &z, 1e-8);
        assert!(ok.isospectral && ok.secondary_agrees == Some(true));
        let scaled = ProfileFunction::round(1.1);
        assert!(!isospectral_check(&base, &scaled, 1e-8).isospectral);
    }
}
