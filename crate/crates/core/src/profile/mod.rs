//! Unimodal profile functions r on [0, m], defining the metric dσ² + r(σ)²dθ².
//!
//! Besides r, r′ and r″, every profile exposes its *drop* r_max − r(σ). The
//! drop is computed without cancellation for all analytic families, which is
//! what keeps the partial inverses (and therefore the Abel kernels) accurate
//! right up to the equator.

pub mod builtins;
pub mod config;
pub mod deform;
pub mod flat;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RevspecError};
use crate::numeric::roots::{bisect, newton_bracketed};
use crate::numeric::spline::{CubicSpline, EndCondition};

pub use deform::Deformation;
pub use flat::{FlatEquatorParams, FlatShape};

/// Absolute tolerance in σ for partial inverses.
pub const TOL_ROOT: f64 = 1e-12;
/// Default relative tolerance for [`ProfileFunction::validate`].
pub const VALIDATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    South,
    North,
}

/// r, r′, r″ at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileValue {
    pub r: f64,
    pub dr: f64,
    pub d2r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// r = a sin(σ/a), a = m/π.
    Round,
    /// r = Σ_k c_k sin((2k−1)πσ/m), i.e. a cosine series in σ − m/2.
    SymmetricBase { coeffs: Vec<f64> },
    /// r = base ∘ φ with φ⁻¹(τ) = τ + ψ(τ).
    CorDDeformed { base: Box<ProfileFunction>, deformation: Deformation },
    FlatEquator(FlatShape),
    /// Natural cubic spline through samples.
    Tabulated { sigma: Vec<f64>, r: Vec<f64>, spline: CubicSpline },
    /// Symmetric rearrangement of another profile.
    Rearranged { source: Box<ProfileFunction> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFunction {
    kind: ProfileKind,
    m: f64,
    sigma_max: f64,
    r_max: f64,
    low_accuracy: bool,
    smoothness_unverified_at_midpoint: bool,
}

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
    pub sigma_max: f64,
    pub r_max: f64,
    /// The error corresponding to the first failed invariant, if any.
    pub error: Option<RevspecError>,
}

fn symmetric_base_eval(m: f64, coeffs: &[f64], sigma: f64) -> ProfileValue {
    let (mut r, mut dr, mut d2r) = (0.0, 0.0, 0.0);
    for (i, c) in coeffs.iter().enumerate() {
        let w = (2 * i + 1) as f64 * PI / m;
        let (s, co) = (w * sigma).sin_cos();
        r += c * s;
        dr += c * w * co;
        d2r -= c * w * w * s;
    }
    ProfileValue { r, dr, d2r }
}

impl ProfileFunction {
    fn assemble(kind: ProfileKind, m: f64, sigma_max: f64, r_max: f64) -> Self {
        Self { kind, m, sigma_max, r_max, low_accuracy: false, smoothness_unverified_at_midpoint: false }
    }

    /// Round sphere of radius a (m = πa).
    pub fn round(radius: f64) -> Self {
        Self::assemble(ProfileKind::Round, PI * radius, 0.5 * PI * radius, radius)
    }

    /// Symmetric profile r = Σ_k c_k sin((2k−1)πσ/m).
    pub fn symmetric_base(m: f64, coeffs: &[f64]) -> Result<Self> {
        if !(m > 0.0) || coeffs.is_empty() {
            return Err(RevspecError::Config("symmetric_base needs m > 0 and at least one coefficient".into()));
        }
        let r_max = symmetric_base_eval(m, coeffs, 0.5 * m).r;
        Ok(Self::assemble(ProfileKind::SymmetricBase { coeffs: coeffs.to_vec() }, m, 0.5 * m, r_max))
    }

    /// base ∘ φ where φ⁻¹ = id + ψ. No admissibility check is made here;
    /// see [`crate::rearrange::cor_d_family`] for the checked constructor.
    pub fn deformed(base: ProfileFunction, deformation: Deformation) -> Self {
        let sigma_max = deformation.forward(base.sigma_max);
        let mut p = Self::assemble(
            ProfileKind::CorDDeformed { base: Box::new(base.clone()), deformation },
            base.m,
            sigma_max,
            base.r_max,
        );
        p.low_accuracy = base.low_accuracy;
        p.smoothness_unverified_at_midpoint = base.smoothness_unverified_at_midpoint;
        p
    }

    pub fn flat_equator(m: f64, params: FlatEquatorParams) -> Self {
        let a = m / PI;
        Self::assemble(ProfileKind::FlatEquator(FlatShape::new(params)), m, 0.5 * m, a)
    }

    /// Spline through (σ_i, r_i); σ must start at 0 and increase strictly.
    pub fn tabulated(sigma: &[f64], r: &[f64]) -> Result<Self> {
        let spline = CubicSpline::new(sigma, r, EndCondition::Natural)
            .ok_or_else(|| RevspecError::Config("tabulated profile needs >= 2 strictly increasing samples".into()))?;
        if sigma[0] != 0.0 {
            return Err(RevspecError::Config("tabulated profile must start at sigma = 0".into()));
        }
        let m = sigma[sigma.len() - 1];
        let imax = r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
        let lo = sigma[imax.saturating_sub(1)];
        let hi = sigma[(imax + 1).min(sigma.len() - 1)];
        let d = |s: f64| spline.eval(s).1;
        let sigma_max = if d(lo) > 0.0 && d(hi) < 0.0 { bisect(d, lo, hi, 1e-13 * m, 200) } else { sigma[imax] };
        let r_max = spline.eval(sigma_max).0;
        let mut p = Self::assemble(
            ProfileKind::Tabulated { sigma: sigma.to_vec(), r: r.to_vec(), spline },
            m,
            sigma_max,
            r_max,
        );
        p.low_accuracy = true;
        Ok(p)
    }

    /// The symmetric rearrangement of `source` (no checks; see `rearrange`).
    pub fn rearranged(source: ProfileFunction) -> Self {
        let mut p = Self::assemble(
            ProfileKind::Rearranged { source: Box::new(source.clone()) },
            source.m,
            0.5 * source.m,
            source.r_max,
        );
        p.low_accuracy = source.low_accuracy;
        p.smoothness_unverified_at_midpoint = source.smoothness_unverified_at_midpoint || source.is_flat_equator();
        p
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Round => "round",
            ProfileKind::SymmetricBase { .. } => "symmetric_base",
            ProfileKind::CorDDeformed { .. } => "cord_deformed",
            ProfileKind::FlatEquator(_) => "flat_equator",
            ProfileKind::Tabulated { .. } => "tabulated",
            ProfileKind::Rearranged { .. } => "rearranged",
        }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn low_accuracy(&self) -> bool {
        self.low_accuracy
    }

    pub fn smoothness_unverified_at_midpoint(&self) -> bool {
        self.smoothness_unverified_at_midpoint
    }

    /// r, r′, r″ at σ.
    pub fn eval(&self, sigma: f64) -> ProfileValue {
        match &self.kind {
            ProfileKind::Round => {
                let a = self.r_max;
                let (s, c) = (sigma / a).sin_cos();
                ProfileValue { r: a * s, dr: c, d2r: -s / a }
            }
            ProfileKind::SymmetricBase { coeffs } => symmetric_base_eval(self.m, coeffs, sigma),
            ProfileKind::CorDDeformed { base, deformation } => {
                let tau = deformation.inverse(sigma);
                compose(base.eval(tau), deformation.psi(tau))
            }
            ProfileKind::FlatEquator(shape) => {
                let a = self.r_max;
                let x = sigma - self.sigma_max;
                let (g, g1, g2) = shape.drop_jet(x.abs() / a);
                let sign = if x > 0.0 { 1.0 } else { -1.0 };
                ProfileValue { r: a * (1.0 - g), dr: -sign * g1, d2r: -g2 / a }
            }
            ProfileKind::Tabulated { spline, .. } => {
                let (r, dr, d2r) = spline.eval(sigma);
                ProfileValue { r, dr, d2r }
            }
            ProfileKind::Rearranged { source } => {
                let tau = sigma.clamp(0.0, self.m);
                let d = rearranged_drop(source, (2.0 * (tau - 0.5 * self.m)).abs());
                let north = tau > 0.5 * self.m;
                rearranged_jet(source, d, if north { Branch::North } else { Branch::South })
            }
        }
    }

    /// Width of the narrowest feature of the profile near σ, when it is much
    /// smaller than the profile's overall scale. Only the flat-equator
    /// staircase has such features: at distance x from the equator its
    /// steps are about x wide.
    pub fn feature_scale(&self, sigma: f64) -> Option<f64> {
        match &self.kind {
            ProfileKind::FlatEquator(shape) => {
                let finest = self.r_max * shape.params.length_scale * 4f64.powi(-(shape.params.j_max as i32) - 1);
                Some(0.125 * (sigma - self.sigma_max).abs().max(finest))
            }
            _ => None,
        }
    }

    /// r_max − r(σ), free of cancellation for the analytic families.
    pub fn drop_at(&self, sigma: f64) -> f64 {
        match &self.kind {
            ProfileKind::Round => {
                let a = self.r_max;
                let h = ((sigma - self.sigma_max) / (2.0 * a)).sin();
                2.0 * a * h * h
            }
            ProfileKind::SymmetricBase { coeffs } => {
                let mut acc = 0.0;
                for (i, c) in coeffs.iter().enumerate() {
                    let w = (2 * i + 1) as f64 * PI / self.m;
                    acc += c * 2.0 * (0.5 * w * (self.sigma_max + sigma)).cos() * (0.5 * w * (self.sigma_max - sigma)).sin();
                }
                acc
            }
            ProfileKind::CorDDeformed { base, deformation } => base.drop_at(deformation.inverse(sigma)),
            ProfileKind::FlatEquator(shape) => self.r_max * shape.drop_jet((sigma - self.sigma_max).abs() / self.r_max).0,
            ProfileKind::Tabulated { spline, .. } => self.r_max - spline.eval(sigma).0,
            ProfileKind::Rearranged { source } => {
                let tau = sigma.clamp(0.0, self.m);
                rearranged_drop(source, (2.0 * (tau - 0.5 * self.m)).abs())
            }
        }
    }

    /// drop(σ₁) − drop(σ₂), computed so that a tiny difference between two
    /// nearly equal drops survives.
    pub fn drop_difference(&self, s1: f64, s2: f64) -> f64 {
        match &self.kind {
            ProfileKind::FlatEquator(shape) => {
                let a = self.r_max;
                a * shape.drop_difference((s1 - self.sigma_max).abs() / a, (s2 - self.sigma_max).abs() / a)
            }
            ProfileKind::CorDDeformed { base, deformation } => {
                base.drop_difference(deformation.inverse(s1), deformation.inverse(s2))
            }
            _ => self.drop_at(s1) - self.drop_at(s2),
        }
    }

    /// Point σ on `branch` with drop(σ) = d, together with r, r′, r″ there.
    pub fn branch_point(&self, d: f64, branch: Branch) -> (f64, ProfileValue) {
        let pole = match branch {
            Branch::South => 0.0,
            Branch::North => self.m,
        };
        if d <= 0.0 {
            return (self.sigma_max, self.eval(self.sigma_max));
        }
        if d >= self.r_max {
            return (pole, self.eval(pole));
        }
        let sign = match branch {
            Branch::South => -1.0,
            Branch::North => 1.0,
        };
        match &self.kind {
            ProfileKind::Round => {
                let a = self.r_max;
                let x = 2.0 * a * (d / (2.0 * a)).sqrt().min(1.0).asin();
                let sigma = self.sigma_max + sign * x;
                (sigma, self.eval(sigma))
            }
            ProfileKind::CorDDeformed { base, deformation } => {
                let (tau, v) = base.branch_point(d, branch);
                let psi = deformation.psi(tau);
                (tau + psi.0, compose(v, psi))
            }
            ProfileKind::Rearranged { source } => {
                let len = source.superlevel_length_at_drop(d);
                (0.5 * self.m + sign * 0.5 * len, rearranged_jet(source, d, branch))
            }
            _ => {
                let sigma = self.solve_drop(d, branch);
                (sigma, self.eval(sigma))
            }
        }
    }

    fn solve_drop(&self, d: f64, branch: Branch) -> f64 {
        let (lo, hi) = match branch {
            Branch::South => (0.0, self.sigma_max),
            Branch::North => (self.sigma_max, self.m),
        };
        let k = -self.eval(self.sigma_max).d2r;
        let guess = if k > 0.0 {
            let x = (2.0 * d / k).sqrt();
            Some(match branch {
                Branch::South => self.sigma_max - x,
                Branch::North => self.sigma_max + x,
            })
        } else {
            None
        };
        newton_bracketed(|s| (self.drop_at(s) - d, -self.eval(s).dr), lo, hi, guess, 1e-15 * self.m)
    }

    /// σ_S(ρ) or σ_N(ρ).
    pub fn partial_inverse(&self, rho: f64, branch: Branch) -> Result<f64> {
        if !(rho >= 0.0 && rho <= self.r_max) {
            return Err(RevspecError::OutOfRange { value: rho, lo: 0.0, hi: self.r_max });
        }
        if self.r_max - rho <= TOL_ROOT {
            return Ok(self.sigma_max);
        }
        Ok(self.branch_point(self.r_max - rho, branch).0)
    }

    /// σ_N(ρ) − σ_S(ρ), the length of {r ≥ ρ}.
    pub fn superlevel_length(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0 && rho <= self.r_max) {
            return Err(RevspecError::OutOfRange { value: rho, lo: 0.0, hi: self.r_max });
        }
        if self.r_max - rho <= TOL_ROOT {
            return Ok(0.0);
        }
        Ok(self.superlevel_length_at_drop(self.r_max - rho))
    }

    /// Length of {r ≥ r_max − d}.
    pub fn superlevel_length_at_drop(&self, d: f64) -> f64 {
        if let ProfileKind::Rearranged { source } = &self.kind {
            return source.superlevel_length_at_drop(d);
        }
        if d <= 0.0 {
            return 0.0;
        }
        if d >= self.r_max {
            return self.m;
        }
        self.branch_point(d, Branch::North).0 - self.branch_point(d, Branch::South).0
    }

    /// Gaussian curvature −r″/r on the open interval.
    pub fn curvature(&self, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0 && sigma < self.m) {
            return Err(RevspecError::OutOfDomain { value: sigma, domain: format!("(0, {})", self.m) });
        }
        let v = self.eval(sigma);
        Ok(-v.d2r / v.r)
    }

    /// Curvature at the equator, −r″(σ_max)/r_max.
    pub fn equator_curvature(&self) -> f64 {
        -self.eval(self.sigma_max).d2r / self.r_max
    }

    pub fn is_flat_equator(&self) -> bool {
        self.equator_curvature() <= 1e-12 / (self.r_max * self.r_max)
    }

    /// r(m − σ) = r(σ) at 64 sample points.
    pub fn is_symmetric(&self) -> bool {
        match self.kind {
            ProfileKind::Round | ProfileKind::SymmetricBase { .. } | ProfileKind::FlatEquator(_) | ProfileKind::Rearranged { .. } => true,
            _ => (0..=64).all(|i| {
                let s = self.m * i as f64 / 128.0;
                (self.eval(s).r - self.eval(self.m - s).r).abs() <= 1e-12 * self.r_max
            }),
        }
    }

    /// Checks the defining invariants on a 2048-interval grid.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let n = 2048;
        let m = self.m;
        let scale = self.r_max.abs().max(f64::MIN_POSITIVE);
        let v0 = self.eval(0.0);
        let vm = self.eval(m);
        let mut checks = Vec::new();
        let mut error = None;

        let r0 = v0.r.abs() / scale;
        let rm = vm.r.abs() / scale;
        checks.push(Check { name: "r(0) = 0", passed: r0 <= tol, residual: r0 });
        checks.push(Check { name: "r(m) = 0", passed: rm <= tol, residual: rm });
        let s0 = (v0.dr - 1.0).abs();
        let sm = (vm.dr + 1.0).abs();
        checks.push(Check { name: "r'(0) = 1", passed: s0 <= tol, residual: s0 });
        checks.push(Check { name: "r'(m) = -1", passed: sm <= tol, residual: sm });
        if s0 > tol || sm > tol {
            error.get_or_insert(RevspecError::BoundarySlope {
                detail: format!("r'(0) = {}, r'(m) = {}", v0.dr, vm.dr),
            });
        }

        let mut min_r = f64::INFINITY;
        let mut min_at = 0.0;
        let mut sign_changes = 0usize;
        let mut last_sign = 0i8;
        let mut first_sign = 0i8;
        for i in 1..n {
            let s = m * i as f64 / n as f64;
            let v = self.eval(s);
            if v.r < min_r {
                min_r = v.r;
                min_at = s;
            }
            let sg = if v.dr > 0.0 {
                1
            } else if v.dr < 0.0 {
                -1
            } else {
                0
            };
            if sg != 0 {
                if first_sign == 0 {
                    first_sign = sg;
                }
                if last_sign != 0 && sg != last_sign {
                    sign_changes += 1;
                }
                last_sign = sg;
            }
        }
        let positive = min_r > 0.0;
        checks.push(Check { name: "r > 0 on (0, m)", passed: positive, residual: (-min_r / scale).max(0.0) });
        if !positive {
            error.get_or_insert(RevspecError::Negative { sigma: min_at });
        }
        let unimodal = sign_changes == 1 && first_sign == 1;
        checks.push(Check { name: "r' changes sign once", passed: unimodal, residual: sign_changes as f64 });
        if !unimodal {
            error.get_or_insert(RevspecError::NonUnimodal { sign_changes });
        }
        let dmax = self.eval(self.sigma_max).dr.abs();
        let interior = self.sigma_max > 0.0 && self.sigma_max < m;
        let crit_ok = interior && dmax <= tol;
        checks.push(Check { name: "r'(sigma_max) = 0", passed: crit_ok, residual: dmax });
        if !crit_ok {
            error.get_or_insert(RevspecError::NonUnimodal { sign_changes });
        }
        let passed = checks.iter().all(|c| c.passed);
        ValidationReport { checks, passed, sigma_max: self.sigma_max, r_max: self.r_max, error }
    }

    /// `validate` with the default tolerance, as a `Result`.
    pub fn validated(self) -> Result<Self> {
        match self.validate(VALIDATION_TOL).error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// r = b∘φ with φ⁻¹ = id + ψ: chain rule given b's jet at τ and ψ's jet at τ.
fn compose(b: ProfileValue, psi: (f64, f64, f64)) -> ProfileValue {
    let dphi = 1.0 / (1.0 + psi.1);
    let d2phi = -psi.2 * dphi * dphi * dphi;
    ProfileValue { r: b.r, dr: b.dr * dphi, d2r: b.d2r * dphi * dphi + b.dr * d2phi }
}

/// Drop d at which the source's superlevel set has length `len`.
pub(crate) fn rearranged_drop(source: &ProfileFunction, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if len >= source.m {
        return source.r_max;
    }
    // Solve in w = √d, where the length is close to linear near the top.
    let g = |w: f64| {
        let d = w * w;
        let (ss, vs) = source.branch_point(d, Branch::South);
        let (sn, vn) = source.branch_point(d, Branch::North);
        let k = 1.0 / vs.dr - 1.0 / vn.dr;
        let dk = if d > 0.0 && k.is_finite() { 2.0 * w * k } else { f64::INFINITY };
        (sn - ss - len, dk)
    };
    let wmax = source.r_max.sqrt();
    let w = newton_bracketed(g, 0.0, wmax, None, 1e-16 * wmax);
    w * w
}

/// r_s and its derivatives at the two points of drop d.
fn rearranged_jet(source: &ProfileFunction, d: f64, branch: Branch) -> ProfileValue {
    let sign = match branch {
        Branch::South => 1.0,
        Branch::North => -1.0,
    };
    if d <= 0.0 {
        return ProfileValue { r: source.r_max, dr: 0.0, d2r: source.eval(source.sigma_max).d2r };
    }
    let (_, vs) = source.branch_point(d, Branch::South);
    let (_, vn) = source.branch_point(d, Branch::North);
    let k = 1.0 / vs.dr - 1.0 / vn.dr;
    let dk = vs.d2r / vs.dr.powi(3) - vn.d2r / vn.dr.powi(3);
    if !k.is_finite() || k == 0.0 {
        return ProfileValue { r: source.r_max - d, dr: 0.0, d2r: source.eval(source.sigma_max).d2r };
    }
    ProfileValue { r: source.r_max - d, dr: sign * 2.0 / k, d2r: 4.0 * dk / (k * k * k) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn round_sphere_examples() {
        let p = ProfileFunction::round(1.0);
        let report = p.validate(VALIDATION_TOL);
        assert!(report.passed, "{:?}", report.checks);
        assert_eq!(p.sigma_max(), FRAC_PI_2);
        assert_eq!(p.r_max(), 1.0);
        assert!((p.partial_inverse(0.5, Branch::South).unwrap() - PI / 6.0).abs() < 1e-10);
        assert!((p.partial_inverse(0.5, Branch::North).unwrap() - 5.0 * PI / 6.0).abs() < 1e-10);
        assert_eq!(p.partial_inverse(1.0, Branch::North).unwrap(), FRAC_PI_2);
        assert!((p.superlevel_length(0.0).unwrap() - PI).abs() < 1e-15);
        assert!((p.superlevel_length(0.5).unwrap() - 2.0 * PI / 3.0).abs() < 1e-12);
        assert_eq!(p.superlevel_length(1.0).unwrap(), 0.0);
        assert!((p.curvature(PI / 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(p.curvature(0.0).is_err());
        assert!(p.partial_inverse(1.5, Branch::South).is_err());
    }

    #[test]
    fn round_curvature_is_one_on_a_grid() {
        let p = ProfileFunction::round(1.0);
        for i in 1..=64 {
            let s = PI * i as f64 / 65.0;
            assert!((p.curvature(s).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_slope_and_bimodal_tables_fail() {
        let sig: Vec<f64> = (0..=400).map(|i| PI * i as f64 / 400.0).collect();
        let r: Vec<f64> = sig.iter().map(|s| s * (PI - s) * 2.0 / PI).collect();
        let p = ProfileFunction::tabulated(&sig, &r).unwrap();
        assert!(p.low_accuracy());
        let rep = p.validate(VALIDATION_TOL);
        assert!(!rep.passed);
        assert!(matches!(rep.error, Some(RevspecError::BoundarySlope { .. })));

        let r2: Vec<f64> = sig.iter().map(|s| s.sin() * (1.0 + 0.6 * (4.0 * s).cos().powi(2) * s.sin())).collect();
        let q = ProfileFunction::tabulated(&sig, &r2).unwrap();
        let rep = q.validate(1e-3);
        assert!(rep.checks.iter().any(|c| c.name == "r' changes sign once" && !c.passed));
    }

    #[test]
    fn drop_matches_direct_difference() {
        for p in builtins::positive_curvature_panel() {
            for i in 1..40 {
                let s = p.m() * i as f64 / 40.0;
                let direct = p.r_max() - p.eval(s).r;
                assert!((p.drop_at(s) - direct).abs() < 1e-13, "{} at {s}", p.kind_name());
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut panel = builtins::positive_curvature_panel();
        panel.push(builtins::quartic_flat());
        panel.push(builtins::flat_equator());
        for p in panel {
            for i in 1..20 {
                let s = p.m() * i as f64 / 20.0 + 1e-3;
                let h = 1e-5;
                let (a, b, c) = (p.eval(s - h), p.eval(s), p.eval(s + h));
                assert!(((c.r - a.r) / (2.0 * h) - b.dr).abs() < 1e-7, "{} r' at {s}", p.kind_name());
                let fd = (c.dr - a.dr) / (2.0 * h);
                assert!((fd - b.d2r).abs() < 1e-6 * (1.0 + b.d2r.abs()), "{} r'' at {s}: {fd} vs {}", p.kind_name(), b.d2r);
            }
        }
    }

    #[test]
    fn branch_points_invert_the_drop() {
        let mut panel = builtins::positive_curvature_panel();
        panel.push(builtins::quartic_flat());
        for p in panel {
            for d in [1e-12, 1e-8, 1e-4, 0.01, 0.3, 0.7] {
                let d = d * p.r_max();
                for br in [Branch::South, Branch::North] {
                    let (s, v) = p.branch_point(d, br);
                    assert!((p.drop_at(s) - d).abs() <= 1e-14 * p.r_max() + 1e-9 * d, "{} {br:?} d={d}", p.kind_name());
                    assert!((v.r - p.eval(s).r).abs() < 1e-14);
                    assert!((v.dr - p.eval(s).dr).abs() < 1e-12 * (1.0 + v.dr.abs()));
                }
            }
        }
    }

    #[test]
    fn flat_equator_has_zero_equator_curvature() {
        let p = builtins::flat_equator();
        assert!(p.validate(VALIDATION_TOL).passed);
        assert_eq!(p.curvature(p.sigma_max()).unwrap(), 0.0);
        assert!(p.is_flat_equator());
        assert!(!ProfileFunction::round(1.0).is_flat_equator());
    }
}
