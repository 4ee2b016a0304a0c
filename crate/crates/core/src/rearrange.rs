//! Symmetric rearrangement and the family of profiles sharing its
//! superlevel-set lengths.
//!
//! The rearrangement map sends σ to the point of the symmetric profile with
//! the same value: φ(σ) = m/2 − L(r(σ))/2 on the southern branch and
//! m/2 + L(r(σ))/2 on the northern one, where L(ρ) is the length of
//! {r ≥ ρ}. A deformation with φ⁻¹ = id + ψ, ψ odd and ψ(m − τ) = ψ(τ),
//! moves along the isospectral class of a symmetric base.

use crate::error::{Result, RevspecError};
use crate::profile::{Branch, Deformation, ProfileFunction};

#[derive(Debug, Clone)]
enum Repr {
    /// σ ↦ position of r(σ) on the symmetric rearrangement of `profile`.
    Rearrangement(ProfileFunction),
    /// σ ↦ τ where σ = τ + ψ(τ).
    Deformation(Deformation),
}

/// An increasing bijection φ of [0, m].
#[derive(Debug, Clone)]
pub struct Reparametrization {
    repr: Repr,
    m: f64,
}

impl Reparametrization {
    pub fn m(&self) -> f64 {
        self.m
    }

    /// φ(σ).
    pub fn phi(&self, sigma: f64) -> f64 {
        match &self.repr {
            Repr::Deformation(d) => d.inverse(sigma),
            Repr::Rearrangement(p) => {
                let half = 0.5 * self.m;
                if sigma <= 0.0 {
                    return 0.0;
                }
                if sigma >= self.m {
                    return self.m;
                }
                let d = p.drop_at(sigma);
                if sigma <= p.sigma_max() {
                    let north = p.branch_point(d, Branch::North).0;
                    half - 0.5 * (north - sigma)
                } else {
                    let south = p.branch_point(d, Branch::South).0;
                    half + 0.5 * (sigma - south)
                }
            }
        }
    }

    /// φ′(σ) on the open interval.
    pub fn dphi(&self, sigma: f64) -> f64 {
        match &self.repr {
            Repr::Deformation(d) => 1.0 / (1.0 + d.psi(d.inverse(sigma)).1),
            Repr::Rearrangement(p) => {
                if (sigma - p.sigma_max()).abs() <= 1e-9 * self.m {
                    return 1.0;
                }
                let d = p.drop_at(sigma);
                let own = p.eval(sigma).dr;
                let other = if sigma < p.sigma_max() { Branch::North } else { Branch::South };
                let partner = p.branch_point(d, other).1.dr;
                0.5 * (1.0 - own / partner)
            }
        }
    }

    /// φ⁻¹(τ).
    pub fn inverse(&self, tau: f64) -> f64 {
        match &self.repr {
            Repr::Deformation(d) => d.forward(tau),
            Repr::Rearrangement(p) => {
                let half = 0.5 * self.m;
                let d = crate::profile::rearranged_drop(p, (2.0 * (tau - half)).abs());
                let branch = if tau < half { Branch::South } else { Branch::North };
                p.branch_point(d, branch).0
            }
        }
    }
}

/// The rearrangement map of `p`, checked to be increasing on a 512 grid.
pub fn rearrangement_map(p: &ProfileFunction) -> Result<Reparametrization> {
    let map = Reparametrization { repr: Repr::Rearrangement(p.clone()), m: p.m() };
    let n = 512;
    let mut prev = 0.0;
    for i in 1..=n {
        let s = p.m() * i as f64 / n as f64;
        let v = map.phi(s);
        if !(v > prev) {
            return Err(RevspecError::MonotonicityFailure { sigma: s });
        }
        prev = v;
    }
    Ok(map)
}

/// The reparametrization τ ↦ τ + ψ(τ) of a deformation, as a map σ ↦ τ.
pub fn deformation_map(d: &Deformation) -> Reparametrization {
    Reparametrization { repr: Repr::Deformation(d.clone()), m: d.m() }
}

/// The symmetric rearrangement r ∘ φ⁻¹. Symmetric inputs are returned as is.
pub fn symmetric_rearrangement(p: &ProfileFunction) -> ProfileFunction {
    if p.is_symmetric() {
        return p.clone();
    }
    ProfileFunction::rearranged(p.clone())
}

/// base ∘ φ with φ⁻¹(τ) = τ + ∫₀^τ f(cos(πs/m)) ds, for an odd polynomial f
/// given by its power-basis coefficients.
pub fn cor_d_family(base: &ProfileFunction, f_coeffs: &[f64]) -> Result<ProfileFunction> {
    if !base.is_symmetric() {
        return Err(RevspecError::ConstraintViolation { constraint: "base profile is not symmetric".into() });
    }
    let d = Deformation::from_polynomial(base.m(), f_coeffs)?;
    if d.is_identity() {
        return Ok(base.clone());
    }
    Ok(ProfileFunction::deformed(base.clone(), d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::builtins;
    use std::f64::consts::PI;

    #[test]
    fn symmetric_profiles_have_identity_maps() {
        for p in [builtins::round(), builtins::two_harmonic(), builtins::quartic_flat()] {
            let map = rearrangement_map(&p).unwrap();
            for i in 1..40 {
                let s = p.m() * i as f64 / 40.0;
                assert!((map.phi(s) - s).abs() < 1e-9, "{} at {s}", p.kind_name());
            }
        }
    }

    #[test]
    fn rearrangement_inverts_the_sin_cubed_deformation() {
        let eps = 0.5;
        let p = builtins::zoll(eps);
        let map = rearrangement_map(&p).unwrap();
        let m = PI;
        for i in 1..50 {
            let tau = m * i as f64 / 50.0;
            let sigma = tau - eps * m / (3.0 * PI) * (PI * tau / m).sin().powi(3);
            assert!((map.phi(sigma) - tau).abs() < 1e-7, "at {tau}");
            assert!((map.inverse(tau) - sigma).abs() < 1e-7);
        }
    }

    #[test]
    fn endpoint_derivatives_are_one() {
        let p = builtins::two_harmonic_deformed();
        let map = rearrangement_map(&p).unwrap();
        let h = 1e-5;
        let d0 = map.phi(h) / h;
        let dm = (p.m() - map.phi(p.m() - h)) / h;
        assert!((d0 - 1.0).abs() < 1e-6 && (dm - 1.0).abs() < 1e-6, "{d0} {dm}");
        let s = p.sigma_max();
        let dmid = (map.phi(s + h) - map.phi(s - h)) / (2.0 * h);
        assert!((dmid - 1.0).abs() < 1e-6);
        assert!((map.dphi(0.7) - (map.phi(0.7 + h) - map.phi(0.7 - h)) / (2.0 * h)).abs() < 1e-7);
    }

    #[test]
    fn generic_rearrangement_is_symmetric_and_equimeasurable() {
        let p = builtins::two_harmonic_deformed();
        let r = ProfileFunction::rearranged(p.clone());
        for i in 0..=32 {
            let s = p.m() * i as f64 / 64.0;
            assert!((r.eval(s).r - r.eval(p.m() - s).r).abs() < 1e-10);
        }
        let base = builtins::two_harmonic();
        for i in 1..64 {
            let s = base.m() * i as f64 / 64.0;
            assert!((r.eval(s).r - base.eval(s).r).abs() < 1e-9, "at {s}");
        }
    }

    #[test]
    fn family_constraints() {
        let base = builtins::round();
        assert_eq!(cor_d_family(&base, &[0.0]).unwrap(), base);
        let e = cor_d_family(&base, &[0.0, 1.0]).unwrap_err();
        assert!(matches!(e, RevspecError::ConstraintViolation { .. }));
        assert!(cor_d_family(&builtins::zoll(0.5), &builtins::cubic_f(0.1)).is_err());
    }
}
