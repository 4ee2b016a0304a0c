//! Named profiles used by the CLI, the tests and the benches.

use std::f64::consts::PI;

use super::{Deformation, FlatEquatorParams, ProfileFunction};

/// Unit round sphere.
pub fn round() -> ProfileFunction {
    ProfileFunction::round(1.0)
}

/// r = sin σ − 0.2 sin³σ on [0, π]: r′ = cos σ (0.4 + 0.6 cos²σ),
/// r_max = 0.8, equator curvature 1/2.
pub fn two_harmonic() -> ProfileFunction {
    ProfileFunction::symmetric_base(PI, &[0.85, 0.05]).expect("valid coefficients")
}

/// r = sin σ − sin³σ/3: r′ = cos³σ, so r_max − r ≈ (σ − π/2)⁴/4 and the
/// curvature vanishes to second order at the equator.
pub fn quartic_flat() -> ProfileFunction {
    ProfileFunction::symmetric_base(PI, &[0.75, 1.0 / 12.0]).expect("valid coefficients")
}

/// The odd cubic f(u) = ε u (u² − 1), in the power basis.
pub fn cubic_f(eps: f64) -> Vec<f64> {
    vec![0.0, -eps, 0.0, eps]
}

/// Zoll sphere: the round sphere deformed by f(u) = ε u (u² − 1).
pub fn zoll(eps: f64) -> ProfileFunction {
    let base = round();
    let d = Deformation::from_polynomial(base.m(), &cubic_f(eps)).expect("admissible deformation");
    ProfileFunction::deformed(base, d)
}

/// A non-Zoll, non-symmetric profile isospectral to [`two_harmonic`].
pub fn two_harmonic_deformed() -> ProfileFunction {
    let base = two_harmonic();
    let d = Deformation::from_polynomial(base.m(), &[0.0, -0.3, 0.0, 0.1, 0.0, 0.2]).expect("admissible deformation");
    ProfileFunction::deformed(base, d)
}

/// The infinite-order flat equator with default parameters.
pub fn flat_equator() -> ProfileFunction {
    ProfileFunction::flat_equator(PI, FlatEquatorParams::default())
}

/// Profiles with positive equator curvature and smooth return data.
pub fn positive_curvature_panel() -> Vec<ProfileFunction> {
    vec![round(), two_harmonic(), zoll(0.5), two_harmonic_deformed()]
}

/// Looks up a builtin by name.
pub fn by_name(name: &str) -> Option<ProfileFunction> {
    Some(match name {
        "round" => round(),
        "round_half" => ProfileFunction::round(0.5),
        "two_harmonic" => two_harmonic(),
        "quartic_flat" => quartic_flat(),
        "zoll" => zoll(0.5),
        "two_harmonic_deformed" => two_harmonic_deformed(),
        "flat_equator" => flat_equator(),
        _ => return None,
    })
}

pub const NAMES: &[&str] = &["round", "round_half", "two_harmonic", "quartic_flat", "zoll", "two_harmonic_deformed", "flat_equator"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::VALIDATION_TOL;

    #[test]
    fn every_builtin_validates() {
        for name in NAMES {
            let p = by_name(name).unwrap();
            let rep = p.validate(VALIDATION_TOL);
            assert!(rep.passed, "{name}: {:?}", rep.checks);
        }
    }

    #[test]
    fn closed_forms_of_the_harmonic_profiles() {
        let p = two_harmonic();
        assert!((p.r_max() - 0.8).abs() < 1e-15);
        assert!((p.equator_curvature() - 0.5).abs() < 1e-14);
        let q = quartic_flat();
        for s in [0.3, 1.0, 2.0] {
            assert!((q.eval(s).dr - s.cos().powi(3)).abs() < 1e-14);
        }
        assert!((q.r_max() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zoll_is_not_symmetric_but_its_base_is() {
        assert!(!zoll(0.5).is_symmetric());
        assert!(round().is_symmetric());
    }
}
