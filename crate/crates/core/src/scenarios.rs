//! The two discrepancy experiments: growth of Δ(τ₁(β), β) along a sequence
//! β_k ↓ 0 on the flat-equator sphere, and its decay on a sphere whose
//! curvature is nonnegative.
//!
//! Δ(t, β) = θ(t) − (cos β / r_max)·t measures how far the geodesic drifts
//! from the rotation it would have on a round sphere of radius r_max.

use serde::Serialize;

use crate::abel;
use crate::error::{Result, RevspecError};
use crate::flow::{self, FlowOptions};
use crate::numeric::par::{self, Execution};
use crate::profile::{ProfileFunction, ProfileKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnstableStep {
    pub k: u32,
    /// σ-distance from the equator of the turning point, λ·4^{-k} in units of r_max.
    pub turning_offset: f64,
    /// Clairaut drop r_max − C at the turning point.
    pub drop: f64,
    pub beta: f64,
    pub tau1: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnstableReport {
    pub steps: Vec<UnstableStep>,
    /// Δ(τ₁(β₁), β₁) from the geodesic ODE, for comparison with the first step.
    pub ode_check: Option<f64>,
    pub ode_error: Option<String>,
    /// Length of the longest run of consecutive increases of Δ.
    pub longest_increasing_run: usize,
    /// Largest Δ_k / Δ_1.
    pub growth_factor: f64,
    /// First k whose arc could not be integrated, with the error; the
    /// sequence stops there.
    pub stopped_at: Option<(u32, String)>,
}

/// Section angle with 1 − cos β = d / r_max, accurate for tiny d.
pub fn beta_for_drop(r_max: f64, d: f64) -> f64 {
    2.0 * (0.5 * d / r_max).sqrt().asin()
}

/// Runs the sequence of geodesics that turn at σ = σ_max + r_max·λ·4^{-k},
/// i.e. at the outer ends of the staircase plateaus, for k = 1..=k_max.
/// There r′ is tiny, the geodesic lingers near the turning parallel and Δ
/// picks up a large contribution.
pub fn unstable_equator(p: &ProfileFunction, k_max: u32, ode_check: bool, exec: Execution) -> Result<UnstableReport> {
    let ProfileKind::FlatEquator(shape) = p.kind() else {
        return Err(RevspecError::Config(format!("unstable-equator sequence needs a flat_equator profile, got {}", p.kind_name())));
    };
    let lambda = shape.params.length_scale;
    let rm = p.r_max();
    let ks: Vec<u32> = (1..=k_max).collect();
    let results: Vec<Result<UnstableStep>> = par::map(exec, &ks, |&k| {
        let offset = lambda * 4f64.powi(-(k as i32));
        let sigma_e = p.sigma_max() + rm * offset;
        let drop = p.drop_at(sigma_e);
        let arc = abel::turning_arc_at_sigma(p, sigma_e)?;
        Ok(UnstableStep { k, turning_offset: offset, drop, beta: beta_for_drop(rm, drop), tau1: arc.length, discrepancy: arc.discrepancy })
    });
    let mut steps = Vec::new();
    let mut stopped = None;
    for (k, r) in ks.iter().zip(results) {
        match r {
            Ok(s) => steps.push(s),
            Err(e) => {
                stopped = Some((*k, e.to_string()));
                break;
            }
        }
    }
    let (mut ode, mut ode_error) = (None, None);
    if ode_check {
        if let Some(first) = steps.first() {
            let opts = FlowOptions { tol: 1e-12, tau_cap: Some(1e6 * p.m()), beta_floor: 1e-9, ..FlowOptions::default() };
            match flow::turning_discrepancy(p, first.beta, &opts) {
                Ok(v) => ode = Some(v),
                Err(e) => ode_error = Some(e.to_string()),
            }
        }
    }
    let mut longest = 0usize;
    let mut run = 0usize;
    for w in steps.windows(2) {
        if w[1].discrepancy > w[0].discrepancy {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    let growth_factor = match steps.first() {
        Some(f) if f.discrepancy != 0.0 => steps.iter().map(|s| s.discrepancy / f.discrepancy).fold(f64::NEG_INFINITY, f64::max),
        _ => f64::NAN,
    };
    Ok(UnstableReport { steps, ode_check: ode, ode_error, longest_increasing_run: longest, growth_factor, stopped_at: stopped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilitySample {
    pub beta: f64,
    pub max_discrepancy: f64,
    /// β·τ(β): bounded as β → 0 when the equator curvature is positive.
    pub beta_tau: f64,
}

/// max |Δ| over one return and β·τ along β = 2^{-j}, j in `exponents`.
pub fn stability_contrast(p: &ProfileFunction, exponents: &[i32], exec: Execution) -> Result<Vec<StabilitySample>> {
    let opts = FlowOptions::default();
    par::map(exec, exponents, |&j| {
        let beta = 2f64.powi(-j);
        let md = flow::max_discrepancy(p, beta, &opts)?;
        let tau = flow::first_return(p, beta, &opts)?.tau;
        Ok(StabilitySample { beta, max_discrepancy: md, beta_tau: beta * tau })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::builtins;

    #[test]
    fn unstable_sequence_grows() {
        let rep = unstable_equator(&builtins::flat_equator(), 4, false, Execution::Parallel).unwrap();
        assert!(rep.longest_increasing_run >= 3, "{rep:?}");
        assert!(rep.growth_factor > 3.0);
        assert!(unstable_equator(&builtins::round(), 2, false, Execution::Sequential).is_err());
    }

    #[test]
    fn round_is_stable() {
        let s = stability_contrast(&builtins::round(), &[2, 4, 6], Execution::Sequential).unwrap();
        assert!(s.windows(2).all(|w| w[1].max_discrepancy < w[0].max_discrepancy));
    }

    #[test]
    fn small_drop_angles() {
        assert!((beta_for_drop(1.0, 1.0 - 0.3f64.cos()) - 0.3).abs() < 1e-14);
        assert!((beta_for_drop(1.0, 1e-30) - 2f64.sqrt() * 1e-15).abs() < 1e-28);
    }
}
