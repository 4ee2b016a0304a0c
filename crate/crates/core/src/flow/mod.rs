//! Geodesic flow on the unit tangent bundle in coordinates (σ, θ, β), where
//! β is the angle between the velocity and the parallel through the foot
//! point. The flow is the Reeb field
//!
//! (σ̇, θ̇, β̇) = (sin β, cos β / r, r′ cos β / r),
//!
//! which preserves the Clairaut integral C = r cos β. θ and β are never
//! reduced modulo 2π here, so winding numbers come out as exact integers.

pub mod dopri;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;

use crate::error::{Result, RevspecError};
use crate::numeric::par::{self, Execution};
use crate::profile::ProfileFunction;
use dopri::{DenseStep, Stepper, Vec3};

/// A unit tangent vector together with the arc length accumulated so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowState {
    pub sigma: f64,
    pub theta: f64,
    pub beta: f64,
    pub t: f64,
}

impl FlowState {
    pub fn new(sigma: f64, theta: f64, beta: f64) -> Self {
        Self { sigma, theta, beta, t: 0.0 }
    }

    /// The point of the Birkhoff section with angle β.
    pub fn on_section(p: &ProfileFunction, beta: f64) -> Self {
        Self::new(p.sigma_max(), 0.0, beta)
    }

    pub fn clairaut(&self, p: &ProfileFunction) -> f64 {
        p.eval(self.sigma).r * self.beta.cos()
    }

    fn vector(&self) -> Vec3 {
        [self.sigma, self.theta, self.beta]
    }

    fn from_vector(y: Vec3, t: f64) -> Self {
        Self { sigma: y[0], theta: y[1], beta: y[2], t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Relative and absolute local error tolerance of the integrator.
    pub tol: f64,
    /// Cap on the time spent looking for an event; defaults to 10⁴·m.
    pub tau_cap: Option<f64>,
    /// Distance to the poles, as a fraction of m, below which the chart is abandoned.
    pub sigma_floor: f64,
    /// Distance of β to ±π/2 below which a section point counts as a meridian.
    pub beta_floor: f64,
    /// Closure tolerance in (σ, β) for [`classify_type`].
    pub close_tol_state: f64,
    /// Closure tolerance in θ mod 2π for [`classify_type`].
    pub close_tol_theta: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { tol: 1e-10, tau_cap: None, sigma_floor: 1e-6, beta_floor: 1e-6, close_tol_state: 1e-6, close_tol_theta: 1e-5 }
    }
}

impl FlowOptions {
    pub fn tau_cap_for(&self, p: &ProfileFunction) -> f64 {
        self.tau_cap.unwrap_or(1e4 * p.m())
    }

    /// Per-step tolerance handed to the integrator. The continuous extension
    /// is one order lower than the step, so steps are taken a little tighter
    /// than `tol` to keep interpolated states within it as well.
    fn local_tol(&self) -> f64 {
        0.25 * self.tol
    }

    fn h_max(&self, p: &ProfileFunction) -> f64 {
        0.05 * p.m().min(TAU * p.r_max())
    }

    /// Step cap at state y: profiles with features much narrower than h_max
    /// (the flat-equator staircase) would otherwise be stepped over unseen.
    fn h_cap(&self, p: &ProfileFunction, y: &Vec3) -> f64 {
        let base = self.h_max(p);
        match p.feature_scale(y[0]) {
            Some(w) => base.min(w / y[2].sin().abs().max(f64::MIN_POSITIVE)),
            None => base,
        }
    }
}

fn field(p: &ProfileFunction, floor: f64) -> impl Fn(&Vec3) -> Result<Vec3> + '_ {
    move |y: &Vec3| {
        let sigma = y[0];
        if !(sigma >= floor && sigma <= p.m() - floor) {
            return Err(RevspecError::PoleProximity { detail: format!("sigma = {sigma:e} is within {floor:e} of a pole") });
        }
        let v = p.eval(sigma);
        let (s, c) = y[2].sin_cos();
        Ok([s, c / v.r, v.dr * c / v.r])
    }
}

/// The Reeb field at a state.
pub fn reeb_field(p: &ProfileFunction, s: &FlowState) -> Result<[f64; 3]> {
    field(p, FlowOptions::default().sigma_floor * p.m())(&s.vector())
}

/// A computed orbit segment with its continuous extension.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start: FlowState,
    pub end: FlowState,
    steps: Vec<DenseStep>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    /// State at arc length t (between start.t and end.t).
    pub fn state_at(&self, t: f64) -> Option<FlowState> {
        let forward = self.end.t >= self.start.t;
        let idx = self.steps.partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        let step = self.steps.get(idx)?;
        step.contains(t).then(|| FlowState::from_vector(step.eval(t), t))
    }

    /// Dense samples: step end points plus `per_step − 1` interior points per step.
    pub fn samples(&self, per_step: usize) -> Vec<FlowState> {
        let per_step = per_step.max(1);
        let mut out = vec![self.start];
        for st in &self.steps {
            for j in 1..=per_step {
                let t = st.t0 + st.h * j as f64 / per_step as f64;
                let y = if j == per_step { st.y1 } else { st.eval(t) };
                out.push(FlowState::from_vector(y, t));
            }
        }
        out
    }
}

/// Integrates for arc length `duration` (negative values run backwards).
pub fn integrate(p: &ProfileFunction, s0: FlowState, duration: f64, opts: &FlowOptions) -> Result<Trajectory> {
    let t_end = s0.t + duration;
    if duration == 0.0 {
        return Ok(Trajectory { start: s0, end: s0, steps: Vec::new() });
    }
    let f = field(p, opts.sigma_floor * p.m());
    let mut st = Stepper::new(f, s0.t, s0.vector(), duration, opts.local_tol(), opts.h_max(p))?;
    let mut steps = Vec::new();
    while (t_end - st.t) * duration > 0.0 {
        st.set_h_max(opts.h_cap(p, &st.y));
        steps.push(st.advance(t_end)?);
    }
    Ok(Trajectory { start: s0, end: FlowState::from_vector(st.y, t_end), steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EventKind {
    /// σ crosses σ_max going north (the Birkhoff section).
    EquatorCrossingNorth,
    /// σ crosses σ_max going south.
    EquatorCrossingSouth,
    /// sin β changes sign: the geodesic is tangent to a parallel.
    TurningPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnEvent {
    pub kind: EventKind,
    pub state: FlowState,
}

impl EventKind {
    fn value(self, p: &ProfileFunction, y: &Vec3) -> f64 {
        match self {
            EventKind::EquatorCrossingNorth | EventKind::EquatorCrossingSouth => y[0] - p.sigma_max(),
            EventKind::TurningPoint => y[2].sin(),
        }
    }

    fn rate(self, p: &ProfileFunction, y: &Vec3) -> f64 {
        match self {
            EventKind::EquatorCrossingNorth | EventKind::EquatorCrossingSouth => y[2].sin(),
            EventKind::TurningPoint => {
                let v = p.eval(y[0]);
                let c = y[2].cos();
                c * v.dr * c / v.r
            }
        }
    }

    fn triggered(self, g0: f64, g1: f64) -> bool {
        match self {
            EventKind::EquatorCrossingNorth => g0 < 0.0 && g1 >= 0.0,
            EventKind::EquatorCrossingSouth => g0 > 0.0 && g1 <= 0.0,
            EventKind::TurningPoint => (g0 > 0.0 && g1 <= 0.0) || (g0 < 0.0 && g1 >= 0.0),
        }
    }
}

/// Runs forward from `s0` until the first of `kinds` occurs after the start.
/// The event time is located by bisection on the dense output and then
/// polished by Newton steps on freshly integrated states.
pub fn next_event(p: &ProfileFunction, s0: FlowState, kinds: &[EventKind], opts: &FlowOptions) -> Result<ReturnEvent> {
    let cap = s0.t + opts.tau_cap_for(p);
    let f = field(p, opts.sigma_floor * p.m());
    let mut st = Stepper::new(&f, s0.t, s0.vector(), 1.0, opts.local_tol(), opts.h_max(p))?;
    // A start taken from a previous event sits on that surface, possibly a
    // rounding error on the wrong side; it must not re-fire immediately.
    let start_on: Vec<EventKind> = kinds.iter().copied().filter(|k| k.value(p, &s0.vector()).abs() <= 1e-9 * p.m()).collect();
    let mut first = true;
    while st.t < cap {
        st.set_h_max(opts.h_cap(p, &st.y));
        let step = st.advance(cap)?;
        let skip_start = std::mem::take(&mut first);
        let hit = kinds
            .iter()
            .filter(|k| !(skip_start && start_on.contains(k)))
            .filter(|k| k.triggered(k.value(p, &step.y0), k.value(p, &step.y1)))
            .map(|&k| (k, locate(p, k, &step)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((kind, t_guess)) = hit {
            let (t, y) = polish(p, kind, &st, &step, t_guess)?;
            return Ok(ReturnEvent { kind, state: FlowState::from_vector(y, t) });
        }
    }
    Err(RevspecError::MaxTimeExceeded { cap: opts.tau_cap_for(p) })
}

fn locate(p: &ProfileFunction, kind: EventKind, step: &DenseStep) -> f64 {
    let g0 = kind.value(p, &step.y0);
    let (mut a, mut b) = (step.t0, step.t1());
    while (b - a).abs() > 1e-12 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let g = kind.value(p, &step.eval(mid));
        if (g < 0.0) == (g0 < 0.0) && g != 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn polish<F>(p: &ProfileFunction, kind: EventKind, st: &Stepper<F>, step: &DenseStep, mut t: f64) -> Result<(f64, Vec3)>
where
    F: Fn(&Vec3) -> Result<Vec3>,
{
    let mut y = st.restep(step, t - step.t0)?;
    for _ in 0..3 {
        let g = kind.value(p, &y);
        let rate = kind.rate(p, &y);
        if g == 0.0 || rate == 0.0 {
            break;
        }
        let dt = -g / rate;
        if !dt.is_finite() || dt.abs() > 0.5 * step.h.abs() {
            break;
        }
        t += dt;
        y = st.restep(step, t - step.t0)?;
        if dt.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    Ok((t, y))
}

/// First return time and (unwrapped) angle shift of a section point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnSample {
    pub beta: f64,
    pub eta: f64,
    pub tau: f64,
    pub theta: f64,
}

fn check_section_angle(beta0: f64, opts: &FlowOptions) -> Result<()> {
    if !(beta0 > 0.0 && beta0 < PI) {
        return Err(RevspecError::DomainError { detail: format!("beta = {beta0} is not in (0, pi)") });
    }
    if beta0 != FRAC_PI_2 && (beta0 - FRAC_PI_2).abs() < opts.beta_floor {
        return Err(RevspecError::PoleProximity { detail: format!("beta = {beta0} is within the meridian guard") });
    }
    Ok(())
}

/// First return to the section from (σ_max, 0, β0). Meridians (β0 = π/2)
/// return after 2m with shift 2π.
pub fn first_return(p: &ProfileFunction, beta0: f64, opts: &FlowOptions) -> Result<ReturnSample> {
    check_section_angle(beta0, opts)?;
    let eta = beta0.cos();
    if beta0 == FRAC_PI_2 {
        return Ok(ReturnSample { beta: beta0, eta: 0.0, tau: 2.0 * p.m(), theta: TAU });
    }
    let ev = next_event(p, FlowState::on_section(p, beta0), &[EventKind::EquatorCrossingNorth], opts)?;
    Ok(ReturnSample { beta: beta0, eta, tau: ev.state.t, theta: ev.state.theta })
}

/// [`first_return`] over a grid of angles.
pub fn return_map(p: &ProfileFunction, betas: &[f64], exec: Execution, opts: &FlowOptions) -> Vec<Result<ReturnSample>> {
    par::map(exec, betas, |&b| first_return(p, b, opts))
}

/// First time τ₁ at which the geodesic from (σ_max, 0, β0) is tangent to a parallel.
pub fn tau1(p: &ProfileFunction, beta0: f64, opts: &FlowOptions) -> Result<f64> {
    Ok(turning_point(p, beta0, opts)?.t)
}

fn turning_point(p: &ProfileFunction, beta0: f64, opts: &FlowOptions) -> Result<FlowState> {
    if !(beta0 > 0.0 && beta0 < FRAC_PI_2) {
        return Err(RevspecError::DomainError { detail: format!("beta = {beta0} is not in (0, pi/2)") });
    }
    check_section_angle(beta0, opts)?;
    Ok(next_event(p, FlowState::on_section(p, beta0), &[EventKind::TurningPoint], opts)?.state)
}

/// Δ(t, β0) = θ(t) − θ(0) − (cos β0 / r_max)·t.
pub fn discrepancy(p: &ProfileFunction, beta0: f64, t: f64, opts: &FlowOptions) -> Result<f64> {
    let tr = integrate(p, FlowState::on_section(p, beta0), t, opts)?;
    Ok(tr.end.theta - beta0.cos() / p.r_max() * t)
}

/// Δ(τ₁(β0), β0), from a single integration.
pub fn turning_discrepancy(p: &ProfileFunction, beta0: f64, opts: &FlowOptions) -> Result<f64> {
    let s = turning_point(p, beta0, opts)?;
    Ok(s.theta - beta0.cos() / p.r_max() * s.t)
}

/// max |Δ(t, β0)| over one return, sampled on the dense output.
pub fn max_discrepancy(p: &ProfileFunction, beta0: f64, opts: &FlowOptions) -> Result<f64> {
    let ret = first_return(p, beta0, opts)?;
    let tr = integrate(p, FlowState::on_section(p, beta0), ret.tau, opts)?;
    let rate = beta0.cos() / p.r_max();
    Ok(tr.samples(8).iter().map(|s| (s.theta - rate * s.t).abs()).fold(0.0, f64::max))
}

/// A closed orbit confirmed by integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedOrbit {
    pub p: u32,
    pub q: u32,
    pub length: f64,
    /// max of the (σ, β) and θ-mod-2π closure residuals.
    pub residual: f64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Follows the section point with coordinate η = cos β through q returns
/// and reads off its type. For η < 0 the angle shift is counted in the lift
/// on which the section coordinate of η < 0 points is continuous with η > 0,
/// which adds 2 to the winding per return.
pub fn classify_type(p: &ProfileFunction, eta: f64, q: u32, opts: &FlowOptions) -> Result<ClosedOrbit> {
    if !(eta > -1.0 && eta < 1.0) || q == 0 {
        return Err(RevspecError::DomainError { detail: format!("eta = {eta}, q = {q}") });
    }
    let beta0 = eta.acos();
    if eta == 0.0 {
        return if q == 1 { Ok(ClosedOrbit { p: 1, q: 1, length: 2.0 * p.m(), residual: 0.0 }) } else { Err(RevspecError::NotClosed { residual: 0.0 }) };
    }
    check_section_angle(beta0, opts)?;
    let mut s = FlowState::on_section(p, beta0);
    for _ in 0..q {
        s = next_event(p, s, &[EventKind::EquatorCrossingNorth], opts)?.state;
    }
    let total = s.theta;
    let turns = (total / TAU).round();
    let theta_res = (total - TAU * turns).abs();
    let beta_res = (s.beta - beta0 - TAU * ((s.beta - beta0) / TAU).round()).abs();
    let sigma_res = (s.sigma - p.sigma_max()).abs();
    let state_res = beta_res.max(sigma_res);
    let residual = state_res.max(theta_res);
    if state_res > opts.close_tol_state || theta_res > opts.close_tol_theta {
        return Err(RevspecError::NotClosed { residual });
    }
    let winding = if eta < 0.0 { turns as i64 + 2 * q as i64 } else { turns as i64 };
    if winding <= 0 || gcd(winding as u64, q as u64) != 1 {
        return Err(RevspecError::CoprimalityError { p: winding.max(0) as u32, q });
    }
    Ok(ClosedOrbit { p: winding as u32, q, length: s.t, residual })
}

/// Margin (relative to r_max) that keeps |C| away from the equator orbits.
pub const EQUATOR_MARGIN: f64 = 1e-8;

/// The conjugacy between isospectral metrics obtained by continuing the
/// identity of the two Birkhoff sections along the flows.
pub fn conjugacy_eval(p1: &ProfileFunction, p2: &ProfileFunction, v: FlowState, opts: &FlowOptions) -> Result<FlowState> {
    let c = v.clairaut(p1);
    if c.abs() >= p1.r_max() * (1.0 - EQUATOR_MARGIN) {
        return Err(RevspecError::OnEquatorOrbit { clairaut: c.abs() });
    }
    let on_section = (v.sigma - p1.sigma_max()).abs() <= 1e-13 * p1.m() && v.beta.sin() > 0.0;
    if on_section {
        return Ok(FlowState { sigma: p2.sigma_max(), ..v });
    }
    let hit = next_event(p1, v, &[EventKind::EquatorCrossingNorth], opts)?.state;
    let image = FlowState { sigma: p2.sigma_max(), ..hit };
    let back = integrate(p2, image, v.t - hit.t, opts)?;
    Ok(back.end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::builtins;

    fn opts() -> FlowOptions {
        FlowOptions::default()
    }

    #[test]
    fn reeb_field_examples() {
        let p = builtins::round();
        let f = |s, b| reeb_field(&p, &FlowState::new(s, 0.0, b)).unwrap();
        let a = f(FRAC_PI_2, 0.0);
        assert!((a[0]).abs() < 1e-15 && (a[1] - 1.0).abs() < 1e-15 && a[2].abs() < 1e-15);
        let b = f(FRAC_PI_2, FRAC_PI_2);
        assert!((b[0] - 1.0).abs() < 1e-15 && b[1].abs() < 1e-15 && b[2].abs() < 1e-15);
        let c = f(PI / 4.0, 0.0);
        assert!(c[0] == 0.0 && (c[1] - 2f64.sqrt()).abs() < 1e-14 && (c[2] - 1.0).abs() < 1e-14);
        assert!(reeb_field(&p, &FlowState::new(1e-9, 0.0, 0.3)).is_err());
    }

    #[test]
    fn round_sphere_orbits_close_after_two_pi() {
        let p = builtins::round();
        let eq = integrate(&p, FlowState::new(FRAC_PI_2, 0.0, 0.0), TAU, &opts()).unwrap().end;
        assert!((eq.sigma - FRAC_PI_2).abs() < 1e-12 && (eq.theta - TAU).abs() < 1e-9 && eq.beta.abs() < 1e-12);
        let e = integrate(&p, FlowState::new(FRAC_PI_2, 0.0, PI / 3.0), TAU, &opts()).unwrap().end;
        assert!((e.sigma - FRAC_PI_2).abs() < 1e-8 && (e.theta - TAU).abs() < 1e-8 && (e.beta - PI / 3.0).abs() < 1e-8);
        for b in [PI / 3.0, 2.0 * PI / 5.0] {
            let r = first_return(&p, b, &opts()).unwrap();
            assert!((r.tau - TAU).abs() < 1e-9 && (r.theta - TAU).abs() < 1e-9, "{r:?}");
        }
        let mer = first_return(&p, FRAC_PI_2, &opts()).unwrap();
        assert_eq!((mer.tau, mer.theta), (TAU, TAU));
        assert!(matches!(first_return(&p, FRAC_PI_2 + 1e-8, &opts()), Err(RevspecError::PoleProximity { .. })));
    }

    #[test]
    fn clairaut_drift_and_reversibility() {
        let o = opts();
        for p in builtins::positive_curvature_panel() {
            for b in [0.2, 0.9, 1.3, 2.0] {
                let s0 = FlowState::on_section(&p, b);
                let c0 = s0.clairaut(&p);
                let tr = integrate(&p, s0, 12.0, &o).unwrap();
                let drift = tr.samples(4).iter().map(|s| (s.clairaut(&p) - c0).abs()).fold(0.0, f64::max);
                assert!(drift <= 10.0 * o.tol, "{} beta {b}: drift {drift:e}", p.kind_name());
                let back = integrate(&p, tr.end, -12.0, &o).unwrap().end;
                let err = (back.sigma - s0.sigma).abs().max((back.theta - s0.theta).abs()).max((back.beta - s0.beta).abs());
                assert!(err <= 100.0 * o.tol, "{} beta {b}: reversibility {err:e}", p.kind_name());
                assert!(back.t.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reflected_angle_reverses_the_shift() {
        let p = builtins::two_harmonic_deformed();
        for b in [0.3, 0.8, 1.4] {
            let a = first_return(&p, b, &opts()).unwrap();
            let r = first_return(&p, PI - b, &opts()).unwrap();
            assert!((a.tau - r.tau).abs() < 1e-8);
            // In the section lift, the shift at -η is 4π − Θ(η).
            assert!((a.theta + r.theta).abs() < 1e-8, "{} {}", a.theta, r.theta);
        }
    }

    #[test]
    fn turning_point_of_a_great_circle() {
        let p = builtins::round();
        let t1 = tau1(&p, PI / 3.0, &opts()).unwrap();
        assert!((t1 - FRAC_PI_2).abs() < 1e-10);
        // The apex of a great circle lies a quarter turn from its node.
        let d = turning_discrepancy(&p, PI / 3.0, &opts()).unwrap();
        assert!((d - (FRAC_PI_2 - 0.5 * FRAC_PI_2)).abs() < 1e-9, "{d}");
    }

    #[test]
    fn closed_orbits_and_non_closed_points() {
        let p = builtins::round();
        let o = classify_type(&p, 0.5, 1, &opts()).unwrap();
        assert_eq!((o.p, o.q), (1, 1));
        assert!((o.length - TAU).abs() < 1e-8);
        let z = classify_type(&builtins::zoll(0.5), 0.3, 1, &opts()).unwrap();
        assert_eq!((z.p, z.q), (1, 1));
        assert!((z.length - TAU).abs() < 1e-8);
        let e = classify_type(&builtins::two_harmonic(), 0.5, 1, &opts()).unwrap_err();
        assert_eq!(e.name(), "NotClosed");
    }

    #[test]
    fn self_conjugacy_is_the_identity() {
        let p = builtins::two_harmonic();
        let v = FlowState { sigma: 1.0, theta: 0.4, beta: 0.7, t: 0.0 };
        let h = conjugacy_eval(&p, &p, v, &opts()).unwrap();
        assert!((h.sigma - v.sigma).abs() < 1e-8 && (h.theta - v.theta).abs() < 1e-8 && (h.beta - v.beta).abs() < 1e-8);
        let on = FlowState::on_section(&p, 0.4);
        let q = builtins::two_harmonic_deformed();
        let c = conjugacy_eval(&p, &q, on, &opts()).unwrap();
        assert_eq!((c.sigma, c.theta, c.beta), (q.sigma_max(), 0.0, 0.4));
        let eq = FlowState::on_section(&p, 0.0);
        assert!(matches!(conjugacy_eval(&p, &q, eq, &opts()), Err(RevspecError::OnEquatorOrbit { .. })));
    }
}
