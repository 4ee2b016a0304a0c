//! Dormand–Prince 5(4) for autonomous systems in ℝ³, with the standard
//! fourth-order continuous extension.

use crate::error::{Result, RevspecError};

pub type Vec3 = [f64; 3];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy(y: &Vec3, h: f64, terms: &[(f64, &Vec3)]) -> Vec3 {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..3 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    pub y0: Vec3,
    pub y1: Vec3,
    coeffs: [Vec3; 4],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at time t (meaningful for t within the step).
    pub fn eval(&self, t: f64) -> Vec3 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [r2, r3, r4, r5] = &self.coeffs;
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.y0[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
        }
        out
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.h >= 0.0 { (self.t0, self.t1()) } else { (self.t1(), self.t0) };
        t >= a && t <= b
    }
}

/// Result of a single trial step.
struct Trial {
    y1: Vec3,
    k7: Vec3,
    err: f64,
    dense: [Vec3; 4],
}

/// Adaptive integrator state for y′ = f(y).
pub struct Stepper<F> {
    f: F,
    tol: f64,
    h_max: f64,
    pub t: f64,
    pub y: Vec3,
    k1: Vec3,
    h: f64,
    direction: f64,
}

impl<F> Stepper<F>
where
    F: Fn(&Vec3) -> Result<Vec3>,
{
    pub fn new(f: F, t0: f64, y0: Vec3, direction: f64, tol: f64, h_max: f64) -> Result<Self> {
        let k1 = f(&y0)?;
        let mut s = Self { f, tol, h_max, t: t0, y: y0, k1, h: 0.0, direction: direction.signum() };
        s.h = s.initial_step()?;
        Ok(s)
    }

    fn scale(&self, a: &Vec3, b: &Vec3, i: usize) -> f64 {
        self.tol + self.tol * a[i].abs().max(b[i].abs())
    }

    fn norm(&self, v: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            let q = v[i] / self.scale(a, b, i);
            acc += q * q;
        }
        (acc / 3.0).sqrt()
    }

    /// Hairer's starting step heuristic.
    fn initial_step(&self) -> Result<f64> {
        let y0 = self.y;
        let d0 = self.norm(&y0, &y0, &y0);
        let d1 = self.norm(&self.k1, &y0, &y0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.h_max);
        let y1 = axpy(&y0, self.direction * h0, &[(1.0, &self.k1)]);
        let k2 = (self.f)(&y1)?;
        let diff = [k2[0] - self.k1[0], k2[1] - self.k1[1], k2[2] - self.k1[2]];
        let d2 = self.norm(&diff, &y0, &y0) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        Ok((100.0 * h0).min(h1).min(self.h_max) * self.direction)
    }

    fn trial(&self, h: f64) -> Result<Trial> {
        let f = &self.f;
        let y = &self.y;
        let k1 = &self.k1;
        let k2 = f(&axpy(y, h, &[(A21, k1)]))?;
        let k3 = f(&axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
        let k4 = f(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = f(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
        let k6 = f(&axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
        let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(&y1)?;
        let e = axpy(&[0.0; 3], h, &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
        let err = self.norm(&e, y, &y1);
        let mut r2 = [0.0; 3];
        let mut r3 = [0.0; 3];
        let mut r4 = [0.0; 3];
        let mut r5 = [0.0; 3];
        for i in 0..3 {
            r2[i] = y1[i] - y[i];
            r3[i] = h * k1[i] - r2[i];
            r4[i] = r2[i] - h * k7[i] - r3[i];
            r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        Ok(Trial { y1, k7, err, dense: [r2, r3, r4, r5] })
    }

    /// Changes the largest step allowed from now on.
    pub fn set_h_max(&mut self, h_max: f64) {
        self.h_max = h_max;
    }

    /// Takes one accepted step, never overshooting `t_stop`.
    pub fn advance(&mut self, t_stop: f64) -> Result<DenseStep> {
        loop {
            let remaining = t_stop - self.t;
            if remaining * self.direction <= 0.0 {
                return Err(RevspecError::StepFailure { t: self.t });
            }
            let mut h = self.h.abs().min(self.h_max) * self.direction;
            let last = h.abs() >= remaining.abs();
            if last {
                h = remaining;
            }
            if h.abs() <= 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(RevspecError::StepFailure { t: self.t });
            }
            let trial = match self.trial(h) {
                Ok(t) => t,
                Err(RevspecError::PoleProximity { .. }) if h.abs() > 1e-12 => {
                    // A stage left the chart; retry with a smaller step and only
                    // report the failure if the accepted trajectory itself gets there.
                    self.h = 0.25 * h.abs();
                    continue;
                }
                Err(e) => return Err(e),
            };
            let err = if trial.err.is_finite() { trial.err } else { f64::INFINITY };
            let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
            if err <= 1.0 {
                let step = DenseStep { t0: self.t, h, y0: self.y, y1: trial.y1, coeffs: trial.dense };
                self.t = if last { t_stop } else { self.t + h };
                self.y = trial.y1;
                self.k1 = trial.k7;
                if !last || fac < 1.0 {
                    self.h = h.abs() * fac.min(5.0);
                }
                return Ok(step);
            }
            self.h = h.abs() * fac.min(1.0);
        }
    }

    /// A single unchecked step of size h from the state at `step.t0`.
    pub fn restep(&self, step: &DenseStep, h: f64) -> Result<Vec3> {
        let k1 = (self.f)(&step.y0)?;
        let tmp = Stepper { f: &self.f, tol: self.tol, h_max: self.h_max, t: step.t0, y: step.y0, k1, h, direction: self.direction };
        Ok(tmp.trial(h)?.y1)
    }
}
