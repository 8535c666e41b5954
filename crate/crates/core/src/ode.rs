//! Adaptive Dormand-Prince 5(4) integrator for small autonomous or
//! non-autonomous systems, with per-step observation for event handling.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude.
    pub h_init: f64,
    /// Upper bound on the step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.rtol = tol;
        self.atol = tol;
        self
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

/// One accepted step: endpoints and derivatives, enough for cubic Hermite
/// interpolation inside the step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub f0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> StepInfo<N> {
    /// Cubic Hermite interpolant at `t` inside the step.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeEnd<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// True when the observer stopped the integration before `t_end`.
    pub stopped: bool,
    pub steps: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (w, k) in terms {
            acc += w * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `observe` sees every accepted step and may stop the integration.
pub fn integrate<const N: usize, F, O>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut observe: O,
) -> Result<OdeEnd<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(&StepInfo<N>) -> Flow,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = opts.h_init.min(opts.h_max).min(span.max(f64::MIN_POSITIVE));
    let mut steps = 0usize;
    let mut rejects_in_row = 0usize;

    while (t_end - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::Numerics(format!(
                "ODE integrator exceeded {} steps at t = {t}",
                opts.max_steps
            )));
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;

        let k2 = f(t + C2 * hs, &axpy(&y, &[(A21, &k1)], hs));
        let k3 = f(t + C3 * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs));
        let k4 = f(t + C4 * hs, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs));
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs),
        );
        let k6 = f(
            t + hs,
            &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs),
        );
        let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], hs);
        let t_new = if last { t_end } else { t + hs };
        let k7 = f(t_new, &y_new);

        let mut err = 0.0;
        for i in 0..N {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            rejects_in_row += 1;
            if h < 1e-300 || rejects_in_row > 200 {
                return Err(Error::Numerics(format!("ODE integrator produced non-finite state at t = {t}")));
            }
            continue;
        }

        if err <= 1.0 {
            steps += 1;
            rejects_in_row = 0;
            let info = StepInfo {
                t0: t,
                y0: y,
                f0: k1,
                t1: t_new,
                y1: y_new,
                f1: k7,
            };
            t = t_new;
            y = y_new;
            k1 = k7;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
            if observe(&info) == Flow::Stop {
                return Ok(OdeEnd { t, y, stopped: true, steps });
            }
        } else {
            rejects_in_row += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::Numerics(format!("ODE step size underflow at t = {t}")));
            }
        }
    }
    Ok(OdeEnd { t, y, stopped: false, steps })
}
