//! Semi-wave profiles and the asymptotic spreading speed.
//!
//! A semi-wave with speed `c` solves `d q'' - c q' + a q - b q^2 = 0` on
//! `(0, inf)` with `q(0) = 0`, `q(+inf) = a/b`. In the `(q, q')` phase plane it
//! is the branch of the stable manifold of the saddle `(a/b, 0)` that reaches
//! `q = 0` with positive slope. We integrate that branch backwards in `xi`
//! from a point `eps` below the saddle on the stable eigendirection.
//!
//! The spreading speed `c0(mu)` is the root of `mu q_c'(0) = c`.

use serde::{Deserialize, Serialize};

use crate::environment::ModelParams;
use crate::error::{Error, Result};
use crate::ode::{self, Flow, OdeOptions, StepInfo};

/// Offset from the saddle where the backward integration starts.
pub const SADDLE_OFFSET: f64 = 1e-8;
/// Integrator tolerance (absolute and relative).
pub const ODE_TOL: f64 = 1e-10;
/// Absolute tolerance on `c0`.
pub const C0_TOL: f64 = 1e-9;
/// Spacing cap of the exported profile samples.
const PROFILE_MAX_STEP: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiWave {
    pub c: f64,
    /// `q'(0)`.
    pub slope0: f64,
    /// `(xi, q(xi))` on `[0, xi_max]`, increasing in `xi`.
    pub profile: Vec<(f64, f64)>,
    /// `q'(xi)` at the profile abscissae.
    pub slopes: Vec<f64>,
    pub plateau: f64,
    pub kpp_limit: f64,
}

impl SemiWave {
    pub fn xi_max(&self) -> f64 {
        self.profile.last().map(|p| p.0).unwrap_or(0.0)
    }

    /// Linear interpolation of `q`, constant `a/b - eps` beyond `xi_max` and
    /// 0 for negative arguments.
    pub fn eval(&self, xi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        let pts = &self.profile;
        if xi >= self.xi_max() {
            return pts.last().map(|p| p.1).unwrap_or(0.0);
        }
        let k = pts.partition_point(|p| p.0 <= xi);
        let (x0, y0) = pts[k - 1];
        let (x1, y1) = pts[k];
        y0 + (y1 - y0) * (xi - x0) / (x1 - x0)
    }

    /// The mirrored profile `U(xi) = q(-xi)` on `[-xi_max, 0]`, which solves
    /// `d U'' + c U' + a U - b U^2 = 0`.
    pub fn mirrored(&self) -> Vec<(f64, f64)> {
        self.profile.iter().rev().map(|&(x, q)| (-x, q)).collect()
    }

    /// Sup over interior samples of `|d q'' - c q' + a q - b q^2| / (a^2/b)`,
    /// with `q''` from a second-order nonuniform difference of the stored slopes.
    pub fn residual_sup(&self, params: &ModelParams) -> f64 {
        let scale = params.a * params.a / params.b;
        let mut worst: f64 = 0.0;
        for i in 1..self.profile.len().saturating_sub(1) {
            let hm = self.profile[i].0 - self.profile[i - 1].0;
            let hp = self.profile[i + 1].0 - self.profile[i].0;
            let (pm, p0, pp) = (self.slopes[i - 1], self.slopes[i], self.slopes[i + 1]);
            let dp = (hm * hm * pp - hp * hp * pm + (hp * hp - hm * hm) * p0) / (hp * hm * (hp + hm));
            let q = self.profile[i].1;
            let r = params.d * dp - self.c * p0 + params.a * q - params.b * q * q;
            worst = worst.max(r.abs() / scale);
        }
        worst
    }
}

fn check_speed(params: &ModelParams, cw: f64) -> Result<()> {
    if !cw.is_finite() || cw < 0.0 {
        return Err(Error::Domain(format!("wave speed must be finite and >= 0, got {cw}")));
    }
    let kpp = params.kpp_speed();
    if cw >= kpp {
        return Err(Error::NoSemiWave { speed: cw, kpp });
    }
    Ok(())
}

/// Negative eigenvalue of the linearisation at the saddle `(a/b, 0)`.
fn stable_eigenvalue(params: &ModelParams, cw: f64) -> f64 {
    let (a, d) = (params.a, params.d);
    let r = cw / d;
    0.5 * (r - (r * r + 4.0 * a / d).sqrt())
}

struct Shot {
    slope0: f64,
    xi_max: f64,
    /// `(tau, q, p)` with `tau = xi_max - xi`, increasing in `tau`.
    samples: Vec<(f64, f64, f64)>,
}

/// Backward shot from the saddle to `q = 0`.
fn shoot(params: &ModelParams, cw: f64, tol: f64, sample_step: Option<f64>) -> Result<Shot> {
    check_speed(params, cw)?;
    let (a, b, d) = (params.a, params.b, params.d);
    let lam = stable_eigenvalue(params, cw);
    let y0 = [a / b - SADDLE_OFFSET, -lam * SADDLE_OFFSET];
    // tau = -xi: dq/dtau = -p, dp/dtau = -(c p - a q + b q^2)/d
    let rhs = move |_t: f64, y: &[f64; 2]| [-y[1], -(cw * y[1] - a * y[0] + b * y[0] * y[0]) / d];

    let omega = (4.0 * a * d - cw * cw).max(0.0).sqrt() / (2.0 * d);
    let tau_max = (a / (b * SADDLE_OFFSET)).ln() / lam.abs() + 20.0 * std::f64::consts::PI / omega + 100.0;

    let mut opts = OdeOptions::default().with_tol(tol);
    if let Some(h) = sample_step {
        opts = opts.with_h_max(h);
    }
    let mut samples = vec![(0.0, y0[0], y0[1])];
    let record = sample_step.is_some();
    let mut crossing: Option<StepInfo<2>> = None;
    let mut turned = false;
    ode::integrate(rhs, 0.0, y0, tau_max, &opts, |s| {
        if s.y1[0] <= 0.0 {
            crossing = Some(*s);
            return Flow::Stop;
        }
        if s.y1[1] <= 0.0 {
            // q stopped decreasing before reaching 0: not a monotone profile.
            turned = true;
            return Flow::Stop;
        }
        if record {
            samples.push((s.t1, s.y1[0], s.y1[1]));
        }
        Flow::Continue
    })?;
    if turned {
        return Err(Error::NoSemiWave { speed: cw, kpp: params.kpp_speed() });
    }
    let step = crossing.ok_or_else(|| {
        Error::Numerics(format!("semi-wave orbit at speed {cw} did not reach q = 0 by tau = {tau_max}"))
    })?;

    // Locate the crossing on the Hermite interpolant, then polish with exact
    // sub-steps from the start of the crossing step (Newton in tau).
    let (mut lo, mut hi) = (step.t0, step.t1);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if step.interpolate(mid)[0] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut tau_star = 0.5 * (lo + hi);
    let sub_opts = OdeOptions::default().with_tol(tol * 1e-2);
    let mut y_star = step.y0;
    for _ in 0..6 {
        let end = ode::integrate(rhs, step.t0, step.y0, tau_star, &sub_opts, |_| Flow::Continue)?;
        y_star = end.y;
        let dt = y_star[0] / y_star[1];
        tau_star += dt;
        if dt.abs() < 1e-15 * (1.0 + tau_star) {
            break;
        }
    }
    let end = ode::integrate(rhs, step.t0, step.y0, tau_star, &sub_opts, |_| Flow::Continue)?;
    if end.y[0].abs() < y_star[0].abs() || y_star[0] == 0.0 {
        y_star = end.y;
    }
    if record {
        samples.push((tau_star, 0.0, y_star[1]));
    }
    Ok(Shot {
        slope0: y_star[1],
        xi_max: tau_star,
        samples,
    })
}

/// `q_c'(0)` at integrator tolerance `tol`.
pub fn semiwave_slope_with_tol(params: &ModelParams, cw: f64, tol: f64) -> Result<f64> {
    Ok(shoot(params, cw, tol, None)?.slope0)
}

/// `q_c'(0)` at the default tolerance.
pub fn semiwave_slope(params: &ModelParams, cw: f64) -> Result<f64> {
    semiwave_slope_with_tol(params, cw, ODE_TOL)
}

/// Full semi-wave at speed `cw`.
pub fn solve_semiwave_profile(params: &ModelParams, cw: f64) -> Result<SemiWave> {
    let shot = shoot(params, cw, ODE_TOL, Some(PROFILE_MAX_STEP))?;
    let xi_max = shot.xi_max;
    let mut profile = Vec::with_capacity(shot.samples.len());
    let mut slopes = Vec::with_capacity(shot.samples.len());
    let mut last_xi = f64::INFINITY;
    for &(tau, q, p) in shot.samples.iter() {
        let xi = (xi_max - tau).max(0.0);
        if xi >= last_xi {
            continue;
        }
        last_xi = xi;
        profile.push((xi, q));
        slopes.push(p);
    }
    profile.reverse();
    slopes.reverse();
    // The crossing sample sits at xi = 0 exactly.
    if let Some(first) = profile.first_mut() {
        first.0 = 0.0;
        first.1 = 0.0;
    }
    Ok(SemiWave {
        c: cw,
        slope0: shot.slope0,
        profile,
        slopes,
        plateau: params.plateau(),
        kpp_limit: params.kpp_speed(),
    })
}

/// `F(c) = mu q_c'(0) - c`.
pub fn speed_balance(params: &ModelParams, cw: f64) -> Result<f64> {
    Ok(params.mu * semiwave_slope(params, cw)? - cw)
}

/// Asymptotic spreading speed `c0(mu)`, by bisection on [`speed_balance`].
pub fn compute_c0(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let kpp = params.kpp_speed();
    let mut lo = 0.0;
    let f_lo = speed_balance(params, lo)?;
    if f_lo <= 0.0 {
        return Err(Error::Numerics(format!("speed balance not positive at c = 0 ({f_lo})")));
    }
    // Walk towards the KPP speed until the balance turns negative.
    let mut hi = None;
    for k in 1..=48 {
        let c = kpp * (1.0 - 0.5f64.powi(k));
        if speed_balance(params, c)? < 0.0 {
            hi = Some(c);
            break;
        }
        lo = c;
    }
    let mut hi = hi.ok_or_else(|| Error::Numerics("could not bracket c0 below the KPP speed".into()))?;
    while hi - lo > C0_TOL {
        let mid = 0.5 * (lo + hi);
        if speed_balance(params, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The coefficient `mu_C` with `c0(mu_C) = C`, i.e. `C / q_C'(0)`.
pub fn mu_for_speed(params: &ModelParams, speed: f64) -> Result<f64> {
    if speed <= 0.0 {
        return Err(Error::Domain(format!("speed must be positive, got {speed}")));
    }
    Ok(speed / semiwave_slope(params, speed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ModelParams {
        ModelParams {
            mu: 1.0,
            ..ModelParams::default()
        }
    }

    #[test]
    fn standing_wave_matches_first_integral() {
        let p = unit();
        let s = semiwave_slope(&p, 0.0).unwrap();
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-8, "{s}");
        let w = solve_semiwave_profile(&p, 0.0).unwrap();
        assert!((w.slope0 - s).abs() < 1e-9);
        // (d/2) p^2 + a q^2/2 - b q^3/3 is conserved at c = 0.
        let e_inf = p.a.powi(3) / (6.0 * p.b * p.b);
        for (&(_, q), &sl) in w.profile.iter().zip(&w.slopes) {
            let e = 0.5 * p.d * sl * sl + 0.5 * p.a * q * q - p.b * q.powi(3) / 3.0;
            assert!((e - e_inf).abs() < 1e-8);
        }
    }

    #[test]
    fn profile_shape() {
        let p = unit();
        let w = solve_semiwave_profile(&p, 1.0).unwrap();
        assert_eq!(w.profile[0], (0.0, 0.0));
        for pair in w.profile.windows(2) {
            assert!(pair[1].0 > pair[0].0);
            assert!(pair[1].1 > pair[0].1);
        }
        let last = w.profile.last().unwrap().1;
        assert!((last - p.plateau()).abs() < 1e-7);
        assert!(w.residual_sup(&p) < 1e-6, "{}", w.residual_sup(&p));
        let m = w.mirrored();
        assert_eq!(m.last().unwrap().0, 0.0);
    }

    #[test]
    fn rejects_supercritical_speed() {
        let p = unit();
        assert!(matches!(semiwave_slope(&p, 2.0), Err(Error::NoSemiWave { .. })));
        assert!(matches!(semiwave_slope(&p, 3.0), Err(Error::NoSemiWave { .. })));
        assert!(matches!(semiwave_slope(&p, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn slope_decreasing_in_speed() {
        let p = unit();
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let c = 0.049 * k as f64;
            let s = semiwave_slope(&p, c).unwrap();
            assert!(s < prev, "slope not decreasing at c = {c}");
            prev = s;
        }
    }

    #[test]
    fn c0_increasing_in_mu() {
        let mut prev = 0.0;
        for mu in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let p = ModelParams { mu, ..unit() };
            let c0 = compute_c0(&p).unwrap();
            assert!(c0 > prev && c0 < p.kpp_speed());
            prev = c0;
        }
    }

    #[test]
    fn c0_satisfies_balance() {
        let p = unit();
        let c0 = compute_c0(&p).unwrap();
        let s = semiwave_slope(&p, c0).unwrap();
        assert!((p.mu * s - c0).abs() < 1e-8);
        let mu_c = mu_for_speed(&p, c0).unwrap();
        assert!((mu_c - p.mu).abs() < 1e-6);
    }
}
