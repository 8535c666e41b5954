//! Stationary problems in the frame moving with the environment.
//!
//! All problems here are of the form `d V'' + c V' + A(x) V - b V^2 = 0` on an
//! interval `(-l, L)` with `V(L) = 0`:
//!
//! * left value 0: the Dirichlet problem whose positive solution exists iff
//!   the principal eigenvalue on `(-l, L)` is negative;
//! * left value `M = max(|u0|_inf, a/b)`: the upper problem used for comparison;
//! * the endpoint map `l -> L(l)` where the front balance `-mu V'(L) = c` holds;
//! * the borderline pair `(L*, V*)`, the limit of `L(l)` as `l -> inf`.
//!
//! Finite differences use a grid anchored at the right end `x = L` with
//! spacing exactly `max_spacing`; the leftover partial cell sits at `x = -l`.
//! Moving `L` therefore moves every node continuously, which keeps the
//! discrete front slope continuous in `L` for the bisections below.

use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentProfile;
use crate::error::{Error, Result};
use crate::ode::{self, Flow, OdeOptions};
use crate::semiwave;
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticConfig {
    /// Grid spacing of the finite-difference problems.
    pub max_spacing: f64,
    /// Bisection tolerance on endpoints `L`.
    pub endpoint_tol: f64,
}

impl EllipticConfig {
    pub fn for_env(env: &EnvironmentProfile) -> Self {
        Self {
            max_spacing: env.params.l0.min(1.0) / 200.0,
            endpoint_tol: 1e-11,
        }
    }

    pub fn with_spacing(mut self, h: f64) -> Self {
        self.max_spacing = h;
        self
    }
}

/// Positive solution of a two-point problem on `[-l, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryProfile {
    /// Left extent `l` (the left endpoint is `-l`).
    pub l: f64,
    /// Right endpoint `L`.
    #[serde(rename = "L")]
    pub right: f64,
    pub left_value: f64,
    /// `(x, V(x))`, increasing in `x`, endpoints included.
    pub values: Vec<(f64, f64)>,
    /// `V'(L)`.
    pub slope_right: f64,
    /// `V'(-l)`.
    pub slope_left: f64,
}

impl StationaryProfile {
    pub fn max_value(&self) -> f64 {
        self.values.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation, 0 outside `[-l, L]`.
    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.values, x)
    }
}

/// The borderline pair `(L*, V*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderlinePair {
    pub l_star: f64,
    /// Left end of the sampled domain.
    pub x_min: f64,
    /// `(x, V*(x))` on `[x_min, L*]`.
    pub v_star: Vec<(f64, f64)>,
    /// `V*'(L*) = -c/mu`.
    pub slope_right: f64,
}

impl BorderlinePair {
    /// Linear interpolation, 0 outside `[x_min, L*]`.
    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.v_star, x)
    }
}

pub(crate) fn interp(pts: &[(f64, f64)], x: f64) -> f64 {
    let (Some(first), Some(last)) = (pts.first(), pts.last()) else {
        return 0.0;
    };
    if x < first.0 || x > last.0 {
        return 0.0;
    }
    let k = pts.partition_point(|p| p.0 <= x);
    if k == 0 {
        return first.1;
    }
    if k >= pts.len() {
        return last.1;
    }
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn check_interval(l: f64, right: f64) -> Result<()> {
    if !l.is_finite() || !right.is_finite() {
        return Err(Error::Domain(format!("interval ends must be finite, got l = {l}, L = {right}")));
    }
    if right <= -l {
        return Err(Error::Domain(format!("need L > -l, got l = {l}, L = {right}")));
    }
    Ok(())
}

/// Principal eigenpair of `-d phi'' - c phi' - A phi = lambda phi` on `(-l, L)`
/// with zero Dirichlet data. The eigenfunction is returned on the interior
/// nodes of a uniform grid, normalised to unit maximum.
pub fn principal_eigenpair(
    env: &EnvironmentProfile,
    l: f64,
    right: f64,
    cfg: &EllipticConfig,
) -> Result<(f64, Vec<(f64, f64)>)> {
    check_interval(l, right)?;
    let p = &env.params;
    let len = right + l;
    let n = (len / cfg.max_spacing).ceil() as usize;
    if n < 4 {
        return Err(Error::Numerics(format!(
            "eigenvalue grid too coarse: {n} cells on an interval of length {len}"
        )));
    }
    let h = len / n as f64;
    let shift = p.c * p.c / (4.0 * p.d);
    let k = p.d / (h * h);
    let xs: Vec<f64> = (1..n).map(|i| -l + i as f64 * h).collect();
    // phi = exp(-c x / 2d) psi turns the operator into -d psi'' + (c^2/4d - A) psi.
    let diag: Vec<f64> = xs.iter().map(|&x| 2.0 * k + shift - env.rate(x)).collect();
    let off = vec![-k; n - 2];
    let (lambda, psi) = tridiag::lowest_eigenpair(&diag, &off)?;
    if !lambda.is_finite() {
        return Err(Error::Numerics("non-finite principal eigenvalue".into()));
    }
    let logs: Vec<f64> = xs
        .iter()
        .zip(&psi)
        .map(|(&x, &s)| s.abs().max(f64::MIN_POSITIVE).ln() - p.c * x / (2.0 * p.d))
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let phi = xs.iter().zip(&logs).map(|(&x, &lg)| (x, (lg - top).exp())).collect();
    Ok((lambda, phi))
}

/// Principal Dirichlet eigenvalue `lambda_1[-l, L]`.
pub fn principal_eigenvalue(env: &EnvironmentProfile, l: f64, right: f64, cfg: &EllipticConfig) -> Result<f64> {
    Ok(principal_eigenpair(env, l, right, cfg)?.0)
}

/// Right-anchored grid on `[-l, L]`.
struct Grid {
    xs: Vec<f64>,
    /// Width of the first (partial) cell.
    first: f64,
    h: f64,
}

impl Grid {
    fn new(l: f64, right: f64, h: f64) -> Result<Self> {
        let len = right + l;
        let mut n = (len / h).ceil() as usize;
        let mut first = len - (n as f64 - 1.0) * h;
        if first <= 1e-9 * h {
            n -= 1;
            first += h;
        }
        if n < 3 {
            return Err(Error::Numerics(format!("interval of length {len} too short for spacing {h}")));
        }
        let mut xs = Vec::with_capacity(n + 1);
        xs.push(-l);
        for i in 1..=n {
            xs.push(right - (n - i) as f64 * h);
        }
        Ok(Self { xs, first, h })
    }

    fn cells(&self) -> usize {
        self.xs.len() - 1
    }

    fn spacing_left_of(&self, i: usize) -> f64 {
        if i == 1 {
            self.first
        } else {
            self.h
        }
    }
}

/// One-sided three-point derivative at `x0` from nodes `x0, x0 + s1, x0 + s1 + s2`.
fn one_sided(v0: f64, v1: f64, v2: f64, s1: f64, s2: f64) -> f64 {
    -(2.0 * s1 + s2) / (s1 * (s1 + s2)) * v0 + (s1 + s2) / (s1 * s2) * v1 - s1 / (s2 * (s1 + s2)) * v2
}

struct Discretization<'a> {
    env: &'a EnvironmentProfile,
    grid: Grid,
    rates: Vec<f64>,
    left_value: f64,
}

impl<'a> Discretization<'a> {
    fn new(env: &'a EnvironmentProfile, grid: Grid, left_value: f64) -> Self {
        let rates = grid.xs.iter().map(|&x| env.rate(x)).collect();
        Self {
            env,
            grid,
            rates,
            left_value,
        }
    }

    /// Stencil weights `(w_left, w_centre, w_right)` of `d V'' + c V'` at node `i`.
    fn stencil(&self, i: usize) -> (f64, f64, f64) {
        let p = &self.env.params;
        let hl = self.grid.spacing_left_of(i);
        let hr = self.grid.h;
        let s = hl + hr;
        let wl = 2.0 * p.d / (s * hl) - p.c * hr / (hl * s);
        let wr = 2.0 * p.d / (s * hr) + p.c * hl / (hr * s);
        let wc = -2.0 * p.d / (hl * hr) + p.c * (hr - hl) / (hl * hr);
        (wl, wc, wr)
    }

    fn value(&self, v: &[f64], i: usize) -> f64 {
        if i == 0 {
            self.left_value
        } else if i == self.grid.cells() {
            0.0
        } else {
            v[i - 1]
        }
    }

    /// Residual on interior nodes; `v` holds interior values only.
    fn residual(&self, v: &[f64], out: &mut [f64]) {
        let b = self.env.params.b;
        for i in 1..self.grid.cells() {
            let (wl, wc, wr) = self.stencil(i);
            let vi = v[i - 1];
            out[i - 1] = wl * self.value(v, i - 1) + wc * vi + wr * self.value(v, i + 1) + self.rates[i] * vi - b * vi * vi;
        }
    }

    fn jacobian(&self, v: &[f64], sub: &mut [f64], diag: &mut [f64], sup: &mut [f64]) {
        let b = self.env.params.b;
        for i in 1..self.grid.cells() {
            let (wl, wc, wr) = self.stencil(i);
            sub[i - 1] = wl;
            diag[i - 1] = wc + self.rates[i] - 2.0 * b * v[i - 1];
            sup[i - 1] = wr;
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped Newton on the discrete problem. `v` holds interior values.
fn newton(disc: &Discretization, v: &mut Vec<f64>) -> Result<()> {
    let m = v.len();
    let mut f = vec![0.0; m];
    let mut trial_f = vec![0.0; m];
    let (mut sub, mut diag, mut sup) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut scratch = Vec::with_capacity(m);
    let mut trial = vec![0.0; m];
    disc.residual(v, &mut f);
    let mut norm = inf_norm(&f);
    for _ in 0..200 {
        disc.jacobian(v, &mut sub, &mut diag, &mut sup);
        let mut delta: Vec<f64> = f.iter().map(|x| -x).collect();
        tridiag::solve_in_place(&sub, &diag, &sup, &mut delta, &mut scratch)?;
        let step = inf_norm(&delta);
        let scale = inf_norm(v).max(disc.left_value).max(1e-300);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=40 {
            for k in 0..m {
                trial[k] = v[k] + lambda * delta[k];
            }
            disc.residual(&trial, &mut trial_f);
            let trial_norm = inf_norm(&trial_f);
            if trial_norm < norm || (lambda == 1.0 && step <= 1e-13 * scale) {
                std::mem::swap(v, &mut trial);
                std::mem::swap(&mut f, &mut trial_f);
                norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Residual at round-off level: the last full step was already tiny.
            if step <= 1e-9 * scale.max(1.0) {
                polish(disc, v, &mut f, &mut sub, &mut diag, &mut sup, &mut scratch)?;
                return Ok(());
            }
            return Err(Error::Numerics(format!(
                "Newton stagnated: residual {norm:e}, step {step:e}"
            )));
        }
        if lambda == 1.0 && step <= 1e-12 * scale.max(1e-12) {
            polish(disc, v, &mut f, &mut sub, &mut diag, &mut sup, &mut scratch)?;
            return Ok(());
        }
    }
    Err(Error::Numerics(format!("Newton did not converge, residual {norm:e}")))
}

/// Extra full Newton steps after convergence. Each update `v + delta` leaves
/// an absolute error of order `eps |v_prev|`, so components in deep exponential
/// tails need several more steps before they are resolved relatively.
fn polish(
    disc: &Discretization,
    v: &mut [f64],
    f: &mut [f64],
    sub: &mut [f64],
    diag: &mut [f64],
    sup: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    for _ in 0..40 {
        disc.residual(v, f);
        disc.jacobian(v, sub, diag, sup);
        let mut delta: Vec<f64> = f.iter().map(|x| -x).collect();
        tridiag::solve_in_place(sub, diag, sup, &mut delta, scratch)?;
        let mut settled = true;
        for (vk, dk) in v.iter_mut().zip(&delta) {
            if vk.abs() > 1e-250 && dk.abs() > 1e-10 * vk.abs() {
                settled = false;
            }
            *vk += dk;
        }
        if settled {
            break;
        }
    }
    Ok(())
}

fn solve_on_grid(
    env: &EnvironmentProfile,
    l: f64,
    right: f64,
    left_value: f64,
    cfg: &EllipticConfig,
) -> Result<StationaryProfile> {
    check_interval(l, right)?;
    if !(left_value >= 0.0) || !left_value.is_finite() {
        return Err(Error::Domain(format!("left value must be finite and >= 0, got {left_value}")));
    }
    let p = env.params;
    let grid = Grid::new(l, right, cfg.max_spacing)?;
    let n = grid.cells();

    if left_value == 0.0 {
        let lambda = principal_eigenvalue(env, l, right, cfg)?;
        if lambda >= 0.0 {
            return Err(Error::NoPositiveSolution { lambda1: lambda });
        }
    }
    // Start from the constant supersolution max(M, a/b): for the concave
    // logistic term Newton then decreases monotonically to the maximal solution.
    let top_level = p.plateau().max(left_value);
    let mut guess = vec![top_level; n - 1];
    let disc = Discretization::new(env, grid, left_value);
    newton(&disc, &mut guess)?;

    let top = inf_norm(&guess);
    if left_value == 0.0 && top <= 1e-12 * p.plateau() {
        return Err(Error::NoPositiveSolution { lambda1: 0.0 });
    }
    if guess.iter().any(|&v| v < 0.0) {
        if left_value == 0.0 {
            return Err(Error::Numerics("Newton converged to a sign-changing solution".into()));
        }
        return Err(Error::Numerics("upper problem lost positivity".into()));
    }

    let grid = &disc.grid;
    let mut values = Vec::with_capacity(n + 1);
    values.push((grid.xs[0], left_value));
    for (i, &v) in guess.iter().enumerate() {
        values.push((grid.xs[i + 1], v));
    }
    values.push((right, 0.0));
    let h = grid.h;
    let slope_right = -one_sided(0.0, values[n - 1].1, values[n - 2].1, h, h);
    let slope_left = one_sided(left_value, values[1].1, values[2].1, grid.first, h);
    Ok(StationaryProfile {
        l,
        right,
        left_value,
        values,
        slope_right,
        slope_left,
    })
}

/// Positive solution of `d V'' + c V' + A V - b V^2 = 0` on `(-l, L)` with
/// `V(-l) = left_value`, `V(L) = 0`.
pub fn solve_bvp(
    env: &EnvironmentProfile,
    l: f64,
    right: f64,
    left_value: f64,
    cfg: &EllipticConfig,
) -> Result<StationaryProfile> {
    solve_on_grid(env, l, right, left_value, cfg)
}

/// Front imbalance `-mu V'(L) - c`, with `-c` when no positive solution exists.
fn front_imbalance(
    env: &EnvironmentProfile,
    l: f64,
    right: f64,
    cfg: &EllipticConfig,
) -> Result<(f64, Option<StationaryProfile>)> {
    let p = &env.params;
    match solve_on_grid(env, l, right, 0.0, cfg) {
        Ok(prof) => Ok((-p.mu * prof.slope_right - p.c, Some(prof))),
        Err(Error::NoPositiveSolution { .. }) => Ok((-p.c, None)),
        Err(e) => Err(e),
    }
}

fn bisect_endpoint(
    env: &EnvironmentProfile,
    l: f64,
    mut lo: f64,
    mut hi: f64,
    hi_profile: StationaryProfile,
    cfg: &EllipticConfig,
) -> Result<(f64, StationaryProfile)> {
    let mut best = hi_profile;
    let mut best_gap = f64::INFINITY;
    while hi - lo > cfg.endpoint_tol * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        let (g, prof) = front_imbalance(env, l, mid, cfg)?;
        if let Some(prof) = prof {
            if g.abs() < best_gap {
                best_gap = g.abs();
                best = prof;
            }
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let prof = match front_imbalance(env, l, root, cfg)? {
        (_, Some(prof)) => prof,
        (_, None) => best,
    };
    Ok((root, prof))
}

/// `L(0)`: the endpoint with `-mu V_0'(L) = c` on `(0, L)`.
pub fn l_of_zero(env: &EnvironmentProfile, cfg: &EllipticConfig) -> Result<(f64, StationaryProfile)> {
    let p = &env.params;
    let effective = p.a - p.c * p.c / (4.0 * p.d);
    if effective <= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "c = {} >= 2 sqrt(a d): no positive solution on any half-line",
            p.c
        )));
    }
    let c0 = semiwave::compute_c0(p)?;
    if p.c >= c0 {
        return Err(Error::PreconditionViolated(format!(
            "need c < c0 for L(0), got c = {} >= c0 = {c0}",
            p.c
        )));
    }
    // A == a on [0, L], so the principal eigenvalue vanishes at this length.
    let critical = std::f64::consts::PI * (p.d / effective).sqrt();
    let lo = critical;
    let mut hi = 2.0 * critical;
    for _ in 0..60 {
        let (g, prof) = front_imbalance(env, 0.0, hi, cfg)?;
        if g > 0.0 {
            let prof = prof.expect("positive imbalance implies a solution");
            return bisect_endpoint(env, 0.0, lo, hi, prof, cfg);
        }
        hi *= 2.0;
    }
    Err(Error::Numerics(
        "could not bracket L(0); is c below the spreading speed c0?".into(),
    ))
}

/// `L(l)` and the matching profile `V_l`.
///
/// For `l <= 0` the environment is homogeneous on the whole interval and
/// `L(l) = L(0) - l` with `V_l(x) = V_0(x + l)`.
pub fn find_l_of_l(env: &EnvironmentProfile, l: f64, cfg: &EllipticConfig) -> Result<(f64, StationaryProfile)> {
    if !l.is_finite() {
        return Err(Error::Domain(format!("l must be finite, got {l}")));
    }
    let (l0_end, v0) = l_of_zero(env, cfg)?;
    if l <= 0.0 {
        let values = v0.values.iter().map(|&(x, v)| (x - l, v)).collect();
        let prof = StationaryProfile {
            l,
            right: l0_end - l,
            values,
            ..v0
        };
        return Ok((l0_end - l, prof));
    }
    let (g_hi, prof_hi) = front_imbalance(env, l, l0_end, cfg)?;
    let prof_hi = match prof_hi {
        Some(p) if g_hi > 0.0 => p,
        _ => {
            return Err(Error::Numerics(format!(
                "bracket failure: front imbalance {g_hi} at L(0) for l = {l}"
            )))
        }
    };
    let lo = (-l).max(-env.params.l0);
    bisect_endpoint(env, l, lo, l0_end, prof_hi, cfg)
}

/// How the backward orbit from a trial endpoint behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitFate {
    /// `V < 0` somewhere: the trial endpoint is right of `L*`.
    Crossing,
    /// `V` blows past the growth threshold or stays large: left of `L*`.
    Growth,
    /// Neither within `[x_min, L]`.
    Ambiguous,
}

/// Growth threshold and far-field level used by [`shoot_backward`].
const FAR_FIELD_LEVEL: f64 = 1e-3;

/// Integrates `d V'' + c V' + A V - b V^2 = 0` backwards from `x = L` with
/// `V(L) = 0`, `V'(L) = -c/mu` down to `x_min`, sampling with `sample_step`.
pub fn shoot_backward(
    env: &EnvironmentProfile,
    right: f64,
    x_min: f64,
    sample_step: Option<f64>,
) -> Result<(OrbitFate, Vec<(f64, f64)>)> {
    let p = env.params;
    let growth = 2.0 * p.plateau();
    let env_copy = *env;
    let rhs = move |x: f64, y: &[f64; 2]| {
        [y[1], (p.b * y[0] * y[0] - env_copy.rate(x) * y[0] - p.c * y[1]) / p.d]
    };
    let mut opts = OdeOptions::default().with_tol(1e-12);
    if let Some(h) = sample_step {
        opts = opts.with_h_max(h);
    }
    let mut samples = vec![(right, 0.0)];
    let mut fate = None;
    let mut y = [0.0, -p.c / p.mu];
    let mut x = right;
    // Break the integration at the kinks of A.
    let mut stops: Vec<f64> = [0.0, -p.l0].into_iter().filter(|&k| k < right && k > x_min).collect();
    stops.push(x_min);
    for stop in stops {
        let end = ode::integrate(rhs, x, y, stop, &opts, |s| {
            if s.y1[0] < 0.0 {
                fate = Some(OrbitFate::Crossing);
                return Flow::Stop;
            }
            if s.y1[0] > growth {
                fate = Some(OrbitFate::Growth);
                return Flow::Stop;
            }
            if sample_step.is_some() {
                samples.push((s.t1, s.y1[0]));
            }
            Flow::Continue
        })?;
        if let Some(f) = fate {
            samples.reverse();
            return Ok((f, samples));
        }
        x = end.t;
        y = end.y;
    }
    samples.reverse();
    let fate = if y[0] > FAR_FIELD_LEVEL {
        OrbitFate::Growth
    } else {
        OrbitFate::Ambiguous
    };
    Ok((fate, samples))
}

/// Left end of the domain on which `V*` is resolved.
pub fn l_star_x_min(env: &EnvironmentProfile) -> f64 {
    let p = &env.params;
    -(p.l0 + (40.0 * p.d / p.c).max(50.0))
}

/// The borderline pair `(L*, V*)`.
///
/// `L*` comes from shooting backwards from trial endpoints with the front
/// slope `-c/mu` and bisecting on the fate of the orbit; `V*` is then the
/// finite-difference solution on `[x_min, L*]` with `V(x_min) = 0`.
pub fn compute_l_star(env: &EnvironmentProfile, cfg: &EllipticConfig) -> Result<BorderlinePair> {
    let p = env.params;
    if env.homogeneous_override {
        return Err(Error::PreconditionViolated(
            "L* requires an unfavourable region; homogeneous override is set".into(),
        ));
    }
    let c0 = semiwave::compute_c0(&p)?;
    if p.c >= c0 {
        return Err(Error::PreconditionViolated(format!("need c < c0, got c = {} >= c0 = {c0}", p.c)));
    }
    let x_min = l_star_x_min(env);
    let (l0_end, _) = l_of_zero(env, cfg)?;
    let mut lo = -p.l0;
    let mut hi = l0_end;
    let (fate_lo, _) = shoot_backward(env, lo, x_min, None)?;
    let (fate_hi, _) = shoot_backward(env, hi, x_min, None)?;
    if fate_lo != OrbitFate::Growth || fate_hi != OrbitFate::Crossing {
        return Err(Error::Numerics(format!(
            "L* bracket not separated (fates {fate_lo:?} at {lo}, {fate_hi:?} at {hi}); enlarge x_min = {x_min}"
        )));
    }
    while hi - lo > 1e-13 * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        match shoot_backward(env, mid, x_min, None)?.0 {
            OrbitFate::Crossing => hi = mid,
            OrbitFate::Growth => lo = mid,
            OrbitFate::Ambiguous => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let l_star = 0.5 * (lo + hi);
    let prof = solve_bvp(env, -x_min, l_star, 0.0, cfg)?;
    Ok(BorderlinePair {
        l_star,
        x_min,
        v_star: prof.values,
        slope_right: -p.c / p.mu,
    })
}
