//! Time integration of the free boundary problem
//!
//! ```text
//! u_t = d u_xx + A(x - c t) u - b u^2,   0 < x < h(t),
//! u_x(t, 0) = 0,  u(t, h(t)) = 0,  h'(t) = -mu u_x(t, h(t)),
//! ```
//!
//! in the front-fixed variable `y = x / h(t)`, where it reads
//!
//! ```text
//! u_t = (d / h^2) u_yy + (y h' / h) u_y + A(h y - c t) u - b u^2,   0 < y < 1.
//! ```
//!
//! Each step is a two-stage IMEX scheme: Crank-Nicolson for the diffusion,
//! Heun (explicit trapezoid) for advection, reaction and the front position.
//! `h` is predicted with the front gradient before the implicit solve and
//! corrected once with the gradient of the predicted profile.

use serde::{Deserialize, Serialize};

use crate::elliptic;
use crate::environment::{EnvironmentProfile, ModelParams};
use crate::error::{Error, Result};
use crate::tridiag;

/// Negative values above this are treated as round-off and clipped.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// Accepted steps in a row before the nominal step grows by 10%.
const GROWTH_STREAK: usize = 10;

/// Nodes of the reference grid stored in [`InitialDatum::samples`].
const SAMPLE_INTERVALS: usize = 800;

/// Admissible shapes `phi` of the initial datum `u0 = sigma phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialKind {
    /// `cos(pi x / (2 h0))`.
    CosineBump,
    /// `1 - (x / h0)^2`.
    CompactPolynomial,
    /// A sampled profile on `[0, h0]`, replaced by its right running maximum
    /// `max_{z >= x} v(z)` so that the result is nonincreasing and flat at 0.
    ScaledProfile { profile: Vec<(f64, f64)> },
}

impl InitialKind {
    /// Name used in configs and manifests.
    pub fn name(&self) -> &'static str {
        match self {
            Self::CosineBump => "cosine-bump",
            Self::CompactPolynomial => "compact-polynomial",
            Self::ScaledProfile { .. } => "scaled-profile",
        }
    }

    /// Parses the analytic templates; `scaled-profile` needs data and is built
    /// with [`InitialKind::stationary_envelope`] instead.
    pub fn parse_analytic(s: &str) -> Result<Self> {
        match s {
            "cosine-bump" => Ok(Self::CosineBump),
            "compact-polynomial" => Ok(Self::CompactPolynomial),
            other => Err(Error::Domain(format!(
                "unknown template '{other}' (expected cosine-bump, compact-polynomial or scaled-profile)"
            ))),
        }
    }

    /// Resolves a template name; `scaled-profile` is the stationary envelope.
    pub fn from_name(name: &str, env: &EnvironmentProfile, cfg: &elliptic::EllipticConfig) -> Result<Self> {
        if name == "scaled-profile" {
            Self::stationary_envelope(env, cfg)
        } else {
            Self::parse_analytic(name)
        }
    }

    /// The stationary profile `V_0` on `[0, L(0)]` (left value 0), rescaled to
    /// `[0, h0]`.
    pub fn stationary_envelope(env: &EnvironmentProfile, cfg: &elliptic::EllipticConfig) -> Result<Self> {
        let (l_zero, prof) = elliptic::l_of_zero(env, cfg)?;
        let scale = env.params.h0 / l_zero;
        let profile = prof.values.iter().map(|&(x, v)| (x * scale, v)).collect();
        Ok(Self::ScaledProfile { profile })
    }
}

/// The initial datum `u0 = sigma phi` on `[0, h0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatum {
    pub kind: InitialKind,
    pub sigma: f64,
    pub h0: f64,
    /// `(x, u0(x))` on a uniform grid of `[0, h0]`.
    pub samples: Vec<(f64, f64)>,
    /// Flattened template for [`InitialKind::ScaledProfile`], empty otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    envelope: Vec<(f64, f64)>,
}

impl InitialDatum {
    /// `u0(x)`; zero outside `[0, h0]`.
    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=self.h0).contains(&x) {
            return 0.0;
        }
        let s = x / self.h0;
        let phi = match &self.kind {
            InitialKind::CosineBump => (std::f64::consts::FRAC_PI_2 * s).cos(),
            InitialKind::CompactPolynomial => 1.0 - s * s,
            InitialKind::ScaledProfile { .. } => elliptic::interp(&self.envelope, x),
        };
        if x == self.h0 {
            return 0.0;
        }
        self.sigma * phi.max(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.samples.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

fn right_envelope(profile: &[(f64, f64)], h0: f64) -> Result<Vec<(f64, f64)>> {
    if profile.len() < 3 {
        return Err(Error::Domain("scaled profile needs at least 3 samples".into()));
    }
    if profile.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Domain("scaled profile has non-finite samples".into()));
    }
    if profile.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Domain("scaled profile abscissae must be increasing".into()));
    }
    let first = profile[0];
    let last = profile[profile.len() - 1];
    let tol = 1e-9 * h0;
    if first.0.abs() > tol || (last.0 - h0).abs() > tol {
        return Err(Error::Domain(format!(
            "scaled profile must span [0, h0] = [0, {h0}], got [{}, {}]",
            first.0, last.0
        )));
    }
    if last.1 != 0.0 {
        return Err(Error::Domain(format!("scaled profile must vanish at h0, got {}", last.1)));
    }
    let inner = &profile[..profile.len() - 1];
    if inner[1..].iter().any(|p| p.1 <= 0.0) || inner[0].1 < 0.0 {
        return Err(Error::Domain("scaled profile must be positive on (0, h0)".into()));
    }
    let mut env: Vec<(f64, f64)> = Vec::with_capacity(profile.len());
    let mut run = 0.0f64;
    for &(x, v) in profile.iter().rev() {
        run = run.max(v);
        env.push((x, run));
    }
    env.reverse();
    // The running maximum is flat at 0 unless the profile peaks at x = 0.
    if env[1].1 != env[0].1 {
        return Err(Error::Domain("scaled profile must satisfy u0'(0) = 0 (peak at x = 0)".into()));
    }
    env[0].0 = 0.0;
    let n = env.len();
    env[n - 1].0 = h0;
    Ok(env)
}

/// Builds `sigma phi` for the chosen template and checks admissibility.
pub fn make_initial(params: &ModelParams, kind: InitialKind, sigma: f64) -> Result<InitialDatum> {
    params.validate()?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be finite and > 0, got {sigma}")));
    }
    let h0 = params.h0;
    let envelope = match &kind {
        InitialKind::ScaledProfile { profile } => right_envelope(profile, h0)?,
        _ => Vec::new(),
    };
    let mut datum = InitialDatum {
        kind,
        sigma,
        h0,
        samples: Vec::new(),
        envelope,
    };
    datum.samples = (0..=SAMPLE_INTERVALS)
        .map(|j| {
            let x = h0 * j as f64 / SAMPLE_INTERVALS as f64;
            (x, datum.eval(x))
        })
        .collect();
    Ok(datum)
}

/// The PDE state on the front-fixed grid `y_j = j / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFixedState {
    pub t: f64,
    pub h: f64,
    pub hdot: f64,
    /// `u(y_j)` for `j = 0..=N`; `u[N] = 0`.
    pub u: Vec<f64>,
}

impl FrontFixedState {
    /// Samples `u0` on `N + 1` nodes and sets the initial front speed.
    pub fn initial(params: &ModelParams, u0: &InitialDatum, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::PreconditionViolated(format!("need at least 4 intervals, got {n}")));
        }
        if (u0.h0 - params.h0).abs() > 1e-12 * params.h0 {
            return Err(Error::PreconditionViolated(format!(
                "initial datum built for h0 = {}, params have h0 = {}",
                u0.h0, params.h0
            )));
        }
        let h = params.h0;
        let mut u: Vec<f64> = (0..=n).map(|j| u0.eval(h * j as f64 / n as f64)).collect();
        u[n] = 0.0;
        let mut state = Self { t: 0.0, h, hdot: 0.0, u };
        state.hdot = front_speed(params.mu, &state.u, state.h);
        Ok(state)
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.u.len() - 1
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }

    /// `(x, u)` with physical `x = y h`.
    pub fn physical(&self) -> Vec<(f64, f64)> {
        let n = self.intervals() as f64;
        self.u.iter().enumerate().map(|(j, &v)| (self.h * j as f64 / n, v)).collect()
    }
}

/// `u_x` at the front from the three-point one-sided stencil, in physical units.
pub fn front_gradient(state: &FrontFixedState) -> f64 {
    gradient_at_front(&state.u, state.h)
}

fn gradient_at_front(u: &[f64], h: f64) -> f64 {
    let n = u.len() - 1;
    let dy = 1.0 / n as f64;
    (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * dy * h)
}

/// `h' = -mu u_x(h)`, clamped at 0 (the exact front never recedes).
fn front_speed(mu: f64, u: &[f64], h: f64) -> f64 {
    (-mu * gradient_at_front(u, h)).max(0.0)
}

/// Step-size policy and output schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    /// Number of grid intervals `N` on `[0, 1]`.
    pub n_nodes: usize,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Spacing of the series records.
    pub output_interval: f64,
    /// Times at which full profiles are stored.
    pub snapshot_times: Vec<f64>,
    /// Store a profile at every output time as well.
    #[serde(default)]
    pub snapshot_every_output: bool,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            n_nodes: 800,
            dt0: 1e-3,
            dt_min: 1e-9,
            dt_max: 1e-2,
            output_interval: 0.5,
            snapshot_times: Vec::new(),
            snapshot_every_output: false,
        }
    }
}

impl Controls {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::PreconditionViolated(msg));
        if self.n_nodes < 4 {
            return bad(format!("n_nodes must be >= 4, got {}", self.n_nodes));
        }
        for (name, v) in [
            ("dt0", self.dt0),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("output_interval", self.output_interval),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if self.dt_min > self.dt0 || self.dt0 > self.dt_max {
            return bad(format!(
                "need dt_min <= dt0 <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt0, self.dt_max
            ));
        }
        if self.snapshot_times.iter().any(|t| !(t >= &0.0) || !t.is_finite()) {
            return bad("snapshot times must be finite and >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub t: f64,
    pub h: f64,
    pub hdot: f64,
    pub max_u: f64,
    /// `h - c t`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub h: f64,
    /// `(x, u)` with physical `x`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub series: Vec<SeriesRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: FrontFixedState,
    pub controls: Controls,
    /// Nominal step carried over when the run is continued.
    pub dt_nominal: f64,
    /// Accepted steps since the last growth of `dt_nominal`.
    pub streak: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.final_state.t
    }

    pub fn last(&self) -> &SeriesRecord {
        self.series.last().expect("trajectory has at least the initial record")
    }

    /// Physical grid spacing at the end of the run.
    pub fn final_spacing(&self) -> f64 {
        self.final_state.h / self.final_state.intervals() as f64
    }
}

/// Reusable buffers for [`Stepper::step`].
pub struct Stepper<'a> {
    env: &'a EnvironmentProfile,
    n: usize,
    rhs: Vec<f64>,
    expl0: Vec<f64>,
    expl1: Vec<f64>,
    stage: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(env: &'a EnvironmentProfile, n: usize) -> Self {
        Self {
            env,
            n,
            rhs: vec![0.0; n],
            expl0: vec![0.0; n],
            expl1: vec![0.0; n],
            stage: vec![0.0; n + 1],
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
            scratch: Vec::with_capacity(n),
        }
    }

    /// `(d/h^2) u_yy` at node `j < N`, with the mirror condition at `y = 0`.
    #[inline]
    fn diffusion(&self, u: &[f64], h: f64, j: usize) -> f64 {
        let n = self.n as f64;
        let k = self.env.params.d * n * n / (h * h);
        let left = if j == 0 { u[1] } else { u[j - 1] };
        k * (left - 2.0 * u[j] + u[j + 1])
    }

    /// Advection plus reaction at every node `j < N` into `out`.
    fn explicit(&self, u: &[f64], h: f64, hdot: f64, t: f64, out: &mut [f64]) {
        let p = &self.env.params;
        let n = self.n;
        let nf = n as f64;
        for j in 0..n {
            let y = j as f64 / nf;
            // Wind y h'/h >= 0 carries information from larger y: upwind to the right.
            let uy = if j + 2 <= n {
                (-u[j + 2] + 4.0 * u[j + 1] - 3.0 * u[j]) * 0.5 * nf
            } else {
                (u[j + 1] - u[j - 1]) * 0.5 * nf
            };
            let uj = u[j];
            out[j] = y * hdot / h * uy + self.env.rate(h * y - p.c * t) * uj - p.b * uj * uj;
        }
    }

    /// Solves `(I - dt/2 D_h) x = rhs` into `out[..N]`.
    fn implicit_solve(&mut self, h: f64, dt: f64, out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let nf = n as f64;
        let k = 0.5 * dt * self.env.params.d * nf * nf / (h * h);
        for j in 0..n {
            self.sub[j] = -k;
            self.diag[j] = 1.0 + 2.0 * k;
            self.sup[j] = -k;
        }
        // Mirror node: u_{-1} = u_1.
        self.sup[0] = -2.0 * k;
        tridiag::solve_in_place(&self.sub, &self.diag, &self.sup, &mut self.rhs, &mut self.scratch)?;
        out[..n].copy_from_slice(&self.rhs);
        out[n] = 0.0;
        Ok(())
    }

    /// Advances `state` by `dt`.
    pub fn step(&mut self, state: &FrontFixedState, dt: f64) -> Result<FrontFixedState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::PreconditionViolated(format!("dt must be finite and > 0, got {dt}")));
        }
        if state.u.len() != self.n + 1 {
            return Err(Error::PreconditionViolated(format!(
                "state has {} nodes, stepper expects {}",
                state.u.len(),
                self.n + 1
            )));
        }
        let p = self.env.params;
        let n = self.n;
        let u = &state.u;
        let (h0, t0) = (state.h, state.t);
        let hd0 = front_speed(p.mu, u, h0);

        let mut expl0 = std::mem::take(&mut self.expl0);
        let mut expl1 = std::mem::take(&mut self.expl1);
        let mut stage = std::mem::take(&mut self.stage);
        self.explicit(u, h0, hd0, t0, &mut expl0);

        // Predictor.
        let h_pred = h0 + dt * hd0;
        for j in 0..n {
            self.rhs[j] = u[j] + 0.5 * dt * self.diffusion(u, h0, j) + dt * expl0[j];
        }
        let solved = self.implicit_solve(h_pred, dt, &mut stage);
        if let Err(e) = solved {
            self.restore(expl0, expl1, stage);
            return Err(e);
        }
        let hd_pred = front_speed(p.mu, &stage, h_pred);
        self.explicit(&stage, h_pred, hd_pred, t0 + dt, &mut expl1);

        // Corrector.
        let h_new = h0 + 0.5 * dt * (hd0 + hd_pred);
        for j in 0..n {
            self.rhs[j] = u[j] + 0.5 * dt * self.diffusion(u, h0, j) + 0.5 * dt * (expl0[j] + expl1[j]);
        }
        let mut u_new = vec![0.0; n + 1];
        let solved = self.implicit_solve(h_new, dt, &mut u_new);
        self.restore(expl0, expl1, stage);
        solved?;

        for v in u_new.iter_mut() {
            if !v.is_finite() {
                return Err(Error::StepRejected {
                    reason: "non-finite value".into(),
                    suggested_dt: 0.5 * dt,
                });
            }
            if *v < 0.0 {
                if *v < -NEGATIVE_TOLERANCE {
                    return Err(Error::StepRejected {
                        reason: format!("negative value {v:e}"),
                        suggested_dt: 0.5 * dt,
                    });
                }
                *v = 0.0;
            }
        }
        if !h_new.is_finite() {
            return Err(Error::StepRejected {
                reason: "non-finite front".into(),
                suggested_dt: 0.5 * dt,
            });
        }
        let hdot = front_speed(p.mu, &u_new, h_new);
        Ok(FrontFixedState {
            t: t0 + dt,
            h: h_new,
            hdot,
            u: u_new,
        })
    }

    fn restore(&mut self, expl0: Vec<f64>, expl1: Vec<f64>, stage: Vec<f64>) {
        self.expl0 = expl0;
        self.expl1 = expl1;
        self.stage = stage;
    }

    /// Largest step allowed by the explicit terms at `state`.
    pub fn step_cap(&self, state: &FrontFixedState) -> f64 {
        let p = &self.env.params;
        let dx = state.h / self.n as f64;
        let transport = 0.25 * dx / (state.hdot.abs() + p.c + 1.0);
        let reaction = 0.5 / (self.env.max_abs_rate() + 2.0 * p.b * state.max_u());
        transport.min(reaction)
    }
}

/// One step of the scheme; allocates fresh buffers.
pub fn step(env: &EnvironmentProfile, state: &FrontFixedState, dt: f64) -> Result<FrontFixedState> {
    Stepper::new(env, state.intervals()).step(state, dt)
}

fn record(state: &FrontFixedState, c: f64) -> SeriesRecord {
    SeriesRecord {
        t: state.t,
        h: state.h,
        hdot: state.hdot,
        max_u: state.max_u(),
        gap: state.h - c * state.t,
    }
}

fn snapshot(state: &FrontFixedState) -> Snapshot {
    Snapshot {
        t: state.t,
        h: state.h,
        points: state.physical(),
    }
}

/// Runs the problem from `u0` to `t_max`.
pub fn simulate(env: &EnvironmentProfile, u0: &InitialDatum, t_max: f64, controls: &Controls) -> Result<Trajectory> {
    controls.validate()?;
    let state = FrontFixedState::initial(&env.params, u0, controls.n_nodes)?;
    let mut traj = Trajectory {
        series: vec![record(&state, env.params.c)],
        snapshots: Vec::new(),
        final_state: state,
        controls: controls.clone(),
        dt_nominal: controls.dt0,
        streak: 0,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    if controls.snapshot_every_output || controls.snapshot_times.iter().any(|&s| s == 0.0) {
        traj.snapshots.push(snapshot(&traj.final_state));
    }
    continue_to(env, &mut traj, t_max)?;
    Ok(traj)
}

/// Extends a trajectory in place up to `t_max`, with the same controls.
pub fn continue_to(env: &EnvironmentProfile, traj: &mut Trajectory, t_max: f64) -> Result<()> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::PreconditionViolated(format!("t_max must be finite and > 0, got {t_max}")));
    }
    let controls = traj.controls.clone();
    let c = env.params.c;
    let mut state = traj.final_state.clone();
    let mut stepper = Stepper::new(env, state.intervals());
    let mut dt_nominal = traj.dt_nominal;
    let mut streak = traj.streak;
    let interval = controls.output_interval;
    let mut snaps: Vec<f64> = controls.snapshot_times.iter().copied().filter(|&s| s > state.t && s <= t_max).collect();
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    let mut snap_idx = 0;
    let mut k_out = (state.t / interval).floor() as u64 + 1;
    let eps = 1e-12 * t_max.max(1.0);

    while state.t < t_max - eps {
        let next_out = (k_out as f64 * interval).min(t_max);
        let next_snap = snaps.get(snap_idx).copied().unwrap_or(f64::INFINITY);
        let target = next_out.min(next_snap);
        let dt_try = dt_nominal.min(stepper.step_cap(&state));
        let (dt, hits) = if state.t + dt_try >= target - eps {
            (target - state.t, true)
        } else {
            (dt_try, false)
        };
        match stepper.step(&state, dt) {
            Ok(mut next) => {
                traj.accepted_steps += 1;
                streak += 1;
                if streak >= GROWTH_STREAK {
                    dt_nominal = (dt_nominal * 1.1).min(controls.dt_max);
                    streak = 0;
                }
                if hits {
                    next.t = target;
                    let at_output = (target - next_out).abs() <= eps;
                    let at_snap = (target - next_snap).abs() <= eps;
                    if at_output {
                        traj.series.push(record(&next, c));
                        k_out += 1;
                    }
                    if at_snap {
                        snap_idx += 1;
                    }
                    if at_snap || (at_output && controls.snapshot_every_output) {
                        traj.snapshots.push(snapshot(&next));
                    }
                }
                state = next;
            }
            Err(Error::StepRejected { suggested_dt, .. }) => {
                traj.rejected_steps += 1;
                streak = 0;
                dt_nominal = suggested_dt.min(0.5 * dt);
                if dt_nominal < controls.dt_min {
                    traj.final_state = state;
                    return Err(Error::Numerics(format!(
                        "step size fell below dt_min = {:e} at t = {}",
                        controls.dt_min, traj.final_state.t
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    }
    if traj.series.last().map_or(true, |r| r.t < state.t) {
        traj.series.push(record(&state, c));
    }
    traj.final_state = state;
    traj.dt_nominal = dt_nominal;
    traj.streak = streak;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_with(c: f64) -> EnvironmentProfile {
        EnvironmentProfile::new(ModelParams { c, ..Default::default() }).unwrap()
    }

    #[test]
    fn cosine_bump_values() {
        let p = ModelParams::default();
        let u0 = make_initial(&p, InitialKind::CosineBump, 1.0).unwrap();
        assert_eq!(u0.eval(p.h0), 0.0);
        let u2 = make_initial(&p, InitialKind::CosineBump, 2.0).unwrap();
        assert_eq!(u2.eval(0.0), 2.0);
        // Discrete one-sided derivative at 0 is O(dx^2) for an even template.
        let dx = u2.samples[1].0;
        let d0 = (u2.samples[1].1 - u2.samples[0].1) / dx;
        assert!(d0.abs() < 10.0 * dx);
        assert!(matches!(make_initial(&p, InitialKind::CosineBump, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn scaled_profile_envelope() {
        let p = ModelParams::default();
        let h0 = p.h0;
        let profile: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let x = h0 * i as f64 / 100.0;
                (x, (std::f64::consts::PI * x / h0).sin())
            })
            .collect();
        let mut profile = profile;
        profile[100].1 = 0.0;
        profile[0].1 = 0.0;
        let u0 = make_initial(&p, InitialKind::ScaledProfile { profile: profile.clone() }, 1.0).unwrap();
        assert!((u0.eval(0.0) - 1.0).abs() < 1e-3);
        for &(x, v) in &profile {
            assert!(u0.eval(x) >= v - 1e-15);
        }
        let bad = vec![(0.0, 1.0), (1.0, 0.5), (1.5, 0.2)];
        assert!(make_initial(&p, InitialKind::ScaledProfile { profile: bad }, 1.0).is_err());
    }

    #[test]
    fn front_gradient_exact_for_quadratics() {
        let n = 10;
        let h = 3.0;
        let slope = -0.7;
        // u = slope (x - h) + q (x - h)^2 in physical x.
        let q = 0.4;
        let u: Vec<f64> = (0..=n)
            .map(|j| {
                let x = h * j as f64 / n as f64;
                slope * (x - h) + q * (x - h) * (x - h)
            })
            .collect();
        let state = FrontFixedState { t: 0.0, h, hdot: 0.0, u };
        assert!((front_gradient(&state) - slope).abs() < 1e-12);
        let zero = FrontFixedState {
            t: 0.0,
            h,
            hdot: 0.0,
            u: vec![0.0; n + 1],
        };
        assert_eq!(front_gradient(&zero), 0.0);
    }

    #[test]
    fn step_is_consistent() {
        let env = env_with(0.3);
        let u0 = make_initial(&env.params, InitialKind::CosineBump, 1.0).unwrap();
        let s0 = FrontFixedState::initial(&env.params, &u0, 200).unwrap();
        let change = |dt: f64| {
            let s1 = step(&env, &s0, dt).unwrap();
            s1.u.iter().zip(&s0.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (c1, c2) = (change(1e-4), change(5e-5));
        assert!(c1 > 0.0);
        assert!((c1 / c2 - 2.0).abs() < 0.05, "ratio {}", c1 / c2);
    }

    #[test]
    fn controls_validation() {
        let mut c = Controls::default();
        assert!(c.validate().is_ok());
        c.dt0 = -1.0;
        assert!(matches!(c.validate(), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn outputs_land_on_schedule() {
        let env = env_with(0.3);
        let u0 = make_initial(&env.params, InitialKind::CosineBump, 1.0).unwrap();
        let controls = Controls {
            n_nodes: 100,
            output_interval: 0.25,
            snapshot_times: vec![0.3, 1.0],
            ..Default::default()
        };
        let traj = simulate(&env, &u0, 1.0, &controls).unwrap();
        let ts: Vec<f64> = traj.series.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(traj.snapshots.len(), 2);
        assert_eq!(traj.snapshots[0].t, 0.3);
        for r in &traj.series {
            assert!((r.gap - (r.h - 0.3 * r.t)).abs() < 1e-12);
        }
    }

    #[test]
    fn continuation_matches_single_run() {
        let env = env_with(0.3);
        let u0 = make_initial(&env.params, InitialKind::CosineBump, 1.0).unwrap();
        let controls = Controls {
            n_nodes: 80,
            ..Default::default()
        };
        let full = simulate(&env, &u0, 2.0, &controls).unwrap();
        let mut part = simulate(&env, &u0, 1.0, &controls).unwrap();
        continue_to(&env, &mut part, 2.0).unwrap();
        assert_eq!(full.final_state.t, part.final_state.t);
        assert_eq!(full.final_state.h, part.final_state.h);
        assert_eq!(full.series.len(), part.series.len());
    }
}
