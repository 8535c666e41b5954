//! Finite-horizon surrogate of the vanishing / borderline / spreading trichotomy.

use serde::{Deserialize, Serialize};

use crate::elliptic::{self, BorderlinePair, EllipticConfig, StationaryProfile};
use crate::environment::{EnvironmentProfile, ModelParams};
use crate::error::{Error, Result};
use crate::fbsolver::{self, Controls, InitialDatum, Snapshot, Trajectory};
use crate::semiwave;

/// Reference quantities the classification is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub c0: f64,
    /// `None` when `c >= c0` or the environment is homogeneous.
    pub l_star: Option<f64>,
}

impl References {
    pub fn compute(env: &EnvironmentProfile, cfg: &EllipticConfig) -> Result<Self> {
        let c0 = semiwave::compute_c0(&env.params)?;
        let l_star = if env.params.c < c0 && !env.homogeneous_override {
            Some(elliptic::compute_l_star(env, cfg)?.l_star)
        } else {
            None
        };
        Ok(Self { c0, l_star })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    /// `max_u` threshold for vanishing.
    pub eps_u: f64,
    /// Front-speed threshold for vanishing.
    pub eps_h: f64,
    /// Relative band around `c0` for the fitted front speed.
    pub speed_band: f64,
    /// Band around `L*`; `None` selects `max(0.5, 5 dx)`.
    pub margin: Option<f64>,
    /// Trailing fraction of the horizon used for fits.
    pub window_fraction: f64,
    /// Shortest trajectory accepted by [`classify`].
    pub min_horizon: f64,
    /// Horizon doublings tried on an undetermined outcome.
    pub max_doublings: u32,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            eps_u: 1e-4,
            eps_h: 1e-5,
            speed_band: 0.03,
            margin: None,
            window_fraction: 0.25,
            min_horizon: 20.0,
            max_doublings: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Vanishing,
    BorderlineSpreading,
    Spreading,
    Undetermined,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Vanishing => "vanishing",
            Outcome::BorderlineSpreading => "borderline_spreading",
            Outcome::Spreading => "spreading",
            Outcome::Undetermined => "undetermined",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t_end: f64,
    /// `h(t_end)`, a lower bound for `h_inf`.
    pub h_inf_estimate: f64,
    /// Least-squares slope of `h` over the trailing window.
    pub front_speed: f64,
    pub gap_end: f64,
    pub max_u_end: f64,
    pub hdot_end: f64,
    /// `gap_end - L*`.
    pub gap_to_l_star: Option<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub outcome: Outcome,
    pub diagnostics: Diagnostics,
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mh = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, h) in pts {
        num += (t - mt) * (h - mh);
        den += (t - mt) * (t - mt);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Classifies a trajectory against `(c0, L*)`.
pub fn classify(traj: &Trajectory, refs: &References, policy: &Policy) -> Result<Classification> {
    let t_end = traj.t_end();
    if t_end < policy.min_horizon {
        return Err(Error::Horizon {
            got: t_end,
            required: policy.min_horizon,
        });
    }
    let t_start = t_end * (1.0 - policy.window_fraction);
    let window: Vec<_> = traj.series.iter().filter(|r| r.t >= t_start).collect();
    if window.len() < 3 {
        return Err(Error::Horizon {
            got: t_end,
            required: policy.min_horizon.max(3.0 * traj.controls.output_interval / policy.window_fraction),
        });
    }
    let last = traj.last();
    let margin = policy.margin.unwrap_or_else(|| (5.0 * traj.final_spacing()).max(0.5));
    let pts: Vec<(f64, f64)> = window.iter().map(|r| (r.t, r.h)).collect();
    let speed = least_squares_slope(&pts);

    let alive = last.max_u >= policy.eps_u;
    let vanishing = !alive && last.hdot < policy.eps_h;
    let spreading = alive
        && (speed - refs.c0).abs() <= policy.speed_band * refs.c0
        && last.gap > refs.l_star.unwrap_or(0.0) + margin;
    let borderline = match refs.l_star {
        Some(ls) => alive && window.iter().all(|r| (r.gap - ls).abs() <= margin),
        None => false,
    };
    assert!(
        [vanishing, spreading, borderline].iter().filter(|&&b| b).count() <= 1,
        "classification predicates overlap"
    );
    let outcome = if vanishing {
        Outcome::Vanishing
    } else if spreading {
        Outcome::Spreading
    } else if borderline {
        Outcome::BorderlineSpreading
    } else {
        Outcome::Undetermined
    };
    Ok(Classification {
        outcome,
        diagnostics: Diagnostics {
            t_end,
            h_inf_estimate: last.h,
            front_speed: speed,
            gap_end: last.gap,
            max_u_end: last.max_u,
            hdot_end: last.hdot,
            gap_to_l_star: refs.l_star.map(|ls| last.gap - ls),
            margin,
        },
    })
}

/// Simulates to `horizon` and classifies, doubling the horizon (by
/// continuing the same run) while the outcome is undetermined.
pub fn run_and_classify(
    env: &EnvironmentProfile,
    u0: &InitialDatum,
    horizon: f64,
    controls: &Controls,
    refs: &References,
    policy: &Policy,
) -> Result<(Classification, Trajectory)> {
    if horizon < policy.min_horizon {
        return Err(Error::Horizon {
            got: horizon,
            required: policy.min_horizon,
        });
    }
    let mut traj = fbsolver::simulate(env, u0, horizon, controls)?;
    let mut t_max = horizon;
    let mut class = classify(&traj, refs, policy)?;
    for _ in 0..policy.max_doublings {
        if class.outcome != Outcome::Undetermined {
            break;
        }
        t_max *= 2.0;
        fbsolver::continue_to(env, &mut traj, t_max)?;
        class = classify(&traj, refs, policy)?;
    }
    Ok((class, traj))
}

/// The sufficient spreading condition: `h0 >= L(0)` and `u0 >= V_0` on
/// `[0, L(0)]`, where `V_0` is the stationary profile on `(0, L(0))`.
pub fn check_spreading_sufficient(u0: &InitialDatum, l_zero: f64, v_zero: &StationaryProfile) -> bool {
    if u0.h0 < l_zero {
        return false;
    }
    v_zero
        .values
        .iter()
        .filter(|p| (0.0..=l_zero).contains(&p.0))
        .all(|&(x, v)| u0.eval(x) >= v - 1e-12)
}

/// `max |u(x) - V*(x - h + L*)|` over the snapshot nodes.
pub fn profile_error_vs_vstar(snapshot: &Snapshot, pair: &BorderlinePair) -> f64 {
    let shift = pair.l_star - snapshot.h;
    snapshot
        .points
        .iter()
        .map(|&(x, u)| (u - pair.eval(x + shift)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauError {
    /// `max |u - a/b|` over `(c + eps) t <= x <= (1 - eps) h`.
    pub plateau_error: f64,
    /// `max u` over `0 <= x <= (c - eps) t` (0 when that range is empty).
    pub left_tail_sup: f64,
}

/// Interior convergence to `a/b` and left-tail decay of a spreading solution.
pub fn interior_plateau_error(snapshot: &Snapshot, params: &ModelParams, eps: f64) -> Result<PlateauError> {
    let lo = (params.c + eps) * snapshot.t;
    let hi = (1.0 - eps) * snapshot.h;
    if !(lo < hi) {
        return Err(Error::Window(format!("interior window [{lo}, {hi}] is empty at t = {}", snapshot.t)));
    }
    let plateau = params.plateau();
    let inside: Vec<f64> = snapshot
        .points
        .iter()
        .filter(|p| p.0 >= lo && p.0 <= hi)
        .map(|p| (p.1 - plateau).abs())
        .collect();
    if inside.is_empty() {
        return Err(Error::Window(format!("no grid node in [{lo}, {hi}]")));
    }
    let tail_end = (params.c - eps) * snapshot.t;
    let left_tail_sup = snapshot
        .points
        .iter()
        .filter(|p| p.0 <= tail_end)
        .map(|p| p.1)
        .fold(0.0, f64::max);
    Ok(PlateauError {
        plateau_error: inside.into_iter().fold(0.0, f64::max),
        left_tail_sup,
    })
}
