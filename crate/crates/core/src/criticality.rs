//! Bisection for the critical amplitude `sigma_0` separating vanishing from
//! spreading for initial data `sigma phi`.

use serde::{Deserialize, Serialize};

use crate::classifier::{self, Classification, Outcome, Policy, References};
use crate::elliptic::BorderlinePair;
use crate::environment::EnvironmentProfile;
use crate::error::{Error, Result};
use crate::fbsolver::{self, Controls, InitialKind, Snapshot};

/// Number of doublings of the upper bracket end before giving up.
pub const EXPANSION_DOUBLINGS: u32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    Absolute(f64),
    /// Width relative to the bracket midpoint.
    Relative(f64),
}

impl Tolerance {
    fn satisfied(&self, lo: f64, hi: f64) -> bool {
        match *self {
            Tolerance::Absolute(tol) => hi - lo <= tol,
            Tolerance::Relative(tol) => hi - lo <= tol * 0.5 * (lo + hi),
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            Tolerance::Absolute(v) | Tolerance::Relative(v) => v,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::PreconditionViolated(format!("tolerance must be finite and > 0, got {v}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub sigma: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSearchResult {
    /// Largest probed `sigma` classified vanishing.
    pub sigma_low: f64,
    /// Smallest probed `sigma` classified spreading.
    pub sigma_high: f64,
    pub width: f64,
    /// Midpoint of the final bracket.
    pub sigma_estimate: f64,
    /// Every probe in the order it was run.
    pub transcript: Vec<Probe>,
    /// Bracket after each bisection step, starting with the verified bracket.
    pub brackets: Vec<(f64, f64)>,
}

/// Everything a probe needs besides `sigma`.
#[derive(Debug, Clone)]
pub struct SearchSetup<'a> {
    pub env: &'a EnvironmentProfile,
    pub template: &'a InitialKind,
    pub horizon: f64,
    pub controls: &'a Controls,
    pub refs: &'a References,
    pub policy: &'a Policy,
}

impl SearchSetup<'_> {
    pub fn probe(&self, sigma: f64) -> Result<Classification> {
        let u0 = fbsolver::make_initial(&self.env.params, self.template.clone(), sigma)?;
        let (class, _) =
            classifier::run_and_classify(self.env, &u0, self.horizon, self.controls, self.refs, self.policy)?;
        Ok(class)
    }
}

fn unresolved(sigma: f64, class: &Classification) -> Error {
    Error::Numerics(format!(
        "probe at sigma = {sigma} is {} after the horizon cap (t = {}); raise the horizon",
        class.outcome, class.diagnostics.t_end
    ))
}

/// Checks that no vanishing probe lies above a spreading one.
pub fn check_transcript_monotone(transcript: &[Probe]) -> Result<()> {
    let min_spreading = transcript
        .iter()
        .filter(|p| p.classification.outcome == Outcome::Spreading)
        .map(|p| p.sigma)
        .fold(f64::INFINITY, f64::min);
    if let Some(bad) = transcript
        .iter()
        .find(|p| p.classification.outcome == Outcome::Vanishing && p.sigma >= min_spreading)
    {
        return Err(Error::Numerics(format!(
            "non-monotone transcript: sigma = {} vanishes above spreading sigma = {min_spreading}; refine the grid",
            bad.sigma
        )));
    }
    Ok(())
}

/// Bisects on `sigma` between a vanishing `bracket.0` and a spreading
/// `bracket.1`, doubling the upper end while it still vanishes.
///
/// For `c >= c0` the verdict [`Error::SigmaInfinite`] is returned without probing.
pub fn find_sigma_crit(setup: &SearchSetup, bracket: (f64, f64), tol: Tolerance) -> Result<SigmaSearchResult> {
    tol.validate()?;
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::PreconditionViolated(format!("need 0 < sigma_a < sigma_b, got ({lo}, {hi})")));
    }
    let cap = hi * f64::powi(2.0, EXPANSION_DOUBLINGS as i32);
    if setup.env.params.c >= setup.refs.c0 {
        // Every solution vanishes when the shift outruns the spreading speed.
        return Err(Error::SigmaInfinite { sigma_cap: cap });
    }
    let mut transcript = Vec::new();

    let class_lo = setup.probe(lo)?;
    transcript.push(Probe { sigma: lo, classification: class_lo });
    match class_lo.outcome {
        Outcome::Vanishing => {}
        Outcome::Spreading => {
            return Err(Error::PreconditionViolated(format!(
                "lower bracket sigma = {lo} spreads; choose a smaller sigma_a"
            )))
        }
        _ => return Err(unresolved(lo, &class_lo)),
    }

    loop {
        let class_hi = setup.probe(hi)?;
        transcript.push(Probe { sigma: hi, classification: class_hi });
        match class_hi.outcome {
            Outcome::Spreading => break,
            Outcome::Vanishing => {
                lo = hi;
                hi *= 2.0;
                if hi > cap * (1.0 + 1e-12) {
                    return Err(Error::SigmaInfinite { sigma_cap: lo });
                }
            }
            _ => return Err(unresolved(hi, &class_hi)),
        }
    }

    let mut brackets = vec![(lo, hi)];
    while !tol.satisfied(lo, hi) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let class = setup.probe(mid)?;
        transcript.push(Probe { sigma: mid, classification: class });
        match class.outcome {
            Outcome::Vanishing => lo = mid,
            Outcome::Spreading => hi = mid,
            _ => return Err(unresolved(mid, &class)),
        }
        brackets.push((lo, hi));
    }
    check_transcript_monotone(&transcript)?;
    Ok(SigmaSearchResult {
        sigma_low: lo,
        sigma_high: hi,
        width: hi - lo,
        sigma_estimate: 0.5 * (lo + hi),
        transcript,
        brackets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderlineReport {
    pub sigma: f64,
    /// `(t, h - c t)` at every output time.
    pub gap_series: Vec<(f64, f64)>,
    /// Time of closest approach of the gap to `L*`.
    pub t_closest: f64,
    /// Profile at `t_closest`.
    pub snapshot: Snapshot,
    /// Profile at the end of the run.
    pub terminal: Snapshot,
    /// Sup-norm distance of `snapshot` to the translated `V*`.
    pub profile_error: f64,
}

/// Records on each side of a candidate time in the closest-approach average.
const APPROACH_HALF_WINDOW: usize = 5;

/// Simulates at the bracket midpoint and extracts the profile where the gap
/// stays closest to `L*`.
pub fn borderline_snapshot(
    env: &EnvironmentProfile,
    template: &InitialKind,
    result: &SigmaSearchResult,
    horizon: f64,
    controls: &Controls,
    pair: &BorderlinePair,
) -> Result<BorderlineReport> {
    let sigma = 0.5 * (result.sigma_low + result.sigma_high);
    let u0 = fbsolver::make_initial(&env.params, template.clone(), sigma)?;
    let controls = Controls {
        snapshot_every_output: true,
        ..controls.clone()
    };
    let traj = fbsolver::simulate(env, &u0, horizon, &controls)?;
    let gap_series: Vec<(f64, f64)> = traj.series.iter().map(|r| (r.t, r.gap)).collect();
    let dist: Vec<f64> = gap_series.iter().map(|g| (g.1 - pair.l_star).abs()).collect();
    let n = dist.len();
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..n {
        let a = k.saturating_sub(APPROACH_HALF_WINDOW);
        let b = (k + APPROACH_HALF_WINDOW + 1).min(n);
        let mean = dist[a..b].iter().sum::<f64>() / (b - a) as f64;
        if mean < best.0 {
            best = (mean, k);
        }
    }
    let t_closest = gap_series[best.1].0;
    let snapshot = traj
        .snapshots
        .iter()
        .min_by(|x, y| (x.t - t_closest).abs().total_cmp(&(y.t - t_closest).abs()))
        .cloned()
        .ok_or_else(|| Error::Numerics("no snapshots recorded".into()))?;
    let profile_error = classifier::profile_error_vs_vstar(&snapshot, pair);
    let terminal = traj.snapshots.last().cloned().expect("at least one snapshot");
    Ok(BorderlineReport {
        sigma,
        gap_series,
        t_closest,
        snapshot,
        terminal,
        profile_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Diagnostics;

    fn probe(sigma: f64, outcome: Outcome) -> Probe {
        Probe {
            sigma,
            classification: Classification {
                outcome,
                diagnostics: Diagnostics {
                    t_end: 1.0,
                    h_inf_estimate: 1.0,
                    front_speed: 0.0,
                    gap_end: 0.0,
                    max_u_end: 0.0,
                    hdot_end: 0.0,
                    gap_to_l_star: None,
                    margin: 0.5,
                },
            },
        }
    }

    #[test]
    fn transcript_monotonicity() {
        let ok = [probe(1.0, Outcome::Vanishing), probe(4.0, Outcome::Spreading), probe(2.0, Outcome::Vanishing)];
        assert!(check_transcript_monotone(&ok).is_ok());
        let bad = [probe(1.0, Outcome::Vanishing), probe(2.0, Outcome::Spreading), probe(3.0, Outcome::Vanishing)];
        assert!(matches!(check_transcript_monotone(&bad), Err(Error::Numerics(_))));
    }

    #[test]
    fn tolerance_kinds() {
        assert!(Tolerance::Absolute(0.1).satisfied(1.0, 1.05));
        assert!(!Tolerance::Relative(1e-3).satisfied(1.0, 1.01));
        assert!(Tolerance::Relative(1e-2).satisfied(1.0, 1.005));
        assert!(Tolerance::Absolute(-1.0).validate().is_err());
    }
}
