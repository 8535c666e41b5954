//! Batch runs: parameter sweeps with JSON manifests, and cross-checks of the
//! reference quantities.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, Classification, Policy, References};
use crate::criticality::{self, SearchSetup, SigmaSearchResult, Tolerance};
use crate::elliptic::{self, EllipticConfig};
use crate::environment::{EnvironmentProfile, Interpolation, ModelParams};
use crate::error::{Error, Result};
use crate::fbsolver::{self, Controls, InitialKind};
use crate::output;
use crate::semiwave;

pub const TOOL_VERSION: &str = concat!("fbshift ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefValues {
    pub c0: Option<f64>,
    pub l_star: Option<f64>,
    pub l_of_zero: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ManifestOutcome {
    Classification(Classification),
    SigmaSearch(SigmaSearchResult),
    SigmaInfinite { sigma_cap: f64 },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub index: usize,
    pub params: ModelParams,
    pub interpolation: Interpolation,
    pub homogeneous_override: bool,
    pub template: String,
    pub controls: Controls,
    pub policy: Policy,
    pub horizon: f64,
    /// Amplitude of a single classified run; `None` for a sigma search.
    pub sigma: Option<f64>,
    pub refs: RefValues,
    pub outcome: ManifestOutcome,
    /// Paths relative to the sweep directory.
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One grid point: model parameters plus either a fixed amplitude or a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub params: ModelParams,
    pub sigma: Option<f64>,
}

/// Settings shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub interpolation: Interpolation,
    pub homogeneous_override: bool,
    /// Template name, resolved per point.
    pub template: String,
    pub horizon: f64,
    pub controls: Controls,
    pub policy: Policy,
    /// Initial bracket of sigma searches.
    pub bracket: (f64, f64),
    pub tol: Tolerance,
    /// Stationary-solver spacing; `None` uses the default for each point.
    pub grid_spacing: Option<f64>,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
}

/// Cartesian product of the axes around `base`; an empty `sigmas` axis
/// turns every point into a sigma search.
pub fn build_grid(base: &ModelParams, cs: &[f64], mus: &[f64], sigmas: &[f64]) -> Vec<SweepPoint> {
    let cs = if cs.is_empty() { vec![base.c] } else { cs.to_vec() };
    let mus = if mus.is_empty() { vec![base.mu] } else { mus.to_vec() };
    let sig: Vec<Option<f64>> = if sigmas.is_empty() {
        vec![None]
    } else {
        sigmas.iter().map(|&s| Some(s)).collect()
    };
    let mut out = Vec::new();
    for &c in &cs {
        for &mu in &mus {
            for &sigma in &sig {
                out.push(SweepPoint {
                    params: ModelParams { c, mu, ..*base },
                    sigma,
                });
            }
        }
    }
    out
}

fn reference_values(env: &EnvironmentProfile, cfg: &EllipticConfig) -> Result<(References, RefValues)> {
    let refs = References::compute(env, cfg)?;
    let l_of_zero = elliptic::l_of_zero(env, cfg).ok().map(|r| r.0);
    Ok((
        refs,
        RefValues {
            c0: Some(refs.c0),
            l_star: refs.l_star,
            l_of_zero,
        },
    ))
}

fn run_point(index: usize, point: &SweepPoint, spec: &SweepSpec, out_dir: &Path) -> RunManifest {
    let start = Instant::now();
    let mut manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        index,
        params: point.params,
        interpolation: spec.interpolation,
        homogeneous_override: spec.homogeneous_override,
        template: spec.template.clone(),
        controls: spec.controls.clone(),
        policy: spec.policy,
        horizon: spec.horizon,
        sigma: point.sigma,
        refs: RefValues {
            c0: None,
            l_star: None,
            l_of_zero: None,
        },
        outcome: ManifestOutcome::Failed { error: String::new() },
        artifacts: Vec::new(),
        wall_time_s: 0.0,
    };
    let result = (|| -> Result<()> {
        let env = EnvironmentProfile::new(point.params)?
            .with_interpolation(spec.interpolation)
            .homogeneous(spec.homogeneous_override);
        let mut cfg = EllipticConfig::for_env(&env);
        if let Some(h) = spec.grid_spacing {
            cfg = cfg.with_spacing(h);
        }
        let (refs, values) = reference_values(&env, &cfg)?;
        manifest.refs = values;
        let template = InitialKind::from_name(&spec.template, &env, &cfg)?;
        match point.sigma {
            Some(sigma) => {
                let u0 = fbsolver::make_initial(&env.params, template, sigma)?;
                let (class, traj) =
                    classifier::run_and_classify(&env, &u0, spec.horizon, &spec.controls, &refs, &spec.policy)?;
                let series = format!("profiles/series-{index}.csv");
                let profile = format!("profiles/profile-{index}.csv");
                output::write(&out_dir.join(&series), &output::series_csv(&traj.series))?;
                let terminal = fbsolver::Snapshot {
                    t: traj.final_state.t,
                    h: traj.final_state.h,
                    points: traj.final_state.physical(),
                };
                output::write(&out_dir.join(&profile), &output::snapshot_csv(&terminal))?;
                manifest.artifacts = vec![series, profile];
                manifest.outcome = ManifestOutcome::Classification(class);
            }
            None => {
                let setup = SearchSetup {
                    env: &env,
                    template: &template,
                    horizon: spec.horizon,
                    controls: &spec.controls,
                    refs: &refs,
                    policy: &spec.policy,
                };
                match criticality::find_sigma_crit(&setup, spec.bracket, spec.tol) {
                    Ok(res) => {
                        let transcript = format!("profiles/transcript-{index}.csv");
                        output::write(&out_dir.join(&transcript), &output::transcript_csv(&res.transcript))?;
                        manifest.artifacts = vec![transcript];
                        manifest.outcome = ManifestOutcome::SigmaSearch(res);
                    }
                    Err(Error::SigmaInfinite { sigma_cap }) => {
                        manifest.outcome = ManifestOutcome::SigmaInfinite { sigma_cap };
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        manifest.outcome = ManifestOutcome::Failed { error: e.to_string() };
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest
}

/// Row of the aggregate table: `c, mu, sigma, outcome`.
fn aggregate_row(m: &RunManifest) -> String {
    let (sigma, outcome) = match &m.outcome {
        ManifestOutcome::Classification(c) => (format!("{}", m.sigma.unwrap_or(f64::NAN)), c.outcome.to_string()),
        ManifestOutcome::SigmaSearch(r) => (format!("{}", r.sigma_estimate), "sigma_crit".to_string()),
        ManifestOutcome::SigmaInfinite { .. } => ("inf".to_string(), "sigma_infinite".to_string()),
        ManifestOutcome::Failed { .. } => (m.sigma.map(|s| s.to_string()).unwrap_or_default(), "failed".to_string()),
    };
    format!("{},{},{},{}", m.params.c, m.params.mu, sigma, outcome)
}

pub fn aggregate_csv(manifests: &[RunManifest]) -> String {
    let mut s = String::from("c,mu,sigma,outcome\n");
    for m in manifests {
        let _ = writeln!(s, "{}", aggregate_row(m));
    }
    s
}

/// Runs every grid point on a bounded worker pool. Per-point failures are
/// recorded in the manifests; results come back in input order.
pub fn sweep(points: &[SweepPoint], spec: &SweepSpec, out_dir: &Path) -> Result<Vec<RunManifest>> {
    if points.is_empty() {
        return Err(Error::PreconditionViolated("sweep grid is empty".into()));
    }
    spec.controls.validate()?;
    std::fs::create_dir_all(out_dir.join("profiles"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Numerics(format!("cannot start worker pool: {e}")))?;
    let manifests: Vec<RunManifest> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| run_point(i, p, spec, out_dir))
            .collect()
    });
    for m in &manifests {
        output::write(&out_dir.join(format!("manifest-{}.json", m.index)), &m.to_json()?)?;
    }
    output::write(&out_dir.join("aggregate.csv"), &aggregate_csv(&manifests))?;
    Ok(manifests)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub discrepancy: Option<f64>,
    pub tolerance: f64,
    /// `None` when the check was skipped.
    pub passed: Option<bool>,
    pub note: String,
}

impl Check {
    fn compare(name: &str, value: f64, reference: f64, tolerance: f64, note: &str) -> Self {
        let discrepancy = (value - reference).abs();
        Self {
            name: name.into(),
            value: Some(value),
            reference: Some(reference),
            discrepancy: Some(discrepancy),
            tolerance,
            passed: Some(discrepancy <= tolerance),
            note: note.into(),
        }
    }

    fn skipped(name: &str, tolerance: f64, reason: String) -> Self {
        Self {
            name: name.into(),
            value: None,
            reference: None,
            discrepancy: None,
            tolerance,
            passed: None,
            note: reason,
        }
    }

    fn failed(name: &str, tolerance: f64, err: Error) -> Self {
        Self {
            passed: Some(false),
            ..Self::skipped(name, tolerance, format!("error: {err}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    /// True when no executed check failed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = match c.passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "SKIP",
            };
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.10}"));
            let _ = writeln!(
                s,
                "{status} {:<24} value={} reference={} |diff|={} tol={:e} {}",
                c.name,
                fmt(c.value),
                fmt(c.reference),
                c.discrepancy.map_or("-".to_string(), |x| format!("{x:.3e}")),
                c.tolerance,
                c.note
            );
        }
        s
    }
}

/// Sign change of `mu q_c'(0) - c` located by scanning: a coarse pass of
/// step `coarse`, then a pass of step `fine` inside the bracketing cell,
/// then linear interpolation.
pub fn c0_by_scan(params: &ModelParams, coarse: f64, fine: f64) -> Result<f64> {
    let kpp = params.kpp_speed();
    let top = kpp * (1.0 - 1e-9);
    let scan = |lo: f64, hi: f64, step: f64| -> Result<Option<(f64, f64, f64, f64)>> {
        let mut c_prev = lo;
        let mut f_prev = semiwave::speed_balance(params, c_prev)?;
        let n = ((hi - lo) / step).ceil() as usize;
        for k in 1..=n {
            let c = (lo + k as f64 * step).min(hi);
            let f = semiwave::speed_balance(params, c)?;
            if f_prev > 0.0 && f <= 0.0 {
                return Ok(Some((c_prev, f_prev, c, f)));
            }
            c_prev = c;
            f_prev = f;
        }
        Ok(None)
    };
    let (lo, _, hi, _) =
        scan(0.0, top, coarse)?.ok_or_else(|| Error::Numerics("no sign change of the speed balance".into()))?;
    let (c1, f1, c2, f2) = scan(lo, hi, fine)?.ok_or_else(|| Error::Numerics("fine scan lost the sign change".into()))?;
    Ok(c1 - f1 * (c2 - c1) / (f2 - f1))
}

/// Left extent used for the homogeneous slope identity.
const SLOPE_CHECK_EXTENT: f64 = 80.0;

/// Recomputes the reference quantities independently and reports every
/// discrepancy.
pub fn verify_refs(env: &EnvironmentProfile, cfg: &EllipticConfig, l_check: f64) -> VerifyReport {
    let p = env.params;
    let mut checks = Vec::new();

    let c0 = semiwave::compute_c0(&p);
    let scan = c0_by_scan(&p, 1e-2, 1e-4);
    match (&c0, &scan) {
        (Ok(c0), Ok(scan)) => checks.push(Check::compare(
            "c0 bisection vs scan",
            *c0,
            *scan,
            1e-5,
            "fine scan step 1e-4",
        )),
        (Err(e), _) | (_, Err(e)) => checks.push(Check::failed("c0 bisection vs scan", 1e-5, e.clone())),
    }

    // Slope identity of the homogeneous problem on (-l, l).
    let big_c = if p.c < p.kpp_speed() { p.c } else { 0.5 * p.kpp_speed() };
    let hom = EnvironmentProfile {
        params: ModelParams { c: big_c, ..p },
        homogeneous_override: true,
        ..*env
    };
    let identity = elliptic::solve_bvp(&hom, SLOPE_CHECK_EXTENT, SLOPE_CHECK_EXTENT, 0.0, cfg)
        .and_then(|w| Ok((w.slope_right, -semiwave::semiwave_slope(&hom.params, big_c)?)));
    match identity {
        Ok((slope, reference)) => checks.push(Check::compare(
            "slope identity",
            slope,
            reference,
            1e-3,
            &format!("C = {big_c}, l = {SLOPE_CHECK_EXTENT}; reference -C/mu_C"),
        )),
        Err(e) => checks.push(Check::failed("slope identity", 1e-3, e)),
    }

    if env.homogeneous_override {
        let reason = "not applicable: homogeneous override (no unfavourable region)".to_string();
        checks.push(Check::skipped("L(0) balance", 1e-8, reason.clone()));
        checks.push(Check::skipped("L* shooting vs L(l)", 1e-3, reason));
        return VerifyReport { checks };
    }

    match elliptic::l_of_zero(env, cfg) {
        Ok((_, prof)) => checks.push(Check::compare(
            "L(0) balance",
            -p.mu * prof.slope_right,
            p.c,
            1e-8,
            "-mu V'(L(0)) against c",
        )),
        Err(e) => checks.push(Check::failed("L(0) balance", 1e-8, e)),
    }

    match &c0 {
        Ok(c0) if p.c >= *c0 => checks.push(Check::skipped(
            "L* shooting vs L(l)",
            1e-3,
            format!("not applicable: c = {} >= c0 = {c0}", p.c),
        )),
        _ => {
            let pair = elliptic::compute_l_star(env, cfg)
                .and_then(|pair| Ok((pair.l_star, elliptic::find_l_of_l(env, l_check, cfg)?.0)));
            match pair {
                Ok((ls, ll)) => checks.push(Check::compare(
                    "L* shooting vs L(l)",
                    ls,
                    ll,
                    1e-3,
                    &format!("l = {l_check}, grid spacing {}", cfg.max_spacing),
                )),
                Err(e) => checks.push(Check::failed("L* shooting vs L(l)", 1e-3, e)),
            }
        }
    }
    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_cartesian() {
        let base = ModelParams::default();
        let g = build_grid(&base, &[0.1, 0.2], &[1.0, 2.0, 3.0], &[]);
        assert_eq!(g.len(), 6);
        assert!(g.iter().all(|p| p.sigma.is_none()));
        assert_eq!(g[5].params.c, 0.2);
        assert_eq!(g[5].params.mu, 3.0);
        let g = build_grid(&base, &[], &[], &[0.5, 1.0]);
        assert_eq!(g.len(), 2);
        assert_eq!(g[1].sigma, Some(1.0));
    }

    #[test]
    fn aggregate_rows() {
        let m = RunManifest {
            tool_version: TOOL_VERSION.into(),
            index: 0,
            params: ModelParams::default(),
            interpolation: Interpolation::Linear,
            homogeneous_override: false,
            template: "cosine-bump".into(),
            controls: Controls::default(),
            policy: Policy::default(),
            horizon: 100.0,
            sigma: None,
            refs: RefValues {
                c0: Some(0.3),
                l_star: None,
                l_of_zero: None,
            },
            outcome: ManifestOutcome::SigmaInfinite { sigma_cap: 3.0 },
            artifacts: vec![],
            wall_time_s: 0.25,
        };
        assert_eq!(aggregate_csv(&[m.clone()]), "c,mu,sigma,outcome\n0.3,1,inf,sigma_infinite\n");
        assert_eq!(RunManifest::from_json(&m.to_json().unwrap()).unwrap(), m);
    }
}
