//! Flat run configuration: a JSON object of scalars plus `key=value` overrides.
//!
//! Lists (snapshot times, sweep axes) are comma-separated strings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classifier::Policy;
use crate::criticality::Tolerance;
use crate::elliptic::EllipticConfig;
use crate::environment::{EnvironmentProfile, Interpolation, ModelParams};
use crate::error::{Error, Result};
use crate::fbsolver::{Controls, InitialKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: f64,
    pub a: f64,
    pub a0: f64,
    pub b: f64,
    pub l0: f64,
    pub c: f64,
    pub mu: f64,
    pub h0: f64,
    pub interpolation: String,
    pub homogeneous_override: bool,

    pub n_nodes: usize,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub output_interval: f64,
    pub snapshot_times: String,
    pub t_max: f64,

    pub template: String,
    pub sigma: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub tol: f64,
    /// `relative` or `absolute`.
    pub tol_kind: String,

    pub eps_u: f64,
    pub eps_h: f64,
    pub speed_band: f64,
    /// Negative selects the automatic margin.
    pub margin: f64,
    pub window_fraction: f64,
    pub min_horizon: f64,
    pub max_doublings: u32,

    /// Spacing of the stationary solvers; non-positive selects `min(l0, 1)/200`.
    pub grid_spacing: f64,
    /// Left extent of the stationary problem solved by `profile`.
    pub l: f64,
    /// Left extent used to cross-check `L*` against `L(l)`.
    pub l_check: f64,

    pub sweep_c: String,
    pub sweep_mu: String,
    pub sweep_sigma: String,
    /// Worker threads for sweeps; 0 uses all cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::default();
        let ctl = Controls::default();
        let pol = Policy::default();
        Self {
            d: p.d,
            a: p.a,
            a0: p.a0,
            b: p.b,
            l0: p.l0,
            c: p.c,
            mu: p.mu,
            h0: p.h0,
            interpolation: "linear".into(),
            homogeneous_override: false,
            n_nodes: ctl.n_nodes,
            dt0: ctl.dt0,
            dt_min: ctl.dt_min,
            dt_max: ctl.dt_max,
            output_interval: ctl.output_interval,
            snapshot_times: String::new(),
            t_max: 200.0,
            template: "cosine-bump".into(),
            sigma: 1.0,
            sigma_a: 0.05,
            sigma_b: 1.0,
            tol: 1e-3,
            tol_kind: "relative".into(),
            eps_u: pol.eps_u,
            eps_h: pol.eps_h,
            speed_band: pol.speed_band,
            margin: -1.0,
            window_fraction: pol.window_fraction,
            min_horizon: pol.min_horizon,
            max_doublings: pol.max_doublings,
            grid_spacing: 0.0,
            l: 0.0,
            l_check: 200.0,
            sweep_c: String::new(),
            sweep_mu: String::new(),
            sweep_sigma: String::new(),
            threads: 0,
        }
    }
}

fn defaults() -> Map<String, Value> {
    match serde_json::to_value(RunConfig::default()) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

/// Every accepted key.
pub fn known_keys() -> Vec<String> {
    defaults().keys().cloned().collect()
}

/// Parses the right-hand side of `key=value`: JSON scalar if it parses as
/// one, otherwise a bare string.
fn scalar(raw: &str) -> Value {
    match serde_json::from_str::<Value>(raw) {
        Ok(v @ (Value::Number(_) | Value::Bool(_) | Value::String(_))) => v,
        _ => Value::String(raw.to_string()),
    }
}

fn parse_list(name: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Domain(format!("{name}: '{t}' is not a number")))
        })
        .collect()
}

impl RunConfig {
    /// Merges an optional config file and overrides, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<(Self, Vec<String>)> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Io(format!("cannot read config {}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text)? {
                    Value::Object(m) => m,
                    _ => return Err(Error::Format("config must be a JSON object".into())),
                }
            }
            None => Map::new(),
        };
        let known = defaults();
        for (k, v) in map.iter_mut() {
            let Some(default) = known.get(k) else {
                return Err(Error::Domain(format!("unknown config key '{k}'")));
            };
            if v.is_array() || v.is_object() || v.is_null() {
                return Err(Error::Format(format!("config key '{k}' must be a scalar")));
            }
            if default.is_string() && !v.is_string() {
                *v = Value::String(v.to_string());
            }
        }
        for ov in overrides {
            let (k, v) = ov
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("override '{ov}' is not KEY=VALUE")))?;
            let k = k.trim();
            let Some(default) = known.get(k) else {
                return Err(Error::Domain(format!("unknown config key '{k}'")));
            };
            let value = if default.is_string() {
                Value::String(v.trim().to_string())
            } else {
                scalar(v.trim())
            };
            map.insert(k.to_string(), value);
        }
        let present: Vec<String> = map.keys().cloned().collect();
        let cfg: RunConfig =
            serde_json::from_value(Value::Object(map)).map_err(|e| Error::Domain(format!("bad config value: {e}")))?;
        Ok((cfg, present))
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            d: self.d,
            a: self.a,
            a0: self.a0,
            b: self.b,
            l0: self.l0,
            c: self.c,
            mu: self.mu,
            h0: self.h0,
        }
    }

    pub fn environment(&self) -> Result<EnvironmentProfile> {
        let interp: Interpolation = self.interpolation.parse()?;
        Ok(EnvironmentProfile::new(self.params())?
            .with_interpolation(interp)
            .homogeneous(self.homogeneous_override))
    }

    pub fn controls(&self) -> Result<Controls> {
        let c = Controls {
            n_nodes: self.n_nodes,
            dt0: self.dt0,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            output_interval: self.output_interval,
            snapshot_times: parse_list("snapshot_times", &self.snapshot_times)?,
            snapshot_every_output: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn policy(&self) -> Policy {
        Policy {
            eps_u: self.eps_u,
            eps_h: self.eps_h,
            speed_band: self.speed_band,
            margin: (self.margin > 0.0).then_some(self.margin),
            window_fraction: self.window_fraction,
            min_horizon: self.min_horizon,
            max_doublings: self.max_doublings,
        }
    }

    pub fn elliptic(&self, env: &EnvironmentProfile) -> EllipticConfig {
        let cfg = EllipticConfig::for_env(env);
        if self.grid_spacing > 0.0 {
            cfg.with_spacing(self.grid_spacing)
        } else {
            cfg
        }
    }

    pub fn tolerance(&self) -> Result<Tolerance> {
        match self.tol_kind.as_str() {
            "relative" => Ok(Tolerance::Relative(self.tol)),
            "absolute" => Ok(Tolerance::Absolute(self.tol)),
            other => Err(Error::Domain(format!("tol_kind must be relative or absolute, got '{other}'"))),
        }
    }

    pub fn template(&self, env: &EnvironmentProfile) -> Result<InitialKind> {
        InitialKind::from_name(&self.template, env, &self.elliptic(env))
    }

    pub fn sweep_axes(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        Ok((
            parse_list("sweep_c", &self.sweep_c)?,
            parse_list("sweep_mu", &self.sweep_mu)?,
            parse_list("sweep_sigma", &self.sweep_sigma)?,
        ))
    }
}
