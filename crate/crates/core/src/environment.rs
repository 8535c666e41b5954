//! Shifting growth-rate profile.
//!
//! The growth rate is `a0` (unfavourable, `a0 <= 0`) to the left of `-l0`,
//! `a` (favourable) from `0` on, and strictly increasing in between. In the
//! original frame the profile is composed with the shift `x - c t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar coefficients of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Diffusion coefficient.
    pub d: f64,
    /// Favourable growth rate.
    pub a: f64,
    /// Unfavourable growth rate (non-positive).
    pub a0: f64,
    /// Intraspecific competition.
    pub b: f64,
    /// Width of the transition zone.
    pub l0: f64,
    /// Shift speed of the environment.
    pub c: f64,
    /// Free-boundary response coefficient.
    pub mu: f64,
    /// Initial front position.
    pub h0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            d: 1.0,
            a: 1.0,
            a0: -1.0,
            b: 1.0,
            l0: 1.0,
            c: 0.3,
            mu: 1.0,
            h0: 2.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("d", self.d),
            ("a", self.a),
            ("a0", self.a0),
            ("b", self.b),
            ("l0", self.l0),
            ("c", self.c),
            ("mu", self.mu),
            ("h0", self.h0),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in [
            ("d", self.d),
            ("a", self.a),
            ("b", self.b),
            ("l0", self.l0),
            ("c", self.c),
            ("mu", self.mu),
            ("h0", self.h0),
        ] {
            if v <= 0.0 {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.a0 > 0.0 {
            return Err(Error::Domain(format!("a0 must be <= 0, got {}", self.a0)));
        }
        Ok(())
    }

    /// Carrying capacity `a/b`.
    pub fn plateau(&self) -> f64 {
        self.a / self.b
    }

    /// Fisher-KPP speed `2 sqrt(a d)`, the supremum of the semi-wave speed over `mu`.
    pub fn kpp_speed(&self) -> f64 {
        2.0 * (self.a * self.d).sqrt()
    }
}

/// Shape of the growth rate on the transition zone `[-l0, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Cubic smoothstep `3s^2 - 2s^3`; still strictly increasing and Lipschitz.
    Smoothstep,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "smoothstep" => Ok(Self::Smoothstep),
            other => Err(Error::Domain(format!("unknown interpolation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentProfile {
    pub params: ModelParams,
    pub interpolation: Interpolation,
    /// Force `A == a` everywhere (homogeneous favourable environment).
    pub homogeneous_override: bool,
}

impl EnvironmentProfile {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            interpolation: Interpolation::Linear,
            homogeneous_override: false,
        })
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn homogeneous(mut self, on: bool) -> Self {
        self.homogeneous_override = on;
        self
    }

    /// `A(xi)` without the finiteness check; the hot loops of the solvers use this.
    #[inline]
    pub fn rate(&self, xi: f64) -> f64 {
        let p = &self.params;
        if self.homogeneous_override || xi >= 0.0 {
            return p.a;
        }
        if xi < -p.l0 {
            return p.a0;
        }
        let s = (xi + p.l0) / p.l0;
        let w = match self.interpolation {
            Interpolation::Linear => s,
            Interpolation::Smoothstep => s * s * (3.0 - 2.0 * s),
        };
        p.a0 + (p.a - p.a0) * w
    }

    /// Growth rate at `xi`.
    pub fn eval(&self, xi: f64) -> Result<f64> {
        if !xi.is_finite() {
            return Err(Error::Domain(format!("xi must be finite, got {xi}")));
        }
        Ok(self.rate(xi))
    }

    /// Growth rate at position `x` and time `t`, i.e. `A(x - c t)`.
    pub fn eval_moving(&self, x: f64, t: f64) -> Result<f64> {
        if !x.is_finite() || !t.is_finite() {
            return Err(Error::Domain(format!("x, t must be finite, got ({x}, {t})")));
        }
        if t < 0.0 {
            return Err(Error::Domain(format!("t must be >= 0, got {t}")));
        }
        self.eval(x - self.params.c * t)
    }

    /// Lipschitz constant of the profile.
    pub fn lipschitz(&self) -> f64 {
        if self.homogeneous_override {
            return 0.0;
        }
        let p = &self.params;
        let slope = (p.a - p.a0) / p.l0;
        match self.interpolation {
            Interpolation::Linear => slope,
            Interpolation::Smoothstep => 1.5 * slope,
        }
    }

    /// `max |A|`, used for explicit step caps.
    pub fn max_abs_rate(&self) -> f64 {
        if self.homogeneous_override {
            self.params.a
        } else {
            self.params.a.max(-self.params.a0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_profile() -> EnvironmentProfile {
        EnvironmentProfile::new(ModelParams::default()).unwrap()
    }

    #[test]
    fn branch_values() {
        let env = unit_profile();
        assert_eq!(env.eval(-2.0).unwrap(), -1.0);
        assert_eq!(env.eval(0.0).unwrap(), 1.0);
        assert_eq!(env.eval(-0.5).unwrap(), 0.0);
    }

    #[test]
    fn continuous_at_knots() {
        let env = unit_profile();
        let p = env.params;
        assert_eq!(env.rate(-p.l0), p.a0);
        assert_eq!(env.rate(-p.l0 - 1e-12), p.a0);
        assert_eq!(env.rate(-f64::MIN_POSITIVE), p.a);
        let s = env.with_interpolation(Interpolation::Smoothstep);
        assert_eq!(s.rate(-p.l0), p.a0);
    }

    #[test]
    fn moving_frame() {
        let env = unit_profile();
        let c = env.params.c;
        let t = 7.0;
        assert_eq!(env.eval_moving(c * t, t).unwrap(), 1.0);
        assert_eq!(env.eval_moving(c * t - 1.0 - 5.0, t).unwrap(), -1.0);
        assert_eq!(env.eval_moving(-0.5, 0.0).unwrap(), env.eval(-0.5).unwrap());
    }

    #[test]
    fn rejects_non_finite() {
        let env = unit_profile();
        assert!(matches!(env.eval(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(env.eval_moving(0.0, f64::INFINITY), Err(Error::Domain(_))));
        assert!(matches!(env.eval_moving(0.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn params_validation() {
        let mut p = ModelParams::default();
        p.a0 = 0.5;
        assert!(p.validate().is_err());
        p = ModelParams::default();
        p.mu = 0.0;
        assert!(p.validate().is_err());
        p = ModelParams::default();
        p.d = f64::NAN;
        assert!(p.validate().is_err());
        assert!(ModelParams::default().validate().is_ok());
    }

    #[test]
    fn homogeneous_override_is_constant() {
        let env = unit_profile().homogeneous(true);
        assert_eq!(env.rate(-50.0), 1.0);
        assert_eq!(env.rate(-0.5), 1.0);
    }

    proptest! {
        #[test]
        fn strictly_increasing_on_transition(u in 0.0f64..1.0, v in 0.0f64..1.0, smooth in any::<bool>()) {
            prop_assume!((u - v).abs() > 1e-9);
            let interp = if smooth { Interpolation::Smoothstep } else { Interpolation::Linear };
            let env = unit_profile().with_interpolation(interp);
            let (lo, hi) = if u < v { (u, v) } else { (v, u) };
            let l0 = env.params.l0;
            prop_assert!(env.rate(-l0 + lo * l0) < env.rate(-l0 + hi * l0));
        }

        #[test]
        fn lipschitz_bound(x in -5.0f64..3.0, y in -5.0f64..3.0, smooth in any::<bool>()) {
            let interp = if smooth { Interpolation::Smoothstep } else { Interpolation::Linear };
            let env = unit_profile().with_interpolation(interp);
            let lhs = (env.rate(x) - env.rate(y)).abs();
            prop_assert!(lhs <= env.lipschitz() * (x - y).abs() + 1e-12);
        }
    }
}
