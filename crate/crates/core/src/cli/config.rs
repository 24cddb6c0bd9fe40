use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::dynamics::SimConfig;
use crate::measurement::GammaMode;
use crate::spin::{SpinQuantumNumber, UnitVector3};
use crate::state::DEFAULT_DIMENSION_CAP;
use crate::{Error, Result};

/// An angle in radians. Deserializes from a number or from a string in units
/// of π such as `"0.55pi"`, `"pi"` or `"-pi"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angle(pub f64);

impl Angle {
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::invalid(format!("cannot parse angle {s:?}"));
        let value = match t.strip_suffix("pi") {
            Some(head) => {
                let head = head.trim().trim_end_matches('*').trim();
                let factor = match head {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    h => h.parse::<f64>().map_err(|_| bad())?,
                };
                factor * PI
            }
            None => t.parse::<f64>().map_err(|_| bad())?,
        };
        if !value.is_finite() {
            return Err(bad());
        }
        Ok(Angle(value))
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct AngleVisitor;
        impl Visitor<'_> for AngleVisitor {
            type Value = Angle;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an angle in radians or a string like \"0.55pi\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Angle, E> {
                Ok(Angle(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Angle, E> {
                Ok(Angle(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Angle, E> {
                Ok(Angle(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Angle, E> {
                Angle::parse(v).map_err(E::custom)
            }
        }
        d.deserialize_any(AngleVisitor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Direction {
    pub theta: Angle,
    pub phi: Angle,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta: Angle(theta), phi: Angle(phi) }
    }

    pub fn unit(&self) -> UnitVector3 {
        UnitVector3::from_angles(self.theta.0, self.phi.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Trajectory,
    Basins,
    NoiseCurve,
    SchmidtFlow,
    Validate,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Trajectory => "trajectory",
            Experiment::Basins => "basins",
            Experiment::NoiseCurve => "noise_curve",
            Experiment::SchmidtFlow => "schmidt_flow",
            Experiment::Validate => "validate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinsConfig {
    pub two_s1: u32,
    pub two_s2: u32,
    /// Largest allowed `N₁·N₂`.
    pub dimension_cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub gamma_mode: GammaMode,
    pub gamma: f64,
    pub omega_d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub u_d: Direction,
    pub n1: Direction,
    pub n2: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt_initial: f64,
    pub t_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub renorm_each_step: bool,
    pub sample_stride: usize,
}

impl From<SimSection> for SimConfig {
    fn from(s: SimSection) -> Self {
        SimConfig {
            dt_initial: s.dt_initial,
            t_max: s.t_max,
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            renorm_each_step: s.renorm_each_step,
            sample_stride: s.sample_stride,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub phi0: f64,
    pub theta_grid_size: usize,
    /// Monte-Carlo samples per angle for the cross-check; 0 disables it.
    pub mc_samples: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinsConfig {
    pub n_theta: usize,
    pub n_phi: usize,
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchmidtFlowConfig {
    /// Number of Schmidt coefficients.
    pub m: usize,
    /// Index of the coefficient raised above the uniform value.
    pub perturbed_index: usize,
    pub perturbation: f64,
    pub t_max: f64,
    /// Checkpoints for the comparison against the full equation; 0 skips it.
    pub checkpoints: usize,
    /// Tolerances for both the reduced flow and the full-equation comparison.
    pub rel_tol: f64,
    pub abs_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: String,
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub spins: SpinsConfig,
    pub rates: RatesConfig,
    pub geometry: GeometryConfig,
    pub sim: SimSection,
    pub noise: NoiseConfig,
    pub basins: BasinsConfig,
    pub schmidt_flow: SchmidtFlowConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    /// The tilted dipolar case: spin ½ and spin 21/2, `γ = ω_d = 1`,
    /// `û_d = (3π/8, 3π/4)`, `n̂₁ = (π/2, π/2)`, `n̂₂ = −ẑ`.
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            experiment: Experiment::Trajectory,
            spins: SpinsConfig { two_s1: 1, two_s2: 21, dimension_cap: DEFAULT_DIMENSION_CAP },
            rates: RatesConfig { gamma_mode: GammaMode::Constant, gamma: 1.0, omega_d: 1.0 },
            geometry: GeometryConfig {
                u_d: Direction::new(3.0 * PI / 8.0, 3.0 * PI / 4.0),
                n1: Direction::new(PI / 2.0, PI / 2.0),
                n2: Direction::new(PI, 0.0),
            },
            sim: SimSection {
                dt_initial: sim.dt_initial,
                t_max: sim.t_max,
                rel_tol: sim.rel_tol,
                abs_tol: sim.abs_tol,
                renorm_each_step: sim.renorm_each_step,
                sample_stride: sim.sample_stride,
            },
            noise: NoiseConfig { phi0: 0.5, theta_grid_size: 181, mc_samples: 0, seed: 1 },
            basins: BasinsConfig { n_theta: 36, n_phi: 72, eps: 0.01 },
            schmidt_flow: SchmidtFlowConfig {
                m: 10,
                perturbed_index: 0,
                perturbation: 1e-3,
                t_max: 40.0,
                checkpoints: 20,
                rel_tol: 1e-12,
                abs_tol: 1e-14,
            },
            output: OutputConfig { path: "out".into(), format: OutputFormat::Csv },
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("config is not valid JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: Self =
            serde_json::from_value(value).map_err(|e| Error::invalid(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` (or the defaults when `None`) and applies `key=value`
    /// overrides with dotted keys, e.g. `sim.t_max=30`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::invalid(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::invalid(format!("{} is not valid JSON: {e}", p.display())))?
            }
            None => serde_json::to_value(Self::default()).expect("default config serializes"),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rates;
        for (name, v) in [("gamma", r.gamma), ("omega_d", r.omega_d)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("rates.{name} must be finite and non-negative, got {v}")));
            }
        }
        let g = &self.geometry;
        for (name, d) in [("u_d", g.u_d), ("n1", g.n1), ("n2", g.n2)] {
            if !d.theta.0.is_finite() || !d.phi.0.is_finite() {
                return Err(Error::invalid(format!("geometry.{name} angles must be finite")));
            }
        }
        let s1 = SpinQuantumNumber::from_twice(self.spins.two_s1)?;
        if self.spins.two_s1 != 1 && matches!(self.experiment, Experiment::Trajectory | Experiment::Basins) {
            return Err(Error::invalid("dipolar experiments need spins.two_s1 = 1"));
        }
        let s2 = SpinQuantumNumber::from_twice(self.spins.two_s2)?;
        let dim = s1.dim().checked_mul(s2.dim()).unwrap_or(usize::MAX);
        if dim > self.spins.dimension_cap {
            return Err(Error::invalid(format!(
                "state dimension {dim} exceeds spins.dimension_cap = {}",
                self.spins.dimension_cap
            )));
        }
        SimConfig::from(self.sim).validate()?;
        let n = &self.noise;
        if !(n.phi0 > 0.0) || !n.phi0.is_finite() {
            return Err(Error::invalid(format!("noise.phi0 must be positive, got {}", n.phi0)));
        }
        if n.theta_grid_size < 2 {
            return Err(Error::invalid("noise.theta_grid_size must be at least 2"));
        }
        let b = &self.basins;
        if b.n_theta < 2 || b.n_phi < 2 {
            return Err(Error::invalid("basins.n_theta and basins.n_phi must be at least 2"));
        }
        if !(b.eps > 0.0 && b.eps < 0.5) {
            return Err(Error::invalid(format!("basins.eps must lie in (0, 0.5), got {}", b.eps)));
        }
        let f = &self.schmidt_flow;
        if f.m < 1 || f.perturbed_index >= f.m {
            return Err(Error::invalid("schmidt_flow needs m >= 1 and perturbed_index < m"));
        }
        if f.m * f.m > self.spins.dimension_cap {
            return Err(Error::invalid(format!(
                "schmidt_flow.m = {} needs dimension {} above spins.dimension_cap",
                f.m,
                f.m * f.m
            )));
        }
        if !(f.perturbation > -1.0) || !f.perturbation.is_finite() {
            return Err(Error::invalid("schmidt_flow.perturbation must be finite and > -1"));
        }
        if !(f.t_max >= 0.0) || !f.t_max.is_finite() {
            return Err(Error::invalid("schmidt_flow.t_max must be finite and non-negative"));
        }
        if !(f.rel_tol > 0.0 && f.rel_tol <= 1e-2 && f.abs_tol > 0.0 && f.abs_tol <= 1e-2) {
            return Err(Error::invalid("schmidt_flow tolerances must lie in (0, 1e-2]"));
        }
        if self.rates.gamma == 0.0 && self.experiment == Experiment::SchmidtFlow {
            return Err(Error::invalid("schmidt_flow needs rates.gamma > 0"));
        }
        if self.output.path.is_empty() {
            return Err(Error::invalid("output.path must not be empty"));
        }
        Ok(())
    }
}

fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets the leaf named by a dotted key. Every path segment must already
/// exist; unknown keys are an error.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::invalid(format!("override {assignment:?} has an empty key")));
    }
    let mut node = root;
    for seg in key.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(seg))
            .ok_or_else(|| Error::invalid(format!("unknown config key {key:?}")))?;
    }
    *node = parse_override_value(raw.trim());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_strings() {
        assert_eq!(Angle::parse("pi").unwrap().0, PI);
        assert_eq!(Angle::parse("-pi").unwrap().0, -PI);
        assert!((Angle::parse("0.55pi").unwrap().0 - 0.55 * PI).abs() < 1e-15);
        assert!((Angle::parse("0.5*pi").unwrap().0 - 0.5 * PI).abs() < 1e-15);
        assert_eq!(Angle::parse("1.25").unwrap().0, 1.25);
        assert!(Angle::parse("half pi").is_err());
        assert!(Angle::parse("inf").is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), c);
    }

    #[test]
    fn overrides() {
        let c = ExperimentConfig::load(
            None,
            &["sim.t_max=12.5".into(), "geometry.n1.theta=0.55pi".into(), "rates.gamma_mode=coupling_driven".into()],
        )
        .unwrap();
        assert_eq!(c.sim.t_max, 12.5);
        assert!((c.geometry.n1.theta.0 - 0.55 * PI).abs() < 1e-15);
        assert_eq!(c.rates.gamma_mode, GammaMode::CouplingDriven);
        assert!(ExperimentConfig::load(None, &["sim.tmax=1".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["sim.t_max".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["rates.gamma=-1".into()]).is_err());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = ExperimentConfig::from_json_str(r#"{"rates": {"gamma_mode": "constant", "gamma": 0.5, "omega_d": 2}}"#)
            .unwrap();
        assert_eq!(c.rates.omega_d, 2.0);
        assert_eq!(c.spins.two_s2, 21);
        assert!(ExperimentConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn dimension_cap() {
        let e = ExperimentConfig::load(None, &["spins.two_s2=99".into(), "spins.dimension_cap=100".into()]);
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
    }
}
