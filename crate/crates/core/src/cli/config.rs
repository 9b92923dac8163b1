//! Scenario configuration, read from TOML.
//!
//! ```toml
//! [run]
//! kind = "poincare_audit"
//! seed = 7
//! threshold = 1e-8
//!
//! [field]
//! name = "shear_torus"
//! a0 = 2.0
//!
//! [section]
//! axis = 0
//! ```
//!
//! Unknown keys and sections that the chosen kind does not use are rejected.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::flow::{Direction, IntegratorConfig, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    PoincareAudit,
    LevelMeasureAudit,
    RotationProfile,
    SuspensionCertify,
    OrbitClassify,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::PoincareAudit => "poincare_audit",
            Kind::LevelMeasureAudit => "level_measure_audit",
            Kind::RotationProfile => "rotation_profile",
            Kind::SuspensionCertify => "suspension_certify",
            Kind::OrbitClassify => "orbit_classify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub run: RunSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<LevelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suspension: Option<SuspensionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbits: Option<OrbitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_threshold() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_method() -> String {
    "rk45_adaptive".into()
}
fn default_tol() -> f64 {
    1e-12
}
fn default_max_step() -> f64 {
    0.25
}
fn default_max_steps() -> usize {
    5_000_000
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            method: default_method(),
            tol: default_tol(),
            max_step: default_max_step(),
            max_steps: default_max_steps(),
        }
    }
}

impl IntegratorSpec {
    pub fn build(&self) -> Result<IntegratorConfig<f64>, CliError> {
        let method: Method =
            self.method.parse().map_err(|e| CliError::Config(format!("integrator.method: {e}")))?;
        let cfg = IntegratorConfig {
            method,
            abs_tol: self.tol,
            rel_tol: self.tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("[integrator]: {e}")))?;
        Ok(cfg)
    }
}

/// Catalog entry name plus its numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub axis: usize,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "default_direction")]
    pub direction: String,
    /// Take the section coordinate modulo 2π; defaults to the field's domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<bool>,
    #[serde(default = "default_return_time")]
    pub max_return_time: f64,
    /// Restrict to points with `X_axis ≥ min_cosine·|X|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_cosine: Option<f64>,
    /// Sampling box in chart coordinates.
    #[serde(default = "default_chart_lo")]
    pub lo: [f64; 2],
    #[serde(default = "default_chart_hi")]
    pub hi: [f64; 2],
}

fn default_direction() -> String {
    "positive".into()
}
fn default_return_time() -> f64 {
    100.0
}
fn default_chart_lo() -> [f64; 2] {
    [0.0, 0.0]
}
fn default_chart_hi() -> [f64; 2] {
    [TAU, TAU]
}

impl SectionSpec {
    pub fn direction(&self) -> Result<Direction, CliError> {
        self.direction.parse().map_err(|e| CliError::Config(format!("section.direction: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_count")]
    pub count: usize,
    /// Upper bound of the sampled flow times.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Sampling box corners; defaults depend on the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<[f64; 3]>,
}

fn default_count() -> usize {
    200
}
fn default_t_max() -> f64 {
    7.0
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { count: default_count(), t_max: default_t_max(), lo: None, hi: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub c: f64,
    /// Index into the entry's registered integrals.
    #[serde(default)]
    pub integral: usize,
    /// Constant diagonal metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<[f64; 3]>,
    #[serde(default = "default_commutator_threshold")]
    pub commutator_threshold: f64,
}

fn default_commutator_threshold() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default = "default_c_min")]
    pub c_min: f64,
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_c_min() -> f64 {
    -0.9
}
fn default_c_max() -> f64 {
    0.9
}
fn default_levels() -> usize {
    33
}
fn default_grid() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(default = "default_map")]
    pub name: String,
    #[serde(default = "default_k", rename = "K", alias = "k")]
    pub k: f64,
}

fn default_map() -> String {
    "standard".into()
}
fn default_k() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuspensionSpec {
    #[serde(default = "default_epsilons")]
    pub epsilon: Vec<f64>,
    #[serde(default = "default_susp_grid")]
    pub grid: usize,
    #[serde(default = "default_s_values")]
    pub s_values: Vec<f64>,
    #[serde(default = "default_return_points")]
    pub return_points: usize,
    #[serde(default = "default_flow_time")]
    pub flow_time: f64,
    #[serde(default = "default_roof")]
    pub roof: f64,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_susp_grid() -> usize {
    16
}
fn default_s_values() -> Vec<f64> {
    vec![-1.0, 0.0, 0.7]
}
fn default_return_points() -> usize {
    100
}
fn default_flow_time() -> f64 {
    2.5
}
fn default_roof() -> f64 {
    1.0
}

impl Default for SuspensionSpec {
    fn default() -> Self {
        Self {
            epsilon: default_epsilons(),
            grid: default_susp_grid(),
            s_values: default_s_values(),
            return_points: default_return_points(),
            flow_time: default_flow_time(),
            roof: default_roof(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    /// Initial guesses in section chart coordinates.
    pub guesses: Vec<[f64; 2]>,
    #[serde(default = "default_iterates")]
    pub iterates: usize,
    /// Level of the suspension model when a `[map]` is given.
    #[serde(default)]
    pub s0: f64,
}

fn default_iterates() -> usize {
    1
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check_sections()?;
        cfg.fill_defaults();
        Ok(cfg)
    }

    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let pairs: [(&'static str, bool); 8] = [
            ("field", self.field.is_some()),
            ("section", self.section.is_some()),
            ("sampling", self.sampling.is_some()),
            ("level", self.level.is_some()),
            ("profile", self.profile.is_some()),
            ("map", self.map.is_some()),
            ("suspension", self.suspension.is_some()),
            ("orbits", self.orbits.is_some()),
        ];
        for (name, here) in pairs {
            if here {
                v.push(name);
            }
        }
        v
    }

    fn check_sections(&self) -> Result<(), CliError> {
        let (required, optional): (&[&str], &[&str]) = match self.run.kind {
            Kind::PoincareAudit => (&["field", "section"], &["sampling"]),
            Kind::LevelMeasureAudit => (&["field", "level"], &["sampling"]),
            Kind::RotationProfile => (&["field"], &["profile"]),
            Kind::SuspensionCertify => (&[], &["map", "suspension"]),
            Kind::OrbitClassify => (&["orbits"], &["map", "field", "section"]),
        };
        let kind = self.run.kind.as_str();
        let present = self.present();
        for name in required {
            if !present.contains(name) {
                return Err(CliError::Config(format!("kind `{kind}` requires a [{name}] section")));
            }
        }
        for name in &present {
            if !required.contains(name) && !optional.contains(name) {
                return Err(CliError::Config(format!("section [{name}] is not used by kind `{kind}`")));
            }
        }
        if self.run.kind == Kind::OrbitClassify {
            let by_map = self.map.is_some() && self.field.is_none() && self.section.is_none();
            let by_field = self.map.is_none() && self.field.is_some() && self.section.is_some();
            if !(by_map || by_field) {
                return Err(CliError::Config(
                    "orbit_classify needs either [map] or both [field] and [section]".into(),
                ));
            }
        }
        if !(self.run.threshold > 0.0) {
            return Err(CliError::Config("run.threshold must be positive".into()));
        }
        Ok(())
    }

    fn fill_defaults(&mut self) {
        match self.run.kind {
            Kind::PoincareAudit | Kind::LevelMeasureAudit => {
                if self.sampling.is_none() {
                    let mut s = SamplingSpec::default();
                    if self.run.kind == Kind::LevelMeasureAudit {
                        s.count = 100;
                    }
                    self.sampling = Some(s);
                }
            }
            Kind::RotationProfile => {
                self.profile.get_or_insert(ProfileSpec {
                    c_min: default_c_min(),
                    c_max: default_c_max(),
                    levels: default_levels(),
                    grid: default_grid(),
                });
            }
            Kind::SuspensionCertify => {
                self.map.get_or_insert(MapSpec { name: default_map(), k: default_k() });
                self.suspension.get_or_insert_with(SuspensionSpec::default);
            }
            Kind::OrbitClassify => {}
        }
    }

    /// Overrides the integrator tolerance.
    pub fn override_tolerance(&mut self, tol: f64) {
        self.integrator.tol = tol;
    }
}
