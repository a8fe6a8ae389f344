//! Structured experiment output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{CompareConfig, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Correctly scaled run under study.
    Primary,
    /// Mis-scaled sibling of a primary run.
    Control,
    /// Baseline other runs are compared against.
    Reference,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Primary => "primary",
            Role::Control => "control",
            Role::Reference => "reference",
        }
    }
}

/// One propagation run. Metrics that evaluate to a non-finite number are
/// dropped and recorded as a `nonfinite:<name>` flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: String,
    pub role: Role,
    pub params: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl RunRecord {
    pub fn new(key: impl Into<String>, role: Role) -> Self {
        RunRecord {
            key: key.into(),
            role,
            params: BTreeMap::new(),
            metrics: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.to_string(), value);
        } else {
            self.flag(format!("nonfinite:{name}"));
        }
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        self.flags.push(flag.into());
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Power-law fit `y ≈ prefactor · x^exponent` over a group of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub name: String,
    pub x: String,
    pub y: String,
    pub points: usize,
    pub exponent: f64,
    pub prefactor: f64,
    pub r2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    ShatteringDivergent,
    NonDegenerate,
    TrivialContraction,
}

impl Degeneracy {
    pub fn classify(exponent: f64, tolerance: f64) -> Self {
        if exponent > tolerance {
            Degeneracy::ShatteringDivergent
        } else if exponent < -tolerance {
            Degeneracy::TrivialContraction
        } else {
            Degeneracy::NonDegenerate
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Degeneracy::ShatteringDivergent => "shattering-divergent",
            Degeneracy::NonDegenerate => "non-degenerate",
            Degeneracy::TrivialContraction => "trivial-contraction",
        }
    }
}

/// Verdict for one depth-scaling exponent `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub scaling_exponent: f64,
    pub fitted: f64,
    pub predicted: f64,
    pub verdict: Degeneracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedProfile {
    pub name: String,
    pub extents: Vec<usize>,
    pub channels: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigEcho {
    Study(ExperimentConfig),
    Compare(CompareConfig),
}

/// Everything a study produced. A pure function of (config, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub study: String,
    pub seed: u64,
    pub rng_algorithm: String,
    pub config: ConfigEcho,
    pub records: Vec<RunRecord>,
    #[serde(default)]
    pub fits: Vec<FitRecord>,
    #[serde(default)]
    pub classifications: Vec<Classification>,
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
    /// Human-readable statement of every classification or pass rule applied.
    #[serde(default)]
    pub rules: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<NamedProfile>,
}

impl ExperimentReport {
    pub fn record(&self, key: &str) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.key == key)
    }

    pub fn fit(&self, name: &str) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub(crate) fn summarize(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.summary.insert(name.to_string(), value);
        }
    }
}
