//! Verification suites.
//!
//! Every suite returns an [`EstimateReport`] made of named checks, optional
//! per-trial estimate records and aggregate numbers. Suites never stop at the
//! first failing check; the report lists all of them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::partitions::Ramp;

mod estimate;
mod family;
mod geometry;
mod identity;
mod partition;
mod region3;
mod schur;
mod stationary;

pub use estimate::{estimate_suite, estimate_trial, EstimateParams, TrialInputs, TrialOutcome};
pub use family::{mean_zero_on_grid, random_mixture, random_pair, FamilyParams};
pub use geometry::{geometry_suite, GeometryParams};
pub use identity::{identity_suite, IdentityParams};
pub use partition::{partition_suite, PartitionParams};
pub use region3::{region3_suite, Region3Params};
pub use schur::{schur_suite, schur_test, KernelChoice, SchurOutcome, SchurParams};
pub use stationary::{stationary_decay_suite, StationaryParams};

pub const SCHEMA: &str = "ERv1";

/// Suites runnable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Partition,
    Geometry,
    Stationary,
    Identity,
    Estimate,
    Schur,
    Region3,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Partition,
        Suite::Geometry,
        Suite::Stationary,
        Suite::Identity,
        Suite::Estimate,
        Suite::Schur,
        Suite::Region3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Partition => "partition",
            Suite::Geometry => "geometry",
            Suite::Stationary => "stationary",
            Suite::Identity => "identity",
            Suite::Estimate => "estimate",
            Suite::Schur => "schur",
            Suite::Region3 => "region3",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

/// Grid sizes shared by the operator suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    /// Output grid points per axis.
    pub n: usize,
    pub half_width: f64,
    /// Points per axis of the v* lattice.
    pub vstar_n: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { n: 16, half_width: 8.0, vstar_n: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureParams {
    pub n_mu: usize,
    pub n_phi: usize,
    /// `c` in the symbol node floor.
    pub symbol_floor_c: f64,
    /// Validity floor of the stationary-phase form.
    pub lambda_min: f64,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            n_mu: 16,
            n_phi: 16,
            symbol_floor_c: crate::symbol::DEFAULT_FLOOR_C,
            lambda_min: crate::symbol::DEFAULT_LAMBDA_MIN,
        }
    }
}

/// Settings every operator suite needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Context {
    pub seed: u64,
    pub grid: GridParams,
    pub quadrature: QuadratureParams,
    pub ramp: Ramp,
}

impl Default for Context {
    fn default() -> Self {
        Context { seed: 1, grid: GridParams::default(), quadrature: QuadratureParams::default(), ramp: Ramp::Exp }
    }
}

/// Serializes non-finite floats as `null` and reads `null` back as NaN.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod nullable_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &v.is_finite().then_some(*v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
    }
}

/// One asserted (or informational) comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(with = "nullable")]
    pub value: f64,
    #[serde(with = "nullable")]
    pub limit: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// Per-trial row of the estimate suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    #[serde(with = "nullable")]
    pub ratio_hom: f64,
    #[serde(with = "nullable")]
    pub ratio_inhom: f64,
    #[serde(rename = "ratio_LR", with = "nullable")]
    pub ratio_lr: f64,
    #[serde(with = "nullable")]
    pub refinement_delta: f64,
    /// Norms and the remaining ratios, keyed by name.
    #[serde(with = "nullable_map")]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub suite: String,
    pub seed: u64,
    #[serde(default)]
    pub grid: Option<GridParams>,
    #[serde(default)]
    pub config_hash: String,
    /// The full configuration the report was produced with.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema: String,
    pub metadata: Metadata,
    pub checks: Vec<Check>,
    pub trials: Vec<TrialRecord>,
    #[serde(default)]
    pub skipped: Vec<Skip>,
    #[serde(with = "nullable_map")]
    pub aggregates: BTreeMap<String, f64>,
}

impl EstimateReport {
    pub fn new(suite: &str, seed: u64) -> Self {
        EstimateReport {
            schema: SCHEMA.to_string(),
            metadata: Metadata {
                suite: suite.to_string(),
                seed,
                grid: None,
                config_hash: String::new(),
                config: serde_json::Value::Null,
            },
            checks: Vec::new(),
            trials: Vec::new(),
            skipped: Vec::new(),
            aggregates: BTreeMap::new(),
        }
    }

    pub fn suite(&self) -> &str {
        &self.metadata.suite
    }

    /// Records `value ≤ limit` (a NaN value fails).
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, limit: f64) -> bool {
        let passed = value <= limit;
        self.push_check(name, passed, value, limit, String::new())
    }

    pub fn check_range(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) -> bool {
        let passed = lo <= value && value <= hi;
        self.push_check(name, passed, value, hi, format!("window [{lo}, {hi}]"))
    }

    pub fn push_check(
        &mut self,
        name: impl Into<String>,
        passed: bool,
        value: f64,
        limit: f64,
        detail: String,
    ) -> bool {
        self.checks.push(Check { name: name.into(), passed, value, limit, detail });
        passed
    }

    pub fn aggregate(&mut self, name: impl Into<String>, value: f64) {
        self.aggregates.insert(name.into(), value);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Checks whose name starts with `prefix`.
    pub fn checks_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn with_config(mut self, hash: &str, config: serde_json::Value) -> Self {
        self.metadata.config_hash = hash.to_string();
        self.metadata.config = config;
        self
    }
}

/// Relative deviation `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub(crate) fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Formats a number for check names without trailing noise.
pub(crate) fn tag(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    format!("{r}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_round_trip_with_nan() {
        let mut r = EstimateReport::new("demo", 7);
        r.check_le("a", 0.5, 1.0);
        r.check_le("b", f64::NAN, 1.0);
        r.aggregate("x", f64::INFINITY);
        r.trials.push(TrialRecord {
            trial: 0,
            gamma: 1.0,
            p: 2.0,
            q: 1.0,
            ratio_hom: 0.25,
            ratio_inhom: f64::NAN,
            ratio_lr: 1.0,
            refinement_delta: 0.0,
            values: BTreeMap::from([("n".to_string(), 3.0)]),
        });
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"ratio_LR\""));
        let back: EstimateReport = serde_json::from_str(&s).unwrap();
        assert!(back.checks[1].value.is_nan());
        assert!(back.aggregates["x"].is_nan());
        assert_eq!(back.trials[0].ratio_hom, 0.25);
        assert!(!back.passed());
        assert_eq!(back.failures().len(), 1);
    }

    #[test]
    fn nan_fails_checks() {
        let mut r = EstimateReport::new("demo", 0);
        assert!(!r.check_le("nan", f64::NAN, 1.0));
        assert!(!r.check_range("nan", f64::NAN, -1.0, 1.0));
        assert!(r.check_range("in", 0.0, -1.0, 1.0));
    }

    #[test]
    fn rel_diff_basics() {
        assert_eq!(rel_diff(0.0, 0.0), 0.0);
        assert!((rel_diff(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert_eq!(tag(4.0 / 3.0), "1.333333");
        assert_eq!(tag(0.5), "0.5");
    }
}
