//! Run configuration.
//!
//! The file format is TOML. Every key is optional; missing keys take their
//! defaults and unknown keys are rejected with their dotted path.
//!
//! ```toml
//! seed = 1
//! output_dir = "out"
//!
//! [grid]
//! n = 16            # power of two
//! half_width = 8.0
//! vstar_n = 16      # power of two
//!
//! [quadrature]
//! n_mu = 16
//! n_phi = 16
//!
//! [partitions]
//! ramp = "exp"      # or "exp_squared"
//!
//! [estimate]
//! trials = 50
//! gammas = [0.0, 0.5, 1.0]
//!
//! [[schur.kernels]]
//! kind = "region3"
//! z = 1
//! ```
//!
//! Sections: `grid`, `quadrature`, `partitions`, `geometry`, `stationary`,
//! `identity`, `estimate` (with `estimate.family`), `schur`, `region3`.
//!
//! Environment variables `GAINTERM_<SECTION>_<KEY>` (or `GAINTERM_<KEY>` for
//! top-level keys) override the file. Values are TOML literals; anything that
//! does not parse as one is taken as a string.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::verify::{
    estimate_suite, geometry_suite, identity_suite, partition_suite, region3_suite, schur_suite,
    stationary_decay_suite, Context, EstimateParams, EstimateReport, GeometryParams, GridParams, IdentityParams,
    PartitionParams, QuadratureParams, Region3Params, SchurParams, StationaryParams, Suite,
};

pub const ENV_PREFIX: &str = "GAINTERM_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub output_dir: String,
    pub grid: GridParams,
    pub quadrature: QuadratureParams,
    pub partitions: PartitionParams,
    pub geometry: GeometryParams,
    pub stationary: StationaryParams,
    pub identity: IdentityParams,
    pub estimate: EstimateParams,
    pub schur: SchurParams,
    pub region3: Region3Params,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            output_dir: "out".into(),
            grid: GridParams::default(),
            quadrature: QuadratureParams::default(),
            partitions: PartitionParams::default(),
            geometry: GeometryParams::default(),
            stationary: StationaryParams::default(),
            identity: IdentityParams::default(),
            estimate: EstimateParams::default(),
            schur: SchurParams::default(),
            region3: Region3Params::default(),
        }
    }
}

fn config_err(key: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config { key: key.into(), msg: msg.into() }
}

fn default_table() -> Table {
    Table::try_from(Config::default()).expect("default config serializes")
}

/// Reports the first key of `given` absent from `reference`, recursing into
/// tables. Arrays are left to the typed deserializer.
fn unknown_key(given: &Table, reference: &Table, prefix: &str) -> Option<String> {
    for (k, v) in given {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (v, reference.get(k)) {
            (_, None) => return Some(path),
            (Value::Table(a), Some(Value::Table(b))) => {
                if let Some(p) = unknown_key(a, b, &path) {
                    return Some(p);
                }
            }
            _ => {}
        }
    }
    None
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_env_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Turns `GAINTERM_*` variables into a table shaped like the config file.
fn env_table(env: &[(String, String)]) -> Result<Table> {
    let reference = default_table();
    let mut out = Table::new();
    for (name, raw) in env {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let rest = rest.to_ascii_lowercase();
        let section = reference
            .iter()
            .filter(|(k, v)| v.is_table() && rest.starts_with(&format!("{k}_")))
            .map(|(k, _)| k.clone())
            .max_by_key(|k| k.len());
        let value = parse_env_value(raw);
        match section {
            Some(sec) => {
                let key = rest[sec.len() + 1..].to_string();
                let tbl = out.entry(sec).or_insert_with(|| Value::Table(Table::new()));
                if let Value::Table(t) = tbl {
                    t.insert(key, value);
                }
            }
            None if reference.contains_key(&rest) => {
                out.insert(rest, value);
            }
            None => return Err(config_err(name.clone(), "unknown environment override")),
        }
    }
    Ok(out)
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        Config::layered(text, &[])
    }

    /// Defaults, then `text`, then the environment overrides.
    pub fn layered(text: &str, env: &[(String, String)]) -> Result<Config> {
        let file: Table = text.parse().map_err(|e: toml::de::Error| config_err("<file>", e.message()))?;
        let reference = default_table();
        if let Some(k) = unknown_key(&file, &reference, "") {
            return Err(config_err(k, "unknown key"));
        }
        let envt = env_table(env)?;
        if let Some(k) = unknown_key(&envt, &reference, "") {
            return Err(config_err(k, "unknown key (environment)"));
        }
        let mut merged = reference;
        merge(&mut merged, file);
        merge(&mut merged, envt);
        let cfg: Config =
            Value::Table(merged).try_into().map_err(|e: toml::de::Error| config_err("<merged>", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The configuration without `output_dir`, which does not affect results.
    fn canonical(&self) -> Config {
        Config { output_dir: String::new(), ..self.clone() }
    }

    /// SHA-256 of the canonical TOML text, hex encoded. `output_dir` is
    /// excluded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The canonical configuration as echoed into reports.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.canonical()).expect("config serializes")
    }

    pub fn context(&self) -> Context {
        Context { seed: self.seed, grid: self.grid, quadrature: self.quadrature, ramp: self.partitions.ramp }
    }

    /// Runs `suite` with this configuration; the report carries the config
    /// and its hash.
    pub fn run_suite(&self, suite: Suite) -> EstimateReport {
        let ctx = self.context();
        let mut rep = match suite {
            Suite::Partition => partition_suite(&self.partitions),
            Suite::Geometry => geometry_suite(self.seed, self.geometry.trials, &self.geometry),
            Suite::Stationary => stationary_decay_suite(&self.stationary, &self.quadrature),
            Suite::Identity => identity_suite(&ctx, self.identity.trials, &self.identity),
            Suite::Estimate => {
                let e = &self.estimate;
                estimate_suite(&ctx, e.trials, &e.exponents, &e.gammas, e)
            }
            Suite::Schur => schur_suite(&self.schur, ctx.ramp),
            Suite::Region3 => region3_suite(self.seed, &self.region3, &self.quadrature, ctx.ramp),
        };
        rep.metadata.seed = self.seed;
        if rep.metadata.grid.is_none() && matches!(suite, Suite::Identity | Suite::Estimate) {
            rep.metadata.grid = Some(self.grid);
        }
        rep.with_config(&self.hash(), self.to_json())
    }

    pub fn validate(&self) -> Result<()> {
        let pow2 = |key: &str, n: usize| {
            if n >= 2 && n.is_power_of_two() {
                Ok(())
            } else {
                Err(config_err(key, format!("{n} is not a power of two")))
            }
        };
        if self.seed > i64::MAX as u64 {
            return Err(config_err("seed", "exceeds the TOML integer range"));
        }
        pow2("grid.n", self.grid.n)?;
        pow2("grid.vstar_n", self.grid.vstar_n)?;
        if self.grid.half_width.is_nan() || self.grid.half_width <= 0.0 {
            return Err(config_err("grid.half_width", "must be positive"));
        }
        let r = self.estimate.refine_n;
        if !r.is_multiple_of(2) || r < 8 {
            return Err(config_err("estimate.refine_n", format!("{r} must be even and at least 8")));
        }
        if self.quadrature.n_mu == 0 || self.quadrature.n_phi == 0 {
            return Err(config_err("quadrature", "node counts must be positive"));
        }
        check_positive(&self.to_json(), "")
    }
}

/// Every `*_tol` and `guard` key must be a positive number.
fn check_positive(v: &serde_json::Value, prefix: &str) -> Result<()> {
    if let serde_json::Value::Object(map) = v {
        for (k, x) in map {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            if k.ends_with("tol") || k == "guard" {
                match x.as_f64() {
                    Some(t) if t > 0.0 => {}
                    _ => return Err(config_err(path, "tolerance must be positive")),
                }
            }
            check_positive(x, &path)?;
        }
    }
    Ok(())
}

/// Reads `path` (if given) and applies the `GAINTERM_*` entries of `env`.
pub fn load_config(path: Option<&Path>, env: &[(String, String)]) -> Result<Config> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| config_err(p.display().to_string(), e.to_string()))?,
        None => String::new(),
    };
    Config::layered(&text, env)
}

/// The `GAINTERM_*` variables of the current process, sorted.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::Ramp;
    use crate::verify::KernelChoice;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn env_beats_file() {
        let c = Config::layered("[grid]\nn = 16\n", &env(&[("GAINTERM_GRID_N", "32")])).unwrap();
        assert_eq!(c.grid.n, 32);
        let c = Config::layered("", &env(&[("GAINTERM_GRID_VSTAR_N", "8"), ("GAINTERM_SEED", "9")])).unwrap();
        assert_eq!((c.grid.vstar_n, c.seed), (8, 9));
        let c = Config::layered("", &env(&[("GAINTERM_PARTITIONS_RAMP", "exp_squared")])).unwrap();
        assert_eq!(c.partitions.ramp, Ramp::ExpSquared);
        let c = Config::layered("", &env(&[("GAINTERM_ESTIMATE_FAMILY_CENTER_BOX", "1.0")]));
        assert!(c.is_err());
        let c = Config::layered("", &env(&[("PATH", "/bin"), ("GAINTERM_OUTPUT_DIR", "x/y")])).unwrap();
        assert_eq!(c.output_dir, "x/y");
    }

    #[test]
    fn non_power_of_two_names_key() {
        match Config::from_toml_str("[grid]\nn = 20\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "grid.n"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_have_paths() {
        for (text, path) in [
            ("bogus = 1", "bogus"),
            ("[grid]\nm = 4", "grid.m"),
            ("[estimate.family]\nwidth = 1.0", "estimate.family.width"),
            ("[nope]\n", "nope"),
        ] {
            match Config::from_toml_str(text) {
                Err(Error::Config { key, .. }) => assert_eq!(key, path),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(Config::layered("", &env(&[("GAINTERM_GRID_WHAT", "1")])).is_err());
        assert!(Config::layered("", &env(&[("GAINTERM_WHAT", "1")])).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(Config::from_toml_str("[geometry]\ngradient_tol = 0.0").is_err());
        assert!(Config::from_toml_str("[identity]\nguard = -1.0").is_err());
        assert!(Config::from_toml_str("[grid]\nn = \"x\"").is_err());
        assert!(Config::from_toml_str("[estimate]\nrefine_n = 15").is_err());
        assert!(Config::from_toml_str("seed = ").is_err());
    }

    #[test]
    fn round_trip() {
        let mut c = Config { seed: 77, ..Config::default() };
        c.grid.n = 8;
        c.estimate.refine_n = 12;
        c.partitions.ramp = Ramp::ExpSquared;
        c.schur.kernels = vec![KernelChoice::Region3 { z: -2 }, KernelChoice::RegionC1];
        c.stationary.theta0 = vec![std::f64::consts::PI / 3.0];
        let text = c.to_toml_string();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(c.hash(), Config::default().hash());
        assert_eq!(Config::default().hash().len(), 64);
        let moved = Config { output_dir: "elsewhere".into(), ..c.clone() };
        assert_eq!(moved.hash(), c.hash());
    }

    #[test]
    fn file_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 5\n[[schur.kernels]]\nkind = \"region3\"\nz = 1\n").unwrap();
        let c = load_config(Some(&p), &[]).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.schur.kernels, vec![KernelChoice::Region3 { z: 1 }]);
        assert!(load_config(Some(&dir.path().join("missing.toml")), &[]).is_err());
    }
}
