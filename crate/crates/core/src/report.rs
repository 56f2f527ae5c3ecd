//! Report emission: JSON (schema `ERv1`), per-trial CSV and a markdown summary.
//!
//! Output is a pure function of the report, so equal reports give
//! byte-identical files. Every format carries the config hash and seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::verify::{EstimateReport, SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Md,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Json, Format::Csv, Format::Md];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Md => "md",
        }
    }

    pub fn parse(s: &str) -> Result<Format> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" => Ok(Format::Md),
            other => Err(Error::Parse(format!("unknown report format `{other}` (json | csv | md)"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 8] =
    ["trial", "gamma", "p", "q", "ratio_hom", "ratio_inhom", "ratio_LR", "refinement_delta"];

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "NaN".into()
    }
}

pub fn to_json(rep: &EstimateReport) -> String {
    let mut s = serde_json::to_string_pretty(rep).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<EstimateReport> {
    let rep: EstimateReport = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if rep.schema != SCHEMA {
        return Err(Error::Parse(format!("unsupported report schema `{}`", rep.schema)));
    }
    Ok(rep)
}

/// One row per trial record; aggregates follow as `#` comment lines.
pub fn to_csv(rep: &EstimateReport) -> String {
    let mut s = String::new();
    let m = &rep.metadata;
    let _ = writeln!(s, "# schema={},suite={},config_hash={},seed={}", rep.schema, m.suite, m.config_hash, m.seed);
    s.push_str(&CSV_COLUMNS.join(","));
    s.push('\n');
    for t in &rep.trials {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            t.trial,
            num(t.gamma),
            num(t.p),
            num(t.q),
            num(t.ratio_hom),
            num(t.ratio_inhom),
            num(t.ratio_lr),
            num(t.refinement_delta)
        );
    }
    for (k, v) in &rep.aggregates {
        let _ = writeln!(s, "# aggregate {k}={}", num(*v));
    }
    s
}

pub fn to_markdown(rep: &EstimateReport) -> String {
    let mut s = String::new();
    let m = &rep.metadata;
    let failed = rep.failures().len();
    let _ = writeln!(s, "# Report: {}\n", m.suite);
    let _ = writeln!(s, "- schema: {}", rep.schema);
    let _ = writeln!(s, "- seed: {}", m.seed);
    let _ = writeln!(s, "- config hash: `{}`", m.config_hash);
    if let Some(g) = m.grid {
        let _ = writeln!(s, "- grid: n={}, L={}, v* n={}", g.n, g.half_width, g.vstar_n);
    }
    let _ = writeln!(
        s,
        "- checks: {} total, {} failed\n- trials: {} records, {} skipped\n",
        rep.checks.len(),
        failed,
        rep.trials.len(),
        rep.skipped.len()
    );
    if !rep.checks.is_empty() {
        s.push_str("## Checks\n\n| check | status | value | limit |\n|---|---|---|---|\n");
        for c in &rep.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            let _ = writeln!(s, "| {} | {} | {} | {} |", c.name, status, num(c.value), num(c.limit));
        }
        s.push('\n');
    }
    if !rep.skipped.is_empty() {
        s.push_str("## Skipped trials\n\n");
        for k in &rep.skipped {
            let _ = writeln!(s, "- trial {}: {}", k.trial, k.reason);
        }
        s.push('\n');
    }
    if !rep.aggregates.is_empty() {
        s.push_str("## Aggregates\n\n| name | value |\n|---|---|\n");
        for (k, v) in &rep.aggregates {
            let _ = writeln!(s, "| {k} | {} |", num(*v));
        }
    }
    s
}

pub fn render(rep: &EstimateReport, format: Format) -> String {
    match format {
        Format::Json => to_json(rep),
        Format::Csv => to_csv(rep),
        Format::Md => to_markdown(rep),
    }
}

/// Writes `<dir>/<suite>.<ext>` and returns its path.
pub fn emit_report(rep: &EstimateReport, format: Format, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{}.{}", rep.suite(), format.extension()));
    std::fs::write(&path, render(rep, format)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}
