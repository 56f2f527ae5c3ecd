use serde::{Deserialize, Serialize};

use super::{tag, EstimateReport, QuadratureParams, Skip};
use crate::partitions::Ramp;
use crate::quadrature::linear_fit;
use crate::symbol::region3_scan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Region3Params {
    pub samples: usize,
    pub gammas: Vec<f64>,
    pub slope_max: f64,
}

impl Default for Region3Params {
    fn default() -> Self {
        Region3Params { samples: 500, gammas: vec![0.0, 1.0], slope_max: 0.1 }
    }
}

/// Regression of `log(|a|Λ^{1/2})` on `log Λ` over sampled zone-III points.
pub fn region3_suite(seed: u64, params: &Region3Params, quad: &QuadratureParams, ramp: Ramp) -> EstimateReport {
    let mut rep = EstimateReport::new("region3", seed);
    for &gamma in &params.gammas {
        let key = format!("gamma={}", tag(gamma));
        let rows = match region3_scan(seed, params.samples, gamma, ramp, quad.symbol_floor_c) {
            Ok(r) => r,
            Err(e) => {
                rep.skipped.push(Skip { trial: 0, reason: format!("{key}: {e}") });
                rep.push_check(format!("slope.{key}"), false, f64::NAN, params.slope_max, e.to_string());
                continue;
            }
        };
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.abs_norm > 0.0).map(|r| (r.lambda.ln(), r.abs_norm.ln())).unzip();
        let slope = linear_fit(&xs, &ys).map(|(s, _)| s).unwrap_or(f64::NAN);
        let max_norm = rows.iter().map(|r| r.abs_norm).fold(0.0, f64::max);
        rep.aggregate(format!("points.{key}"), xs.len() as f64);
        rep.aggregate(format!("max_abs_norm.{key}"), max_norm);
        rep.aggregate(format!("slope.{key}"), slope);
        rep.check_le(format!("slope.{key}"), slope, params.slope_max);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_tracks_gamma_minus_half() {
        let p = Region3Params { samples: 60, gammas: vec![0.0, 1.0], slope_max: 0.1 };
        let rep = region3_suite(5, &p, &QuadratureParams::default(), Ramp::Exp);
        let s0 = rep.aggregates["slope.gamma=0"];
        let s1 = rep.aggregates["slope.gamma=1"];
        assert!((s1 - s0 - 1.0).abs() < 1e-6);
        assert!(rep.find("slope.gamma=0").unwrap().passed);
    }
}
