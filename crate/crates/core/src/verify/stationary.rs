use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{tag, EstimateReport, QuadratureParams};
use crate::geometry::Vec3;
use crate::quadrature::linear_fit;
use crate::symbol::{pair_at, symbol_compare, symbol_direct_auto, LeadingForm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryParams {
    pub gammas: Vec<f64>,
    pub theta0: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub slope_min: f64,
    pub slope_max: f64,
    pub colinear_tol: f64,
}

impl Default for StationaryParams {
    fn default() -> Self {
        StationaryParams {
            gammas: vec![0.0, 1.0],
            theta0: vec![PI / 3.0, PI / 2.0],
            lambdas: vec![1e2, 1e3, 1e4],
            slope_min: -1.3,
            slope_max: -0.7,
            colinear_tol: 1e-8,
        }
    }
}

/// Fits `log rel_err` against `log Λ` for each `(γ, θ₀)` and asserts the
/// slope window with the corrected leading form. The printed form is
/// reported alongside as aggregates only.
pub fn stationary_decay_suite(params: &StationaryParams, quad: &QuadratureParams) -> EstimateReport {
    let mut rep = EstimateReport::new("stationary", 0);
    for &gamma in &params.gammas {
        for &theta0 in &params.theta0 {
            for form in [LeadingForm::Corrected, LeadingForm::Printed] {
                let label = match form {
                    LeadingForm::Corrected => "corrected",
                    LeadingForm::Printed => "printed",
                };
                let key = format!("gamma={}.theta0={}.{label}", tag(gamma), tag(theta0));
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for &lambda in &params.lambdas {
                    let (x, xi) = pair_at(lambda, theta0);
                    match symbol_compare(x, xi, gamma, quad.lambda_min, form, quad.symbol_floor_c) {
                        Ok(c) => {
                            rep.aggregate(format!("rel_err.{key}.lambda={}", tag(lambda)), c.rel_err);
                            if c.rel_err > 0.0 {
                                xs.push(lambda.ln());
                                ys.push(c.rel_err.ln());
                            }
                        }
                        Err(e) => {
                            rep.aggregate(format!("skipped.{key}.lambda={}", tag(lambda)), 1.0);
                            rep.skipped.push(super::Skip { trial: 0, reason: format!("{key} Λ={lambda}: {e}") });
                        }
                    }
                }
                let slope =
                    if xs.len() >= 2 { linear_fit(&xs, &ys).map(|(s, _)| s).unwrap_or(f64::NAN) } else { f64::NAN };
                rep.aggregate(format!("slope.{key}"), slope);
                if form == LeadingForm::Corrected {
                    rep.check_range(format!("slope.{key}"), slope, params.slope_min, params.slope_max);
                }
            }
        }
    }

    let e3 = Vec3::new(0.0, 0.0, 1.0);
    let expected = Complex64::new(PI, 0.0) * (Complex64::new(1.0, 0.0) - Complex64::new(0.0, -1.0).exp())
        / Complex64::new(0.0, 1.0);
    let err = match symbol_direct_auto(e3, e3, 1.0, quad.symbol_floor_c) {
        Ok(e) => (e.value - expected).norm(),
        Err(_) => f64::NAN,
    };
    rep.check_le("colinear.closed_form", err, params.colinear_tol);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colinear_closed_form_passes() {
        let p = StationaryParams { lambdas: vec![1e2, 1e3], ..Default::default() };
        let rep = stationary_decay_suite(&p, &QuadratureParams::default());
        assert!(rep.find("colinear.closed_form").unwrap().passed);
        assert!(rep.aggregates.contains_key("slope.gamma=1.theta0=1.570796.printed"));
    }

    #[test]
    fn corrected_form_error_is_roundoff() {
        let p = StationaryParams { lambdas: vec![1e2, 1e3], ..Default::default() };
        let rep = stationary_decay_suite(&p, &QuadratureParams::default());
        for (k, v) in &rep.aggregates {
            if k.starts_with("rel_err.") && k.contains("corrected") {
                assert!(*v < 1e-9, "{k} = {v}");
            }
        }
    }
}
