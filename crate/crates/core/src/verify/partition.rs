use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::EstimateReport;
use crate::geometry::Vec3;
use crate::partitions::{
    angular_partition, radial_partition, region_classify, s_bar, s_cut, zeta, Coarse, RadialKind, Ramp,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionParams {
    /// Transition function behind every partition.
    pub ramp: Ramp,
    /// Log-spaced radii for the telescoping check.
    pub radial_samples: usize,
    pub unity_tol: f64,
    pub cut_tol: f64,
    pub complement_samples: usize,
    pub angular_samples: usize,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams {
            ramp: Ramp::Exp,
            radial_samples: 200,
            unity_tol: 1e-10,
            cut_tol: 1e-12,
            complement_samples: 10_000,
            angular_samples: 1000,
        }
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp()).collect()
}

fn rho(k: i32, r: f64, ramp: Ramp) -> f64 {
    radial_partition(RadialKind::Rho, k, r, ramp).unwrap_or(f64::NAN)
}

pub fn partition_suite(params: &PartitionParams) -> EstimateReport {
    let ramp = params.ramp;
    let mut rep = EstimateReport::new("partition", 0);

    let radii = log_space(1e-3, 1e6, params.radial_samples);
    let mut unity = 0.0f64;
    let mut overlap = 0.0f64;
    let mut support = 0.0f64;
    for &r in &radii {
        let terms: Vec<f64> = (-40..=40).map(|k| rho(k, r, ramp)).collect();
        unity = unity.max((terms.iter().sum::<f64>() - 1.0).abs());
        for j in 0..terms.len() {
            for k in j + 2..terms.len() {
                overlap = overlap.max(terms[j] * terms[k]);
            }
        }
        let base = rho(0, r, ramp);
        if !(4.0 < r && r < 16.0) {
            support = support.max(base.abs());
        }
    }
    rep.check_le("radial.unity", unity, params.unity_tol);
    rep.check_le("radial.disjoint", overlap, 0.0);
    rep.check_le("radial.support", support, 0.0);

    let small = log_space(1e-6, 3.999_999, 200);
    let large = log_space(16.000_001, 1e6, 200);
    let mut below = 0.0f64;
    for &r in small.iter().chain(std::iter::once(&0.0)) {
        below = below.max((s_cut(r, ramp) - 1.0).abs());
    }
    let above = large.iter().map(|&r| s_cut(r, ramp).abs()).fold(0.0, f64::max);
    rep.check_le("s_cut.below_4", below, params.cut_tol);
    rep.check_le("s_cut.above_16", above, params.cut_tol);
    rep.check_le("s_cut.at_3.9", (s_cut(3.9, ramp) - 1.0).abs(), params.cut_tol);
    rep.check_le("s_cut.at_16.1", s_cut(16.1, ramp).abs(), params.cut_tol);

    let n = params.complement_samples.max(2);
    let mut complement = 0.0f64;
    let mut monotone = 0.0f64;
    let mut prev = s_cut(0.0, ramp);
    for i in 0..n {
        let r = 20.0 * i as f64 / (n - 1) as f64;
        let s = s_cut(r, ramp);
        complement = complement.max((s + s_bar(r, ramp) - 1.0).abs());
        monotone = monotone.max(s - prev);
        prev = s;
    }
    rep.check_le("s_cut.complement", complement, params.unity_tol);
    rep.check_le("s_cut.monotone", monotone, 0.0);

    let na = params.angular_samples.max(2);
    let mut ang = 0.0f64;
    for i in 0..na {
        let t = 1e-3 + (PI - 2e-3) * i as f64 / (na - 1) as f64;
        let s: f64 = (-40..=40).map(|z| zeta(z, t, ramp)).sum();
        ang = ang.max((s - 1.0).abs());
    }
    rep.check_le("angular.unity", ang, params.unity_tol);
    let x = Vec3::new(0.0, 0.0, 1.0);
    let xi = Vec3::new(1.0, 0.0, 0.0);
    let z0 = angular_partition(0, x, xi, ramp).unwrap_or(f64::NAN);
    rep.check_le("angular.zeta0_at_half_pi", (z0 - 1.0).abs(), params.cut_tol);

    let mut uncovered = 0usize;
    let mut total = 0usize;
    for &a in &log_space(1e-2, 1e4, 40) {
        for &b in &log_space(1e-2, 1e4, 40) {
            total += 1;
            let label = region_classify(Vec3::new(0.0, 0.0, a), Vec3::new(b * 0.6, 0.0, b * 0.8), ramp);
            let ok = match label {
                Ok(l) => coarse_consistent(l.coarse, a, b),
                Err(_) => false,
            };
            if !ok {
                uncovered += 1;
            }
        }
    }
    rep.check_le("region.coverage", uncovered as f64, 0.0);
    rep.aggregate("radial.max_unity_error", unity);
    rep.aggregate("angular.max_unity_error", ang);
    rep.aggregate("region.samples", total as f64);
    rep
}

/// Whether a coarse label is inside its support inequalities.
fn coarse_consistent(c: Coarse, nx: f64, nxi: f64) -> bool {
    let lam = nx * nxi;
    match c {
        Coarse::A => nx > 8.0 && nxi > 8.0,
        Coarse::B1 => lam > 64.0 && nx > 8.0 && nxi < 16.0,
        Coarse::B2 => lam > 64.0 && nx < 16.0,
        Coarse::C1 => lam < 512.0 && nx > 8.0,
        Coarse::C2 => lam < 512.0 && nx < 16.0,
    }
}
