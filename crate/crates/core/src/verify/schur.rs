//! Schur test on radial–radial discretizations of the kernel bounds.
//!
//! A bound `|K(x,ξ)| ≤ k(|x|,|ξ|, angle)` is integrated over the angle to a
//! radial kernel `K(r,s)` acting on radial functions, discretized on
//! log-spaced midpoints with weights `r²dr`. For the matrix
//! `A_ij = √w_i K(r_i,s_j) √w_j` and positive test functions `p` (x side),
//! `q` (ξ side),
//!
//! `ω = max_i Σ_j K_ij w_j q_j / p_i`, `β = max_j Σ_i K_ij w_i p_i / q_j`,
//!
//! and the discrete Schur test gives `‖A‖ ≤ √(ωβ)`. The largest singular
//! value comes from power iteration on `AᵀA`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::EstimateReport;
use crate::partitions::{zeta, zone_for_cone, Ramp, Zone};
use crate::quadrature::gauss_legendre_on;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelChoice {
    /// `χ_{C,1}`: `|x||ξ| < 512`, `|x| > 8`, with `p = (1+|x|)^{−1}`, `q = |ξ|^{−2}`.
    RegionC1,
    /// `χ_{C,2}`: `|x||ξ| < 512`, `|x| < 16`, with `p = |x|^{−1}`, `q = (1+|ξ|)^{−2}`.
    RegionC2,
    /// `χ_{z,III} ζ_z (|x||ξ|)^{−1/2}` with `p = |x|^{−3/2}`, `q = |ξ|^{−3/2}`.
    Region3 {
        z: i32,
    },
    Zero,
}

impl KernelChoice {
    pub fn name(&self) -> String {
        match self {
            KernelChoice::RegionC1 => "region_c1".into(),
            KernelChoice::RegionC2 => "region_c2".into(),
            KernelChoice::Region3 { z } => format!("region3_z{z}"),
            KernelChoice::Zero => "zero".into(),
        }
    }

    /// Radial ranges `(x_lo, x_hi, ξ_lo, ξ_hi)`.
    fn ranges(&self) -> (f64, f64, f64, f64) {
        match self {
            KernelChoice::RegionC1 => (8.0, 4096.0, 1.0 / 128.0, 64.0),
            KernelChoice::RegionC2 => (1.0 / 64.0, 16.0, 1.0 / 64.0, 512.0 * 64.0),
            KernelChoice::Region3 { z } => {
                let hi = 64.0 * 4f64.powi(z.abs());
                (8.0, hi, 8.0, hi)
            }
            KernelChoice::Zero => (1.0, 2.0, 1.0, 2.0),
        }
    }

    fn p(&self, r: f64) -> f64 {
        match self {
            KernelChoice::RegionC1 => 1.0 / (1.0 + r),
            KernelChoice::RegionC2 => 1.0 / r,
            KernelChoice::Region3 { .. } => r.powf(-1.5),
            KernelChoice::Zero => 1.0,
        }
    }

    fn q(&self, s: f64) -> f64 {
        match self {
            KernelChoice::RegionC1 => s.powi(-2),
            KernelChoice::RegionC2 => (1.0 + s).powi(-2),
            KernelChoice::Region3 { .. } => s.powf(-1.5),
            KernelChoice::Zero => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchurParams {
    pub kernels: Vec<KernelChoice>,
    pub n_radial: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub iter_tol: f64,
}

impl Default for SchurParams {
    fn default() -> Self {
        SchurParams {
            kernels: vec![
                KernelChoice::RegionC1,
                KernelChoice::RegionC2,
                KernelChoice::Region3 { z: 1 },
                KernelChoice::Region3 { z: -1 },
                KernelChoice::Region3 { z: 2 },
                KernelChoice::Zero,
            ],
            n_radial: 240,
            tol: 1e-6,
            max_iter: 20_000,
            iter_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurOutcome {
    pub omega: f64,
    pub beta: f64,
    pub bound: f64,
    pub singular_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn log_midpoints(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (lo.ln(), hi.ln());
    let d = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let r = (a + (i as f64 + 0.5) * d).exp();
            (r, r.powi(3) * d)
        })
        .unzip()
}

/// `∫_{S²} ζ_z(angle) dΩ`.
fn cone_mass(z: i32, ramp: Ramp) -> f64 {
    let mut total = 0.0;
    for k in 0..64 {
        let (a, b) = (PI * k as f64 / 64.0, PI * (k + 1) as f64 / 64.0);
        let (t, w) = gauss_legendre_on(16, a, b);
        for (t, w) in t.iter().zip(&w) {
            total += w * zeta(z, *t, ramp) * t.sin();
        }
    }
    2.0 * PI * total
}

fn kernel_matrix(choice: KernelChoice, xs: &[f64], ss: &[f64], ramp: Ramp) -> Vec<Vec<f64>> {
    let mass = match choice {
        KernelChoice::Region3 { z } => cone_mass(z, ramp),
        _ => 4.0 * PI,
    };
    xs.iter()
        .map(|&r| {
            ss.iter()
                .map(|&s| {
                    let lam = r * s;
                    match choice {
                        KernelChoice::RegionC1 => {
                            if lam < 512.0 && r > 8.0 {
                                mass
                            } else {
                                0.0
                            }
                        }
                        KernelChoice::RegionC2 => {
                            if lam < 512.0 && r < 16.0 {
                                mass
                            } else {
                                0.0
                            }
                        }
                        KernelChoice::Region3 { z } => {
                            if r > 8.0 && s > 8.0 && zone_for_cone(z, r, s) == Zone::III {
                                mass / lam.sqrt()
                            } else {
                                0.0
                            }
                        }
                        KernelChoice::Zero => 0.0,
                    }
                })
                .collect()
        })
        .collect()
}

/// Schur constants and largest singular value for one kernel bound.
pub fn schur_test(choice: KernelChoice, params: &SchurParams, ramp: Ramp) -> SchurOutcome {
    let n = params.n_radial.max(2);
    let (xlo, xhi, slo, shi) = choice.ranges();
    let (xs, wx) = log_midpoints(xlo, xhi, n);
    let (ss, ws) = log_midpoints(slo, shi, n);
    let k = kernel_matrix(choice, &xs, &ss, ramp);

    let mut omega = 0.0f64;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| k[i][j] * ws[j] * choice.q(ss[j])).sum();
        omega = omega.max(row / choice.p(xs[i]));
    }
    let mut beta = 0.0f64;
    for j in 0..n {
        let col: f64 = (0..n).map(|i| k[i][j] * wx[i] * choice.p(xs[i])).sum();
        beta = beta.max(col / choice.q(ss[j]));
    }

    let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| wx[i].sqrt() * k[i][j] * ws[j].sqrt()).collect()).collect();
    let (singular_value, iterations, converged) = top_singular_value(&a, params.max_iter, params.iter_tol);
    SchurOutcome { omega, beta, bound: (omega * beta).sqrt(), singular_value, iterations, converged }
}

fn top_singular_value(a: &[Vec<f64>], max_iter: usize, tol: f64) -> (f64, usize, bool) {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut sigma = 0.0;
    for it in 1..=max_iter {
        let av: Vec<f64> = (0..m).map(|i| a[i].iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        let next = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        if next == 0.0 {
            return (0.0, it, true);
        }
        let mut w = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                w[j] += a[i][j] * av[i];
            }
        }
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (vj, wj) in v.iter_mut().zip(&w) {
            *vj = wj / wn;
        }
        if (next - sigma).abs() <= tol * next {
            return (next, it, true);
        }
        sigma = next;
    }
    (sigma, max_iter, false)
}

pub fn schur_suite(params: &SchurParams, ramp: Ramp) -> EstimateReport {
    let mut rep = EstimateReport::new("schur", 0);
    for &choice in &params.kernels {
        let name = choice.name();
        let out = schur_test(choice, params, ramp);
        rep.aggregate(format!("{name}.omega"), out.omega);
        rep.aggregate(format!("{name}.beta"), out.beta);
        rep.aggregate(format!("{name}.bound"), out.bound);
        rep.aggregate(format!("{name}.singular_value"), out.singular_value);
        rep.aggregate(format!("{name}.iterations"), out.iterations as f64);
        rep.push_check(
            format!("{name}.power_iteration"),
            out.converged,
            out.iterations as f64,
            params.max_iter as f64,
            String::new(),
        );
        rep.check_le(format!("{name}.sigma_le_bound"), out.singular_value, out.bound * (1.0 + params.tol));
        if choice != KernelChoice::Zero {
            let finite = out.omega.is_finite() && out.beta.is_finite() && out.omega > 0.0 && out.beta > 0.0;
            rep.push_check(format!("{name}.constants_finite"), finite, out.bound, f64::INFINITY, String::new());
        }
    }
    rep
}
