use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EstimateReport;
use crate::geometry::{critical_points, pre_collision, sphere_calculus, Frame, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryParams {
    pub trials: usize,
    pub gradient_tol: f64,
    pub hessian_tol: f64,
    pub conservation_tol: f64,
    /// Step of the finite-difference Hessian.
    pub fd_step: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams { trials: 1000, gradient_tol: 1e-9, hessian_tol: 1e-6, conservation_tol: 1e-12, fd_step: 1e-4 }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Gradient and Hessian of `ω ↦ (x̂·ω)(ξ̂·ω)` at `omega` by central
/// differences in geodesic normal coordinates `(s,t) ↦ exp_ω(s e_θ + t e_φ)`,
/// with `e_φ ∝ x × ω` and `e_θ = e_φ × ω`.
fn fd_calculus(x: Vec3, xi: Vec3, omega: Vec3, h: f64) -> Option<([f64; 2], [[f64; 2]; 2])> {
    let xh = x.normalized()?;
    let xih = xi.normalized()?;
    let e_phi = xh.cross(omega).normalized()?;
    let e_theta = e_phi.cross(omega);
    let sigma = |s: f64, t: f64| {
        let r = s.hypot(t);
        let w = if r == 0.0 { omega } else { omega * r.cos() + (e_theta * s + e_phi * t) * (r.sin() / r) };
        xh.dot(w) * xih.dot(w)
    };
    let f0 = sigma(0.0, 0.0);
    let (fp0, fm0) = (sigma(h, 0.0), sigma(-h, 0.0));
    let (f0p, f0m) = (sigma(0.0, h), sigma(0.0, -h));
    let grad = [(fp0 - fm0) / (2.0 * h), (f0p - f0m) / (2.0 * h)];
    let d_ss = (fp0 - 2.0 * f0 + fm0) / (h * h);
    let d_tt = (f0p - 2.0 * f0 + f0m) / (h * h);
    let d_st = (sigma(h, h) - sigma(h, -h) - sigma(-h, h) + sigma(-h, -h)) / (4.0 * h * h);
    Some((grad, [[d_ss, d_st], [d_st, d_tt]]))
}

fn max_dev(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub fn geometry_suite(seed: u64, n_trials: usize, params: &GeometryParams) -> EstimateReport {
    let mut rep = EstimateReport::new("geometry", seed);
    if n_trials == 0 {
        rep.push_check("trials", false, 0.0, 1.0, "n_trials must be at least 1".into());
        return rep;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad_max = 0.0f64;
    let mut grad_fd_max = 0.0f64;
    let mut hess_max = 0.0f64;
    let mut printed_max = 0.0f64;
    let mut involution = 0.0f64;
    let mut conservation = 0.0f64;
    let mut failures = 0usize;

    for _ in 0..n_trials {
        let x = random_unit(&mut rng) * rng.gen_range(0.1..100.0);
        let xi = random_unit(&mut rng) * rng.gen_range(0.1..100.0);
        let cp = match critical_points(x, xi) {
            Ok(c) if !c.degenerate => c,
            _ => {
                failures += 1;
                continue;
            }
        };
        let frame = match Frame::new(x) {
            Ok(f) => f,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let crit = [
            (cp.omega_plus, cp.hess_plus, [[-2.0, 0.0], [0.0, -2.0 * cp.sigma_plus]]),
            (cp.omega_minus, cp.hess_minus, [[-2.0, 0.0], [0.0, -2.0 * cp.sigma_minus]]),
        ];
        for (omega, hess, printed) in crit {
            let analytic = frame.angles(omega).and_then(|p| sphere_calculus(x, xi, p));
            let fd = fd_calculus(x, xi, omega, params.fd_step);
            match (analytic, fd, hess) {
                (Ok((g, _)), Some((gfd, hfd)), Some(h)) => {
                    grad_max = grad_max.max(g[0].hypot(g[1]));
                    grad_fd_max = grad_fd_max.max(gfd[0].hypot(gfd[1]));
                    hess_max = hess_max.max(max_dev(h, hfd));
                    printed_max = printed_max.max(max_dev(printed, hfd));
                }
                _ => failures += 1,
            }
        }

        let v = random_unit(&mut rng) * rng.gen_range(0.0..10.0);
        let vs = random_unit(&mut rng) * rng.gen_range(0.0..10.0);
        let omega = random_unit(&mut rng);
        match pre_collision(v, vs, omega).and_then(|(a, b)| Ok(((a, b), pre_collision(a, b, omega)?))) {
            Ok(((a, b), (c, d))) => {
                let scale = v.norm2() + vs.norm2() + 1.0;
                involution = involution.max(((c - v).norm() + (d - vs).norm()) / scale.sqrt());
                let mom = ((a + b) - (v + vs)).norm() / scale.sqrt();
                let energy = (a.norm2() + b.norm2() - v.norm2() - vs.norm2()).abs() / scale;
                conservation = conservation.max(mom.max(energy));
            }
            Err(_) => failures += 1,
        }
    }

    let cp = critical_points(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, -3.0));
    let colinear_ok = matches!(cp, Ok(c) if c.degenerate && c.hess_plus.is_none() && c.hess_minus.is_none());
    rep.push_check("colinear.degenerate", colinear_ok, 0.0, 0.0, String::new());
    rep.check_le("trial_failures", failures as f64, 0.0);
    rep.check_le("gradient.analytic", grad_max, params.gradient_tol);
    rep.check_le("gradient.finite_difference", grad_fd_max, params.gradient_tol.max(params.fd_step.powi(2)));
    rep.check_le("hessian.vs_finite_difference", hess_max, params.hessian_tol);
    rep.check_le("pre_collision.involution", involution, params.conservation_tol);
    rep.check_le("pre_collision.conservation", conservation, params.conservation_tol);
    rep.aggregate("gradient.max", grad_max);
    rep.aggregate("gradient.fd_max", grad_fd_max);
    rep.aggregate("hessian.max_deviation", hess_max);
    rep.aggregate("hessian.printed_minus_deviation", printed_max);
    rep.aggregate("trials", n_trials as f64);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let rep = geometry_suite(3, 100, &GeometryParams::default());
        assert!(rep.passed(), "{:?}", rep.failures());
        assert!((rep.aggregates["hessian.printed_minus_deviation"] - 4.0).abs() < 1e-5);
    }

    #[test]
    fn zero_trials_fail() {
        assert!(!geometry_suite(3, 0, &GeometryParams::default()).passed());
    }
}
