//! The oscillatory symbol
//! `a(x,ξ) = (|x||ξ|)^γ ∫_{S²₊} e^{−i(x·ω)(ξ·ω)} cosθ dΩ(ω)`
//! (hemisphere about `x`), by direct quadrature and by stationary phase.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{critical_points, Frame, Vec3};
use crate::partitions::{region_classify, stationary_measure, Coarse, Ramp, Zone};
use crate::quadrature::{pairwise_sum, SphereQuadrature};

/// Default constant `c` in the `c·√Λ` term of the node floor.
pub const DEFAULT_FLOOR_C: f64 = 4.0;
/// Default validity floor for the stationary-phase formula.
pub const DEFAULT_LAMBDA_MIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    Stationary,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolEval {
    pub value: Complex64,
    pub method: Method,
    pub lambda: f64,
    pub theta0: f64,
    pub est_error: Option<f64>,
}

/// Nodes per axis needed at frequency scale Λ: `max(32, ⌈c√Λ⌉, ⌈0.6Λ⌉ + 64)`.
///
/// The φ-integrand `e^{−iΛμ sinθ₀ sinθ cos(φ−φ₀)}` has amplitude up to Λ/2,
/// and the trapezoid rule needs more than that many nodes; the μ-rule has
/// the same oscillation count.
pub fn required_nodes(lambda: f64, c: f64) -> usize {
    let a = (c * lambda.sqrt()).ceil() as usize;
    let b = (0.6 * lambda).ceil() as usize + 64;
    32.max(a).max(b)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(())
}

fn check_nonzero(x: Vec3, xi: Vec3) -> Result<(f64, f64)> {
    let (nx, nxi) = (x.norm(), xi.norm());
    if nx == 0.0 || nxi == 0.0 || !x.is_finite() || !xi.is_finite() {
        return Err(Error::Domain("x and xi must be nonzero and finite".into()));
    }
    Ok((nx, nxi))
}

/// Direct product quadrature, refusing rules below the node floor.
pub fn symbol_direct(x: Vec3, xi: Vec3, gamma: f64, quad: &SphereQuadrature, floor_c: f64) -> Result<SymbolEval> {
    check_gamma(gamma)?;
    let (nx, nxi) = check_nonzero(x, xi)?;
    let lambda = nx * nxi;
    let required = required_nodes(lambda, floor_c);
    let have = quad.n_mu.min(quad.n_phi);
    if have < required {
        return Err(Error::Resolution { have, required });
    }
    let frame = Frame::new(x)?;
    let xl = frame.to_local(xi * (1.0 / nxi));
    let theta0 = xl.x.hypot(xl.y).atan2(xl.z);
    let (cos_phi, sin_phi): (Vec<f64>, Vec<f64>) = quad.phi.iter().map(|p| (p.cos(), p.sin())).unzip();

    let rows: Vec<Complex64> = (0..quad.n_mu)
        .into_par_iter()
        .map(|i| {
            let mu = quad.mu[i];
            let s = (1.0 - mu * mu).max(0.0).sqrt();
            let mut re = Vec::with_capacity(quad.n_phi);
            let mut im = Vec::with_capacity(quad.n_phi);
            for j in 0..quad.n_phi {
                let sigma = mu * (s * (xl.x * cos_phi[j] + xl.y * sin_phi[j]) + xl.z * mu);
                let (sn, cs) = (lambda * sigma).sin_cos();
                re.push(cs);
                im.push(-sn);
            }
            let w = quad.mu_weights[i] * quad.phi_weight * mu;
            Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) * w
        })
        .collect();
    let re: Vec<f64> = rows.iter().map(|z| z.re).collect();
    let im: Vec<f64> = rows.iter().map(|z| z.im).collect();
    let value = Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) * lambda.powf(gamma);
    Ok(SymbolEval { value, method: Method::Quadrature, lambda, theta0, est_error: None })
}

/// [`symbol_direct`] with the smallest admissible square rule.
pub fn symbol_direct_auto(x: Vec3, xi: Vec3, gamma: f64, floor_c: f64) -> Result<SymbolEval> {
    let (nx, nxi) = check_nonzero(x, xi)?;
    let n = required_nodes(nx * nxi, floor_c);
    let quad = SphereQuadrature::hemisphere(n, n)?;
    symbol_direct(x, xi, gamma, &quad, floor_c)
}

/// Which leading-order constants to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadingForm {
    /// `iπΛ^{γ−1}(e^{−iΛσ₊} − e^{−iΛσ₋})`, derived from the Hessians
    /// `diag(−2, −2σ₊)` and `diag(2, −2σ₋)`.
    Corrected,
    /// `Λ^{γ−1}(−2^{−3/2}iπ sin(θ₀/2) e^{−iΛσ₊} + 2^{−3/2}iπ cos(θ₀/2) e^{−iΛσ₋})`,
    /// kept for comparison only.
    Printed,
}

/// Two-critical-point leading term. Refuses when
/// `Λ sin²θ₀/4 < lambda_min` (including colinear input).
pub fn symbol_stationary(x: Vec3, xi: Vec3, gamma: f64, lambda_min: f64, form: LeadingForm) -> Result<SymbolEval> {
    check_gamma(gamma)?;
    let (nx, nxi) = check_nonzero(x, xi)?;
    let cp = critical_points(x, xi)?;
    if cp.degenerate {
        return Err(Error::Precondition("stationary phase needs non-colinear x and xi".into()));
    }
    let lambda = nx * nxi;
    let m = stationary_measure(x, xi)?;
    if m < lambda_min {
        return Err(Error::StationaryInvalid { value: m, floor: lambda_min });
    }
    let amp = lambda.powf(gamma - 1.0);
    let ep = Complex64::from_polar(1.0, -lambda * cp.sigma_plus);
    let em = Complex64::from_polar(1.0, -lambda * cp.sigma_minus);
    let i = Complex64::i();
    let value = match form {
        LeadingForm::Corrected => i * PI * amp * (ep - em),
        LeadingForm::Printed => {
            let c = 2f64.powf(-1.5) * PI * amp;
            let t = cp.theta0 / 2.0;
            -i * c * t.sin() * ep + i * c * t.cos() * em
        }
    };
    Ok(SymbolEval { value, method: Method::Stationary, lambda, theta0: cp.theta0, est_error: Some(amp / m) })
}

/// Closed form `2πΛ^{γ−1} sin(Λ/2) e^{−ix·ξ/2}`, valid for all nonzero x, ξ.
pub fn symbol_exact(x: Vec3, xi: Vec3, gamma: f64) -> Result<Complex64> {
    check_gamma(gamma)?;
    let (nx, nxi) = check_nonzero(x, xi)?;
    let lambda = nx * nxi;
    let half = 0.5 * lambda;
    let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    Ok(Complex64::from_polar(PI * lambda.powf(gamma) * sinc, -0.5 * x.dot(xi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolComparison {
    pub quad: SymbolEval,
    pub stat: SymbolEval,
    pub rel_err: f64,
}

/// `rel_err = |quad − stat| / max(|quad|, Λ^{γ−1})`.
pub fn symbol_compare(
    x: Vec3,
    xi: Vec3,
    gamma: f64,
    lambda_min: f64,
    form: LeadingForm,
    floor_c: f64,
) -> Result<SymbolComparison> {
    let stat = symbol_stationary(x, xi, gamma, lambda_min, form)?;
    let quad = symbol_direct_auto(x, xi, gamma, floor_c)?;
    let norm = quad.value.norm().max(quad.lambda.powf(gamma - 1.0));
    let rel_err = (quad.value - stat.value).norm() / norm;
    Ok(SymbolComparison { quad, stat, rel_err })
}

/// Pair `(x, ξ)` with `|x| = |ξ| = √Λ`, angle θ₀ and x along +z.
pub fn pair_at(lambda: f64, theta0: f64) -> (Vec3, Vec3) {
    let r = lambda.sqrt();
    (Vec3::new(0.0, 0.0, r), Vec3::new(theta0.sin(), 0.0, theta0.cos()) * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region3Row {
    pub lambda: f64,
    pub theta0: f64,
    pub re_a: f64,
    pub im_a: f64,
    pub abs_norm: f64,
    pub method: Method,
    pub cone: i32,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Draws a pair labelled (A, zone III) with dominant cone `z`.
fn sample_zone3(rng: &mut ChaCha8Rng, ramp: Ramp) -> (Vec3, Vec3, i32) {
    const CONES: [i32; 6] = [1, -1, 2, -2, 3, -3];
    loop {
        let z = CONES[rng.gen_range(0..CONES.len())];
        let k = z.abs();
        let lo = PI / 2f64.powi(k + 3);
        let hi = PI / 2f64.powi(k + 1);
        let t = (rng.gen_range(lo.ln()..hi.ln())).exp();
        let theta0 = if z > 0 { t } else { PI - t };
        let lam_max = 64.0 * 4f64.powi(k);
        let lambda = rng.gen_range(64f64.ln()..lam_max.ln()).exp();
        let split: f64 = rng.gen_range(-0.5..0.5) * (lambda / 64.0).ln();
        let nx = lambda.sqrt() * split.exp();
        let nxi = lambda / nx;
        let xh = random_unit(rng);
        let frame = match Frame::new(xh) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let az: f64 = rng.gen_range(0.0..2.0 * PI);
        let dir = frame.to_world(Vec3::new(theta0.sin() * az.cos(), theta0.sin() * az.sin(), theta0.cos()));
        let (x, xi) = (xh * nx, dir * nxi);
        if let Ok(label) = region_classify(x, xi, ramp) {
            if label.coarse == Coarse::A && label.zone == Some(Zone::III) {
                return (x, xi, label.cone.unwrap_or(z));
            }
        }
    }
}

/// Samples `n` zone-III points and evaluates `|a|·Λ^{1/2}` by quadrature.
/// Rows are in sample order and depend only on the seed.
pub fn region3_scan(seed: u64, n: usize, gamma: f64, ramp: Ramp, floor_c: f64) -> Result<Vec<Region3Row>> {
    if n == 0 {
        return Err(Error::Precondition("region3_scan needs n >= 1".into()));
    }
    check_gamma(gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Vec3, Vec3, i32)> = (0..n).map(|_| sample_zone3(&mut rng, ramp)).collect();
    pairs
        .into_iter()
        .map(|(x, xi, cone)| {
            let e = symbol_direct_auto(x, xi, gamma, floor_c)?;
            Ok(Region3Row {
                lambda: e.lambda,
                theta0: e.theta0,
                re_a: e.value.re,
                im_a: e.value.im,
                abs_norm: e.value.norm() * e.lambda.sqrt(),
                method: e.method,
                cone,
            })
        })
        .collect()
}

/// CSV with columns `lambda,theta0,re_a,im_a,abs_norm,method`.
pub fn region3_csv(rows: &[Region3Row]) -> String {
    let mut s = String::from("lambda,theta0,re_a,im_a,abs_norm,method\n");
    for r in rows {
        writeln!(s, "{:e},{:e},{:e},{:e},{:e},{}", r.lambda, r.theta0, r.re_a, r.im_a, r.abs_norm, r.method.as_str())
            .ok();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre_on;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn small_phase_limit_is_pi() {
        let e = symbol_direct_auto(Vec3::new(0.0, 0.0, 1e-9), Vec3::new(0.3, 0.1, 0.5), 0.0, 4.0).unwrap();
        assert!(close(e.value, Complex64::new(PI, 0.0), 1e-9));
    }

    #[test]
    fn colinear_closed_form() {
        let e = symbol_direct_auto(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 1.0), 1.0, 4.0).unwrap();
        let i = Complex64::i();
        let exact = PI * (Complex64::new(1.0, 0.0) - (-i).exp()) / i;
        assert!(close(e.value, exact, 1e-12));
        // Independent 1D oracle: 2π ∫₀¹ μ e^{−iμ²} dμ.
        let (m, w) = gauss_legendre_on(64, 0.0, 1.0);
        let oracle: Complex64 =
            m.iter().zip(&w).map(|(mu, wt)| Complex64::from_polar(2.0 * PI * mu * wt, -mu * mu)).sum();
        assert!(close(oracle, exact, 1e-13));
    }

    #[test]
    fn refusal_below_floor() {
        let q = SphereQuadrature::hemisphere(64, 64).unwrap();
        let (x, xi) = pair_at(400.0, PI / 2.0);
        match symbol_direct(x, xi, 1.0, &q, 4.0) {
            Err(Error::Resolution { have, required }) => {
                assert_eq!(have, 64);
                assert_eq!(required, required_nodes(400.0, 4.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for &(lam, th) in &[(100.0, PI / 2.0), (400.0, PI / 3.0), (1000.0, 0.4), (37.0, 2.9)] {
            let (x, xi) = pair_at(lam, th);
            for gamma in [0.0, 0.5, 1.0] {
                let q = symbol_direct_auto(x, xi, gamma, 4.0).unwrap();
                let e = symbol_exact(x, xi, gamma).unwrap();
                let scale = lam.powf(gamma - 1.0);
                assert!((q.value - e).norm() < 1e-10 * scale.max(1.0), "lam={lam} th={th}");
            }
        }
    }

    #[test]
    fn doubling_nodes_is_stable() {
        let (x, xi) = pair_at(1000.0, 1.1);
        let n = required_nodes(1000.0, 4.0);
        let a = symbol_direct(x, xi, 1.0, &SphereQuadrature::hemisphere(n, n).unwrap(), 4.0).unwrap();
        let b = symbol_direct(x, xi, 1.0, &SphereQuadrature::hemisphere(2 * n, 2 * n).unwrap(), 4.0).unwrap();
        assert!((a.value - b.value).norm() < 1e-8);
    }

    #[test]
    fn stationary_examples() {
        let (x, xi) = pair_at(1e4, PI / 3.0);
        let s = symbol_stationary(x, xi, 0.0, 10.0, LeadingForm::Corrected).unwrap();
        assert!(s.value.norm() <= 2.0 * PI * 1e-4 + 1e-15);
        let p = symbol_stationary(x, xi, 1.0, 10.0, LeadingForm::Printed).unwrap();
        assert!(p.value.norm() <= 1.518);
        let (x, xi) = pair_at(400.0, PI / 2.0);
        let p = symbol_stationary(x, xi, 1.0, 10.0, LeadingForm::Printed).unwrap();
        // printed constants reduce to −(π/2) sin(Λ/2) at θ₀ = π/2
        let expect = -(PI / 2.0) * 200f64.sin();
        assert!((p.value.re - expect).abs() < 1e-12 && p.value.im.abs() < 1e-12);
        let c = symbol_stationary(x, xi, 1.0, 10.0, LeadingForm::Corrected).unwrap();
        let e = symbol_exact(x, xi, 1.0).unwrap();
        assert!((c.value - e).norm() < 1e-10);
        let (x, xi) = pair_at(20.0, 0.3);
        assert!(matches!(
            symbol_stationary(x, xi, 1.0, 10.0, LeadingForm::Corrected),
            Err(Error::StationaryInvalid { .. })
        ));
        let z = Vec3::new(0.0, 0.0, 30.0);
        assert!(symbol_stationary(z, z, 1.0, 10.0, LeadingForm::Corrected).is_err());
    }

    #[test]
    fn compare_is_small_with_corrected_constants() {
        let (x, xi) = pair_at(400.0, PI / 2.0);
        let c = symbol_compare(x, xi, 1.0, 10.0, LeadingForm::Corrected, 4.0).unwrap();
        assert!(c.rel_err < 1e-10);
        let z = Vec3::new(0.0, 0.0, 30.0);
        assert!(symbol_compare(z, z * 2.0, 1.0, 10.0, LeadingForm::Corrected, 4.0).is_err());
    }

    #[test]
    fn scan_is_deterministic_and_in_zone_three() {
        let a = region3_scan(7, 1, 1.0, Ramp::Exp, 4.0).unwrap();
        assert_eq!(a.len(), 1);
        assert!(a[0].abs_norm.is_finite());
        let b = region3_scan(7, 4, 0.0, Ramp::Exp, 4.0).unwrap();
        let c = region3_scan(7, 4, 0.0, Ramp::Exp, 4.0).unwrap();
        assert_eq!(b, c);
        assert!(b.iter().all(|r| r.lambda > 64.0));
        assert!(region3_scan(7, 0, 0.0, Ramp::Exp, 4.0).is_err());
        let csv = region3_csv(&b);
        assert!(csv.starts_with("lambda,theta0,re_a,im_a,abs_norm,method\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
