//! Quadrature rules and order-deterministic summation.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
///
/// Newton iteration on the three-term recurrence; accurate to a few ulps for
/// the node counts used here (up to ~10⁴).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root.
        let k = i as f64 + 1.0;
        let theta = PI * (k - 0.25) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (pn, pn1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
    let d = n as f64 * (x * pn - pn1) / (x * x - 1.0);
    (pn, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|t| half * t).collect())
}

/// Product rule on the hemisphere S²₊ = {θ ∈ [0, π/2]}: Gauss–Legendre in
/// μ = cosθ on `[0, 1]` times the periodic trapezoid rule in φ.
///
/// Weights integrate `dΩ = dμ dφ`; they sum to 2π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub n_mu: usize,
    pub n_phi: usize,
    pub mu: Vec<f64>,
    pub mu_weights: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_weight: f64,
}

impl SphereQuadrature {
    pub fn hemisphere(n_mu: usize, n_phi: usize) -> Result<Self> {
        if n_mu == 0 || n_phi == 0 {
            return Err(Error::Precondition("sphere quadrature needs at least one node per axis".into()));
        }
        let (mu, mu_weights) = gauss_legendre_on(n_mu, 0.0, 1.0);
        let phi = (0..n_phi).map(|j| TAU * j as f64 / n_phi as f64).collect();
        Ok(SphereQuadrature { n_mu, n_phi, mu, mu_weights, phi, phi_weight: TAU / n_phi as f64 })
    }

    pub fn len(&self) -> usize {
        self.n_mu * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened nodes in the local frame: `(unit vector, μ, weight)`.
    /// The polar axis is local +z.
    pub fn local_nodes(&self) -> Vec<HemiNode> {
        let mut out = Vec::with_capacity(self.len());
        for (i, &mu) in self.mu.iter().enumerate() {
            let s = (1.0 - mu * mu).max(0.0).sqrt();
            for &phi in &self.phi {
                let (sp, cp) = phi.sin_cos();
                out.push(HemiNode { a: s * cp, b: s * sp, mu, weight: self.mu_weights[i] * self.phi_weight });
            }
        }
        out
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.local_nodes().iter().map(|n| n.weight).collect::<Vec<_>>())
    }
}

/// One node of a hemisphere rule: ω = a·e1 + b·e2 + μ·e3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HemiNode {
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub weight: f64,
}

/// Pairwise (cascade) summation in a fixed order.
///
/// The result depends only on the slice contents and order, never on how
/// the values were produced, so parallel producers that collect into an
/// ordered buffer give bit-identical totals.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        s
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let sxy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let sxx: Vec<f64> = x.iter().map(|a| (a - mx) * (a - mx)).collect();
    let den = pairwise_sum(&sxx);
    if den == 0.0 {
        return None;
    }
    let slope = pairwise_sum(&sxy) / den;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1usize, 2, 5, 16, 33, 128] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n} total={total}");
            // Exact through degree 2n-1.
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(deg as i32) * b).sum();
            assert!((got - exact).abs() < 1e-12, "n={n}");
            let even = 2 * (n - 1);
            let exact = 2.0 / (even as f64 + 1.0);
            let got: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(even as i32) * b).sum();
            assert!((got - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn large_rule_is_sorted_and_positive() {
        let (x, w) = gauss_legendre(4001);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(w.iter().all(|&v| v > 0.0));
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        // ∫ cos(50x) = 2 sin(50)/50
        let got: f64 = x.iter().zip(&w).map(|(a, b)| (50.0 * a).cos() * b).sum();
        assert!((got - 2.0 * 50f64.sin() / 50.0).abs() < 1e-13);
    }

    #[test]
    fn hemisphere_area_and_cosine_moment() {
        let q = SphereQuadrature::hemisphere(16, 16).unwrap();
        assert!((q.total_weight() - TAU).abs() < 1e-12);
        let m: f64 = q.local_nodes().iter().map(|n| n.mu * n.weight).sum();
        assert!((m - PI).abs() < 1e-12);
        assert!(SphereQuadrature::hemisphere(0, 4).is_err());
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, b) = linear_fit(&x, &y).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }
}
