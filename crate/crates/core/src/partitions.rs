//! Smooth dyadic partitions of unity and the phase-space region classifier.
//!
//! All families are generated from a single smooth step ψ. The radial step
//! has knots (8, 16), which makes ρ(r) = ψ(r) − ψ(2r) supported in (4, 16);
//! the angular step has knots (π/4, π/2), which makes ζ(θ) = ψ(θ) − ψ(2θ)
//! supported in (π/8, π/2).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, Vec3};

/// Shape of the C^∞ transition used by every partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ramp {
    /// Built from `e^{-1/t}`.
    #[default]
    Exp,
    /// Built from `e^{-1/t²}`; flatter at the knots.
    ExpSquared,
}

impl Ramp {
    #[inline]
    fn flat(self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            match self {
                Ramp::Exp => (-1.0 / t).exp(),
                Ramp::ExpSquared => (-1.0 / (t * t)).exp(),
            }
        }
    }

    /// Smooth step equal to 1 for `t ≤ 0` and 0 for `t ≥ 1`.
    #[inline]
    pub fn step_down(self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            let a = self.flat(1.0 - t);
            let b = self.flat(t);
            a / (a + b)
        }
    }

    pub fn parse(s: &str) -> Result<Ramp> {
        match s {
            "exp" => Ok(Ramp::Exp),
            "exp_squared" => Ok(Ramp::ExpSquared),
            other => Err(Error::Parse(format!("unknown ramp `{other}` (expected exp | exp_squared)"))),
        }
    }
}

/// ψ with knots `(lower, upper)` and its dyadic difference ρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpChain {
    pub ramp: Ramp,
    pub lower: f64,
    pub upper: f64,
}

impl BumpChain {
    pub fn radial(ramp: Ramp) -> Self {
        BumpChain { ramp, lower: 8.0, upper: 16.0 }
    }

    pub fn angular(ramp: Ramp) -> Self {
        BumpChain { ramp, lower: FRAC_PI_4, upper: FRAC_PI_2 }
    }

    #[inline]
    pub fn psi(&self, r: f64) -> f64 {
        self.ramp.step_down((r - self.lower) / (self.upper - self.lower))
    }

    #[inline]
    pub fn rho(&self, r: f64) -> f64 {
        self.psi(r) - self.psi(2.0 * r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialKind {
    /// ρ(2⁻ᵏ r)
    Rho,
    /// χ_k(x) = ρ(2⁻ᵏ|x|), evaluated at r = |x|
    ChiK,
    /// small relative velocity cutoff 𝕤
    SCut,
    /// large relative velocity cutoff 𝕤̄ = 1 − 𝕤
    SBar,
}

/// Evaluates the radial partition functions. `k` is ignored for the cutoffs.
pub fn radial_partition(kind: RadialKind, k: i32, r: f64, ramp: Ramp) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!("radius must be finite and nonnegative, got {r}")));
    }
    let chain = BumpChain::radial(ramp);
    Ok(match kind {
        RadialKind::Rho | RadialKind::ChiK => chain.rho(r * 2f64.powi(-k)),
        RadialKind::SCut => s_cut(r, ramp),
        RadialKind::SBar => s_bar(r, ramp),
    })
}

/// 𝕤(r) = Σ_{k≤0} ρ(2⁻ᵏ r), which telescopes to ψ(r). Equal to 1 on [0, 8].
#[inline]
pub fn s_cut(r: f64, ramp: Ramp) -> f64 {
    BumpChain::radial(ramp).psi(r)
}

#[inline]
pub fn s_bar(r: f64, ramp: Ramp) -> f64 {
    1.0 - s_cut(r, ramp)
}

/// ζ_z(θ₀) for θ₀ ∈ (0, π).
pub fn zeta(z: i32, theta0: f64, ramp: Ramp) -> f64 {
    let chain = BumpChain::angular(ramp);
    if z == 0 {
        let t = if theta0 <= FRAC_PI_2 { theta0 } else { PI - theta0 };
        1.0 - chain.psi(2.0 * t)
    } else if z > 0 {
        chain.rho(theta0 * 2f64.powi(z))
    } else {
        chain.rho((PI - theta0) * 2f64.powi(-z))
    }
}

/// ζ_z evaluated at the angle between `x` and `xi`.
pub fn angular_partition(z: i32, x: Vec3, xi: Vec3, ramp: Ramp) -> Result<f64> {
    Ok(zeta(z, pair_angle(x, xi)?, ramp))
}

fn pair_angle(x: Vec3, xi: Vec3) -> Result<f64> {
    if x.norm() == 0.0 || xi.norm() == 0.0 || !x.is_finite() || !xi.is_finite() {
        return Err(Error::Domain("x and xi must be nonzero".into()));
    }
    Ok(angle_between(x, xi))
}

/// Index of the dominant cone: argmax of ζ_z(θ₀); ties go to the smaller
/// |z|, then to the positive index.
pub fn dominant_cone(theta0: f64, ramp: Ramp) -> i32 {
    let mut best = (0, zeta(0, theta0, ramp));
    for n in 1..=64 {
        for z in [n, -n] {
            let v = zeta(z, theta0, ramp);
            if v > best.1 {
                best = (z, v);
            }
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coarse {
    A,
    B1,
    B2,
    C1,
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub coarse: Coarse,
    pub cone: Option<i32>,
    pub zone: Option<Zone>,
}

/// Classifies `(x, ξ)` by the support inequalities of the dyadic phase-space
/// partition. Overlapping supports resolve in the order A, B1, B2, C1, C2,
/// and within A in the order I, II, III.
pub fn region_classify(x: Vec3, xi: Vec3, ramp: Ramp) -> Result<RegionLabel> {
    let theta0 = pair_angle(x, xi)?;
    let nx = x.norm();
    let nxi = xi.norm();
    let lam = nx * nxi;

    let coarse = if nx > 8.0 && nxi > 8.0 {
        Coarse::A
    } else if lam > 64.0 && nx > 8.0 && nxi < 16.0 {
        Coarse::B1
    } else if lam > 64.0 && nx < 16.0 {
        Coarse::B2
    } else if lam < 512.0 && nx > 8.0 {
        Coarse::C1
    } else {
        Coarse::C2
    };

    let z = dominant_cone(theta0, ramp);
    let zone = (coarse == Coarse::A).then(|| zone_for_cone(z, nx, nxi));
    Ok(RegionLabel { coarse, cone: Some(z), zone })
}

/// Zone of a label-A pair in cone `z`, from `|x|` and `|ξ|`.
pub fn zone_for_cone(z: i32, nx: f64, nxi: f64) -> Zone {
    if z == 0 {
        return Zone::I;
    }
    let scale = 2f64.powi(z.abs());
    let lam = nx * nxi;
    if nx > 8.0 * scale && nxi > 8.0 * scale {
        Zone::I
    } else if lam > 64.0 * scale * scale && ((8.0 < nxi && nxi < 32.0 * scale) || (8.0 < nx && nx < 32.0 * scale)) {
        Zone::II
    } else {
        Zone::III
    }
}

/// Λ cos²(θ₀/2) sin²(θ₀/2) = Λ sin²θ₀ / 4, the quantity separating zones I/II
/// from zone III.
pub fn stationary_measure(x: Vec3, xi: Vec3) -> Result<f64> {
    let theta0 = pair_angle(x, xi)?;
    let s = theta0.sin();
    Ok(x.norm() * xi.norm() * s * s / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAMPS: [Ramp; 2] = [Ramp::Exp, Ramp::ExpSquared];

    #[test]
    fn cutoff_examples() {
        for ramp in RAMPS {
            assert_eq!(radial_partition(RadialKind::SCut, 0, 2.0, ramp).unwrap(), 1.0);
            assert_eq!(radial_partition(RadialKind::SCut, 0, 20.0, ramp).unwrap(), 0.0);
            assert_eq!(radial_partition(RadialKind::SCut, 0, 3.9, ramp).unwrap(), 1.0);
            assert_eq!(radial_partition(RadialKind::SCut, 0, 16.1, ramp).unwrap(), 0.0);
            assert_eq!(radial_partition(RadialKind::SCut, 0, 0.0, ramp).unwrap(), 1.0);
        }
        assert!(matches!(radial_partition(RadialKind::Rho, 0, -1.0, Ramp::Exp), Err(Error::Domain(_))));
    }

    #[test]
    fn telescoping_sum_at_sample_point() {
        let s: f64 = (-30..=30).map(|k| radial_partition(RadialKind::Rho, k, 7.3, Ramp::Exp).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn s_cut_is_the_nonpositive_half_of_the_sum() {
        for &r in &[0.01, 1.0, 5.0, 9.5, 12.0, 15.9, 30.0] {
            let partial: f64 = (-40..=0).map(|k| radial_partition(RadialKind::Rho, k, r, Ramp::Exp).unwrap()).sum();
            assert!((partial - s_cut(r, Ramp::Exp)).abs() < 1e-14, "r={r}");
        }
    }

    #[test]
    fn rho_support() {
        let chain = BumpChain::radial(Ramp::Exp);
        for i in 0..=4000 {
            let r = i as f64 * 0.005;
            if r <= 4.0 || r >= 16.0 {
                assert_eq!(chain.rho(r), 0.0, "r={r}");
            }
        }
        assert!(chain.rho(8.0) > 0.0);
    }

    #[test]
    fn angular_examples() {
        let x = Vec3::new(0.0, 0.0, 1.0);
        let xi = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(angular_partition(0, x, xi, Ramp::Exp).unwrap(), 1.0);
        for z in (-10..=10).filter(|&z| z != 0) {
            assert_eq!(angular_partition(z, x, xi, Ramp::Exp).unwrap(), 0.0);
        }
        let t = PI / 64.0;
        let s: f64 = (3..=5).map(|z| zeta(z, t, Ramp::Exp)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(angular_partition(1, Vec3::ZERO, xi, Ramp::Exp).is_err());
    }

    #[test]
    fn angular_support_matches_cones() {
        for n in 1..6 {
            for i in 1..2000 {
                let t = PI * i as f64 / 2000.0;
                let lo = PI / 2f64.powi(n + 3);
                let hi = PI / 2f64.powi(n + 1);
                if t <= lo || t >= hi {
                    assert_eq!(zeta(n, t, Ramp::Exp), 0.0);
                    assert_eq!(zeta(-n, PI - t, Ramp::Exp), 0.0);
                }
            }
        }
        for i in 1..2000 {
            let t = PI * i as f64 / 2000.0;
            if t <= PI / 8.0 || t >= 7.0 * PI / 8.0 {
                assert_eq!(zeta(0, t, Ramp::Exp), 0.0);
            }
        }
    }

    #[test]
    fn classify_examples() {
        let l = region_classify(Vec3::new(0.0, 0.0, 100.0), Vec3::new(100.0, 0.0, 0.0), Ramp::Exp).unwrap();
        assert_eq!(l, RegionLabel { coarse: Coarse::A, cone: Some(0), zone: Some(Zone::I) });

        let l = region_classify(Vec3::new(0.0, 0.0, 100.0), Vec3::new(0.01, 0.0, 0.0001), Ramp::Exp).unwrap();
        assert_eq!(l.coarse, Coarse::C1);
        assert!(l.zone.is_none());

        let l = region_classify(Vec3::new(0.0, 0.0, 1000.0), Vec3::new(0.1, 0.0, 0.0), Ramp::Exp).unwrap();
        assert_eq!(l.coarse, Coarse::B1);

        assert!(region_classify(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Ramp::Exp).is_err());
    }

    #[test]
    fn zone_three_near_colinear() {
        // θ₀ ≈ π/8 puts the pair in cone 1; |x| = 10 ≤ 16 keeps it out of zone I
        // and Λ = 200 ≤ 256 out of zone II.
        let t = PI / 8.0;
        let x = Vec3::new(0.0, 0.0, 10.0);
        let xi = Vec3::new(t.sin(), 0.0, t.cos()) * 20.0;
        let l = region_classify(x, xi, Ramp::Exp).unwrap();
        assert_eq!(l.coarse, Coarse::A);
        assert_eq!(l.cone, Some(1));
        assert_eq!(l.zone, Some(Zone::III));
    }

    #[test]
    fn parse_ramp() {
        assert_eq!(Ramp::parse("exp").unwrap(), Ramp::Exp);
        assert_eq!(Ramp::parse("exp_squared").unwrap(), Ramp::ExpSquared);
        assert!(Ramp::parse("linear").is_err());
    }
}
