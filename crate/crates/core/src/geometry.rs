//! Collision geometry and calculus on the unit sphere.
//!
//! Everything here is pure: velocities, the pre-collision map, the bilinear
//! phase `(x·ω)(ξ·ω)` restricted to the sphere, and its critical points.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of ℝ³ (velocity, position or frequency).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    /// Unit vector in the direction of `self`; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    /// Japanese bracket ⟨v⟩ = (1 + |v|²)^{1/2}.
    #[inline]
    pub fn bracket(self) -> f64 {
        (1.0 + self.norm2()).sqrt()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Polar/azimuthal angles of a unit vector relative to some [`Frame`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub theta: f64,
    pub phi: f64,
}

impl SpherePoint {
    pub fn new(theta: f64, phi: f64) -> Self {
        SpherePoint { theta, phi }
    }

    /// Coordinates `(cosφ sinθ, sinφ sinθ, cosθ)` in the frame basis.
    pub fn local(self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(cp * st, sp * st, ct)
    }
}

/// Orthonormal frame whose third vector is a chosen polar axis.
///
/// The in-plane reference `e1` is the projection of the first coordinate axis
/// (x, then y, then z) that is not parallel to the polar axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e1: Vec3,
    pub e2: Vec3,
    pub e3: Vec3,
}

impl Frame {
    pub fn new(axis: Vec3) -> Result<Frame> {
        let e3 = axis.normalized().ok_or_else(|| Error::Domain("frame axis must be nonzero".into()))?;
        let candidates = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        let reference = candidates
            .into_iter()
            .find(|c| c.cross(e3).norm() > 1e-8)
            .expect("a unit vector is parallel to at most one coordinate axis");
        let e1 = (reference - e3 * reference.dot(e3)).normalized().expect("reference is not parallel to the axis");
        let e2 = e3.cross(e1);
        Ok(Frame { e1, e2, e3 })
    }

    /// Frame with `e3 = +z`, used where an arbitrary axis is acceptable.
    pub fn standard() -> Frame {
        Frame { e1: Vec3::new(1.0, 0.0, 0.0), e2: Vec3::new(0.0, 1.0, 0.0), e3: Vec3::new(0.0, 0.0, 1.0) }
    }

    #[inline]
    pub fn to_world(&self, local: Vec3) -> Vec3 {
        self.e1 * local.x + self.e2 * local.y + self.e3 * local.z
    }

    #[inline]
    pub fn to_local(&self, v: Vec3) -> Vec3 {
        Vec3::new(v.dot(self.e1), v.dot(self.e2), v.dot(self.e3))
    }

    pub fn point(&self, p: SpherePoint) -> Vec3 {
        self.to_world(p.local())
    }

    /// Angles of a nonzero vector; φ is reported in `[0, 2π)`.
    pub fn angles(&self, v: Vec3) -> Result<SpherePoint> {
        let l = self.to_local(v);
        let r = l.norm();
        if r == 0.0 {
            return Err(Error::Domain("angles of the zero vector".into()));
        }
        let theta = (l.x.hypot(l.y)).atan2(l.z);
        let mut phi = l.y.atan2(l.x);
        if phi < 0.0 {
            phi += std::f64::consts::TAU;
        }
        if phi >= std::f64::consts::TAU {
            phi = 0.0;
        }
        Ok(SpherePoint { theta, phi })
    }
}

fn check_unit(omega: Vec3) -> Result<()> {
    let n = omega.norm();
    if !omega.is_finite() || (n - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!("omega must be a unit vector, |omega| = {n}")));
    }
    Ok(())
}

fn nonzero(v: Vec3, name: &str) -> Result<f64> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Domain(format!("{name} must be nonzero and finite")));
    }
    Ok(n)
}

/// Pre-collision velocities `(v', v'_*)` for a deflection direction ω.
pub fn pre_collision(v: Vec3, v_star: Vec3, omega: Vec3) -> Result<(Vec3, Vec3)> {
    check_unit(omega)?;
    Ok(pre_collision_unchecked(v, v_star, omega))
}

/// [`pre_collision`] without the unit-length check, for inner loops.
#[inline]
pub fn pre_collision_unchecked(v: Vec3, v_star: Vec3, omega: Vec3) -> (Vec3, Vec3) {
    let shift = omega * omega.dot(v - v_star);
    (v - shift, v_star + shift)
}

/// Angles `(θ₀, φ₀)` of ξ in the frame whose polar axis is `x`.
pub fn relative_angles(x: Vec3, xi: Vec3) -> Result<(Frame, SpherePoint)> {
    nonzero(x, "x")?;
    nonzero(xi, "xi")?;
    let frame = Frame::new(x)?;
    let p = frame.angles(xi)?;
    Ok((frame, p))
}

/// Normalized phase σ(x,ξ;ω) = (x·ω)(ξ·ω)/(|x||ξ|), with ω given in the
/// frame whose polar axis is `x`.
pub fn phase_sigma(x: Vec3, xi: Vec3, omega: SpherePoint) -> Result<f64> {
    let (_, p0) = relative_angles(x, xi)?;
    Ok(sigma_angles(p0.theta, p0.phi, omega.theta, omega.phi))
}

#[inline]
fn sigma_angles(theta0: f64, phi0: f64, theta: f64, phi: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (s0, c0) = theta0.sin_cos();
    c * ((phi - phi0).cos() * s0 * s + c0 * c)
}

/// Covariant gradient and Hessian of σ(x,ξ;·) in the tangent basis
/// `{e_θ, e_φ = (1/sinθ) ∂_φ}`.
pub fn sphere_calculus(x: Vec3, xi: Vec3, omega: SpherePoint) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let (_, p0) = relative_angles(x, xi)?;
    let (st, ct) = omega.theta.sin_cos();
    if st.abs() < 1e-12 {
        return Err(Error::Pole { theta: omega.theta });
    }
    let (s0, c0) = p0.theta.sin_cos();
    let (sd, cd) = (omega.phi - p0.phi).sin_cos();
    let a = s0 * cd;
    let da = -s0 * sd;
    let dda = -a;
    let (s2, c2) = (2.0 * omega.theta).sin_cos();

    let d_t = c2 * a - s2 * c0;
    let d_p = ct * st * da;
    let d_tt = -2.0 * s2 * a - 2.0 * c2 * c0;
    let d_tp = c2 * da;
    let d_pp = ct * st * dda;

    let grad = [d_t, d_p / st];
    let off = d_tp / st - ct / (st * st) * d_p;
    let hess = [[d_tt, off], [off, d_pp / (st * st) + ct / st * d_t]];
    Ok((grad, hess))
}

/// The two hemisphere-canonical critical points of ω ↦ (x·ω)(ξ·ω).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPair {
    pub omega_plus: Vec3,
    pub omega_minus: Vec3,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    /// `None` in the colinear case.
    pub hess_plus: Option<[[f64; 2]; 2]>,
    pub hess_minus: Option<[[f64; 2]; 2]>,
    pub degenerate: bool,
    /// Angle θ₀ between x and ξ.
    pub theta0: f64,
}

/// Angle below which x and ξ are treated as colinear.
pub const COLINEAR_TOL: f64 = 1e-8;

/// Angle between two nonzero vectors, accurate near 0 and π.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub fn critical_points(x: Vec3, xi: Vec3) -> Result<CriticalPair> {
    let nx = nonzero(x, "x")?;
    let nxi = nonzero(xi, "xi")?;
    let xh = x * (1.0 / nx);
    let xih = xi * (1.0 / nxi);
    let theta0 = angle_between(xh, xih);
    let cos0 = theta0.cos();
    let sigma_plus = 0.5 * (cos0 + 1.0);
    let sigma_minus = 0.5 * (cos0 - 1.0);
    let frame = Frame::new(x)?;

    if theta0 < COLINEAR_TOL || std::f64::consts::PI - theta0 < COLINEAR_TOL {
        let (omega_plus, omega_minus) = if theta0 < COLINEAR_TOL { (xh, frame.e1) } else { (frame.e1, xh) };
        return Ok(CriticalPair {
            omega_plus,
            omega_minus,
            sigma_plus,
            sigma_minus,
            hess_plus: None,
            hess_minus: None,
            degenerate: true,
            theta0,
        });
    }

    let omega_plus = (xih + xh).normalized().expect("not anti-colinear");
    let omega_minus = (xh - xih).normalized().expect("not colinear");
    // ω₊ is a maximum of σ (negative definite), ω₋ a minimum (positive definite).
    let hess_plus = [[-2.0, 0.0], [0.0, -2.0 * sigma_plus]];
    let hess_minus = [[2.0, 0.0], [0.0, -2.0 * sigma_minus]];
    Ok(CriticalPair {
        omega_plus,
        omega_minus,
        sigma_plus,
        sigma_minus,
        hess_plus: Some(hess_plus),
        hess_minus: Some(hess_minus),
        degenerate: false,
        theta0,
    })
}
