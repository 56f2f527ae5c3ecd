//! The gain operator
//! `Q⁺(f,g)(v) = ∫_{ℝ³} ∫_{S²₊} B(v−v*, ω) f(v′) g(v′*) dΩ dv*`
//! with `B(z,ω) = |z|^γ cosθ` (optionally cut by 𝕤 or 𝕤̄), the loss
//! convolution, the Radon transform family and an independent oracle.
//!
//! The hemisphere for a pair `(v, v*)` has polar axis `(v−v*)/|v−v*|`, so
//! `cosθ = ω·(v−v*)/|v−v*| = μ` and `ω·(v−v*) = μ|v−v*|`. Test functions are
//! evaluated in closed form at the pre-collision points.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticFn, AtomSum, Base};
use crate::error::{Error, Result};
use crate::geometry::{Frame, Vec3};
use crate::grid::{truncation_check, GridFunction, VelocityGrid};
use crate::partitions::{s_bar, s_cut, Ramp};
use crate::quadrature::{gauss_legendre_on, pairwise_sum, HemiNode, SphereQuadrature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    Full,
    /// 𝕤(|z|)·B
    Small,
    /// 𝕤̄(|z|)·B
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub gamma: f64,
    pub cutoff: Cutoff,
    #[serde(default)]
    pub ramp: Ramp,
}

impl KernelSpec {
    pub fn new(gamma: f64, cutoff: Cutoff) -> Result<Self> {
        let k = KernelSpec { gamma, cutoff, ramp: Ramp::Exp };
        k.validate()?;
        Ok(k)
    }

    pub fn full(gamma: f64) -> Result<Self> {
        KernelSpec::new(gamma, Cutoff::Full)
    }

    pub fn with_ramp(mut self, ramp: Ramp) -> Self {
        self.ramp = ramp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Domain(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        Ok(())
    }

    /// Kinetic factor `|z|^γ` times the cutoff, as a function of `r = |z|`.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        let base = if self.gamma == 0.0 { 1.0 } else { r.powf(self.gamma) };
        match self.cutoff {
            Cutoff::Full => base,
            Cutoff::Small => base * s_cut(r, self.ramp),
            Cutoff::Large => base * s_bar(r, self.ramp),
        }
    }
}

/// Angular rule plus the lattice used for the v* integral.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConfig {
    pub sphere: SphereQuadrature,
    pub vstar_grid: VelocityGrid,
}

impl QuadConfig {
    pub fn new(sphere: SphereQuadrature, vstar_grid: VelocityGrid) -> Result<Self> {
        if sphere.mu_weights.iter().any(|&w| w <= 0.0) || sphere.phi_weight <= 0.0 {
            return Err(Error::Precondition("sphere weights must be positive".into()));
        }
        let total = sphere.total_weight();
        if (total - 2.0 * PI).abs() > 1e-10 {
            return Err(Error::Precondition(format!("hemisphere weights sum to {total}, expected 2π")));
        }
        Ok(QuadConfig { sphere, vstar_grid })
    }

    /// 16×16 hemisphere rule on the given lattice.
    pub fn standard(vstar_grid: VelocityGrid) -> Result<Self> {
        QuadConfig::new(SphereQuadrature::hemisphere(16, 16)?, vstar_grid)
    }
}

/// Hemisphere node with the cosine weight folded in.
#[derive(Debug, Clone, Copy)]
struct CosNode {
    a: f64,
    b: f64,
    mu: f64,
    w: f64,
}

fn cos_nodes(sphere: &SphereQuadrature) -> Vec<CosNode> {
    sphere.local_nodes().into_iter().map(|HemiNode { a, b, mu, weight }| CosNode { a, b, mu, w: weight * mu }).collect()
}

/// Frame about `u`, or the standard frame (+z axis) when `u = 0`.
#[inline]
fn frame_about(u: Vec3) -> Frame {
    if u.norm2() == 0.0 {
        Frame::standard()
    } else {
        Frame::new(u).unwrap_or_else(|_| Frame::standard())
    }
}

/// Products `f(v′)g(v′*)` whose combined Gaussian exponent exceeds this are
/// dropped; they are below `e^{−30} ≈ 10⁻¹³` times the amplitude product.
pub const PRODUCT_EXPONENT_CUT: f64 = 30.0;

/// `Σ_ω μ w f(v − μrω) g(v* + μrω)` for one pair.
///
/// `v′` and `v′*` lie on the sphere with diameter `[v*, v]`; pairs whose
/// sphere sees only a negligible product are skipped, and per node the
/// exponents are checked before any exponential is taken.
/// Lower bound for the product exponent of `f(v′)g(v′*)` over a collision
/// sphere.
///
/// Writing `v′ = m + ρη`, `v′* = m − ρη` with `m = (v+v*)/2`, `ρ = |v−v*|/2`
/// and `|η| = 1`, a Gaussian atom pair contributes
/// `A|ρη − a|² + B|ρη − b|²` with `a = c_f − m`, `b = m − c_g`, whose
/// minimum over the sphere is `(A+B)(|c*| − ρ)² + AB/(A+B)|a − b|²`,
/// `c* = (Aa + Bb)/(A+B)`. Non-Gaussian atoms give the trivial bound 0.
struct PairBound {
    pairs: Vec<[f64; 8]>,
    trivial: bool,
}

impl PairBound {
    fn new(f: &AtomSum, g: &AtomSum) -> Self {
        let mut pairs = Vec::new();
        let mut trivial = false;
        for af in &f.atoms {
            for ag in &g.atoms {
                if af.base != Base::Gaussian || ag.base != Base::Gaussian {
                    trivial = true;
                    continue;
                }
                let (ca, cb) = (af.center, ag.center);
                pairs.push([ca.x, ca.y, ca.z, cb.x, cb.y, cb.z, 0.5 * af.scale * af.scale, 0.5 * ag.scale * ag.scale]);
            }
        }
        PairBound { pairs, trivial }
    }

    #[inline]
    fn bound(&self, v: Vec3, vs: Vec3) -> f64 {
        if self.trivial {
            return 0.0;
        }
        let m = (v + vs) * 0.5;
        let rho = 0.5 * (v - vs).norm();
        let mut best = f64::INFINITY;
        for p in &self.pairs {
            let a = Vec3::new(p[0], p[1], p[2]) - m;
            let b = m - Vec3::new(p[3], p[4], p[5]);
            let (ka, kb) = (p[6], p[7]);
            let k = ka + kb;
            let c = (a * ka + b * kb) * (1.0 / k);
            let d = c.norm() - rho;
            let e = k * d * d + ka * kb / k * (a - b).norm2();
            if e < best {
                best = e;
            }
        }
        best
    }
}

#[inline]
fn angular_pair(f: &AtomSum, g: &AtomSum, v: Vec3, vs: Vec3, nodes: &[CosNode], scratch: &mut Scratch) -> (f64, f64) {
    let u = v - vs;
    let r = u.norm();
    if scratch.bound.bound(v, vs) > PRODUCT_EXPONENT_CUT {
        return (r, 0.0);
    }
    let fr = frame_about(u);
    let mut s = 0.0;
    for n in nodes {
        let omega = fr.e1 * n.a + fr.e2 * n.b + fr.e3 * n.mu;
        let shift = omega * (n.mu * r);
        let (ps, p) = (vs + shift, v - shift);
        let eg = g.exponents(ps, &mut scratch.g);
        if eg > PRODUCT_EXPONENT_CUT {
            continue;
        }
        let ef = f.exponents(p, &mut scratch.f);
        if eg + ef > PRODUCT_EXPONENT_CUT {
            continue;
        }
        let fv = f.eval_from(p, &scratch.f, PRODUCT_EXPONENT_CUT - eg);
        let gv = g.eval_from(ps, &scratch.g, PRODUCT_EXPONENT_CUT - ef);
        s += n.w * fv * gv;
    }
    (r, s)
}

struct Scratch {
    f: Vec<f64>,
    g: Vec<f64>,
    bound: PairBound,
}

impl Scratch {
    fn new(f: &AtomSum, g: &AtomSum) -> Self {
        Scratch { f: vec![0.0; f.atoms.len()], g: vec![0.0; g.atoms.len()], bound: PairBound::new(f, g) }
    }
}

/// Where to evaluate Q⁺.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Grid(VelocityGrid),
    Points(Vec<Vec3>),
}

impl Output {
    pub fn points(&self) -> Vec<Vec3> {
        match self {
            Output::Grid(g) => g.points(),
            Output::Points(p) => p.clone(),
        }
    }
}

fn guard_inputs(fns: &[&AnalyticFn], grid: &VelocityGrid, guard: f64) -> Result<()> {
    for f in fns {
        f.validate()?;
        truncation_check(f, grid, guard)?;
    }
    Ok(())
}

/// Q⁺ for several kernels at once; the angular sums are shared.
/// Returns one vector of point values per kernel.
pub fn qplus_multi(
    f: &AnalyticFn,
    g: &AnalyticFn,
    points: &[Vec3],
    kernels: &[KernelSpec],
    quad: &QuadConfig,
    guard: f64,
) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Err(Error::Precondition("empty output set".into()));
    }
    for k in kernels {
        k.validate()?;
    }
    guard_inputs(&[f, g], &quad.vstar_grid, guard)?;
    let fc = f.compile();
    let gc = g.compile();
    let nk = kernels.len();
    if fc.is_zero() || gc.is_zero() {
        return Ok(vec![vec![0.0; points.len()]; nk]);
    }
    let nodes = cos_nodes(&quad.sphere);
    let vgrid = quad.vstar_grid;
    let vstars = vgrid.points();
    let h3 = vgrid.cell_volume();

    let per_point: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&v| {
            let mut terms = vec![Vec::with_capacity(vstars.len()); nk];
            let mut scratch = Scratch::new(&fc, &gc);
            for &vs in &vstars {
                let (r, s) = angular_pair(&fc, &gc, v, vs, &nodes, &mut scratch);
                for (k, kernel) in kernels.iter().enumerate() {
                    terms[k].push(if s == 0.0 { 0.0 } else { kernel.radial(r) * s });
                }
            }
            terms.iter().map(|t| pairwise_sum(t) * h3).collect()
        })
        .collect();

    Ok((0..nk).map(|k| per_point.iter().map(|p| p[k]).collect()).collect())
}

/// Q⁺(f,g) at the requested output.
pub fn qplus_eval(
    f: &AnalyticFn,
    g: &AnalyticFn,
    out: &Output,
    kernel: KernelSpec,
    quad: &QuadConfig,
    guard: f64,
) -> Result<Vec<f64>> {
    let mut v = qplus_multi(f, g, &out.points(), &[kernel], quad, guard)?;
    Ok(v.pop().unwrap_or_default())
}

/// Q⁺(f,g) on a grid, one [`GridFunction`] per kernel.
pub fn qplus_grid(
    f: &AnalyticFn,
    g: &AnalyticFn,
    out: &VelocityGrid,
    kernels: &[KernelSpec],
    quad: &QuadConfig,
    guard: f64,
) -> Result<Vec<GridFunction>> {
    qplus_multi(f, g, &out.points(), kernels, quad, guard)?
        .into_iter()
        .map(|vals| GridFunction::from_real(*out, &vals))
        .collect()
}

/// Loss factor `(∫_{S²₊} cosθ dΩ) · Σ_{v*} g(v*) w(|v − v*|) h³`.
pub fn loss_eval(g: &AnalyticFn, v: Vec3, kernel: KernelSpec, quad: &QuadConfig, guard: f64) -> Result<f64> {
    kernel.validate()?;
    guard_inputs(&[g], &quad.vstar_grid, guard)?;
    let gc = g.compile();
    let angular = pairwise_sum(&cos_nodes(&quad.sphere).iter().map(|n| n.w).collect::<Vec<_>>());
    let grid = quad.vstar_grid;
    let terms: Vec<f64> = (0..grid.len())
        .map(|i| {
            let vs = grid.point(i);
            let gv = gc.eval(vs);
            if gv == 0.0 {
                0.0
            } else {
                gv * kernel.radial((v - vs).norm())
            }
        })
        .collect();
    Ok(angular * pairwise_sum(&terms) * grid.cell_volume())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadonVariant {
    T,
    /// multiplied by 𝕤(|x|)
    TSmall,
}

/// `Σ_ω μ w h(p − μ r ω)` about the axis of `u`.
fn radon_angular(h: &AtomSum, p: Vec3, u: Vec3, nodes: &[CosNode]) -> f64 {
    let r = u.norm();
    let fr = frame_about(u);
    let mut terms = Vec::with_capacity(nodes.len());
    for n in nodes {
        let omega = fr.e1 * n.a + fr.e2 * n.b + fr.e3 * n.mu;
        terms.push(n.w * h.eval(p - omega * (n.mu * r)));
    }
    pairwise_sum(&terms)
}

fn radon_prefactor(r: f64, gamma: f64, variant: RadonVariant, ramp: Ramp) -> f64 {
    let base = if gamma == 0.0 { 1.0 } else { r.powf(gamma) };
    match variant {
        RadonVariant::T => base,
        RadonVariant::TSmall => base * s_cut(r, ramp),
    }
}

/// `𝕋h(x) = |x|^γ ∫_{S²₊} cosθ h(x − (x·ω)ω) dΩ`, hemisphere about `x`.
pub fn radon_eval(
    h: &AnalyticFn,
    x: Vec3,
    gamma: f64,
    variant: RadonVariant,
    quad: &SphereQuadrature,
    ramp: Ramp,
) -> Result<f64> {
    if x.norm() == 0.0 || !x.is_finite() {
        return Err(Error::Domain("radon transform needs x != 0".into()));
    }
    KernelSpec::full(gamma)?;
    let hc = h.compile();
    Ok(radon_prefactor(x.norm(), gamma, variant, ramp) * radon_angular(&hc, x, x, &cos_nodes(quad)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugatedRadon {
    pub value: f64,
    /// Set when `v = v*`; the +z axis was used.
    pub zero_relative: bool,
}

/// `(τ_{−v*} ∘ 𝕋 ∘ τ_{v*}) h (v) = |v−v*|^γ ∫_{S²₊} cosθ h(v − ((v−v*)·ω)ω) dΩ`.
pub fn conjugated_radon(
    h: &AnalyticFn,
    v: Vec3,
    v_star: Vec3,
    gamma: f64,
    variant: RadonVariant,
    quad: &SphereQuadrature,
    ramp: Ramp,
) -> Result<ConjugatedRadon> {
    KernelSpec::full(gamma)?;
    let hc = h.compile();
    let nodes = cos_nodes(quad);
    Ok(conjugated_radon_compiled(&hc, v, v_star, gamma, variant, &nodes, ramp))
}

fn conjugated_radon_compiled(
    hc: &AtomSum,
    v: Vec3,
    v_star: Vec3,
    gamma: f64,
    variant: RadonVariant,
    nodes: &[CosNode],
    ramp: Ramp,
) -> ConjugatedRadon {
    let u = v - v_star;
    let r = u.norm();
    let zero_relative = r == 0.0;
    if zero_relative && gamma > 0.0 {
        return ConjugatedRadon { value: 0.0, zero_relative };
    }
    let value = radon_prefactor(r, gamma, variant, ramp) * radon_angular(hc, v, u, nodes);
    ConjugatedRadon { value, zero_relative }
}

/// Samples `v ↦ conjugated_radon(h, v, v_star)` on a grid.
pub fn conjugated_radon_grid(
    h: &AnalyticFn,
    grid: &VelocityGrid,
    v_star: Vec3,
    gamma: f64,
    variant: RadonVariant,
    quad: &SphereQuadrature,
    ramp: Ramp,
) -> Result<GridFunction> {
    KernelSpec::full(gamma)?;
    let hc = h.compile();
    let nodes = cos_nodes(quad);
    let vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| conjugated_radon_compiled(&hc, grid.point(i), v_star, gamma, variant, &nodes, ramp).value)
        .collect();
    GridFunction::from_real(*grid, &vals)
}

/// Which velocity runs over the grid in [`radon_angular_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Running {
    V,
    VStar,
}

/// `(|v−v*|, ∫_{S²₊} cosθ h(v − ((v−v*)·ω)ω) dΩ)` at every grid node, with
/// the other velocity fixed at `anchor`. Multiplying by `|v−v*|^γ`, its
/// 𝕤-cut, or the `H_𝕤̄` weight gives the whole Radon family.
pub fn radon_angular_grid(
    h: &AnalyticFn,
    grid: &VelocityGrid,
    anchor: Vec3,
    running: Running,
    quad: &SphereQuadrature,
) -> Result<Vec<(f64, f64)>> {
    h.validate()?;
    let hc = h.compile();
    let nodes = cos_nodes(quad);
    Ok((0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (v, vs) = match running {
                Running::V => (grid.point(i), anchor),
                Running::VStar => (anchor, grid.point(i)),
            };
            let u = v - vs;
            (u.norm(), radon_angular(&hc, v, u, &nodes))
        })
        .collect())
}

/// `H_𝕤̄ h(v, v*) = ⟨v⟩^{−γ}⟨v*⟩^{−γ} ∫_{S²₊} B_𝕤̄(v−v*, ω) h(v′) dΩ`.
pub fn h_sbar_eval(
    h: &AnalyticFn,
    v: Vec3,
    v_star: Vec3,
    gamma: f64,
    quad: &SphereQuadrature,
    ramp: Ramp,
) -> Result<f64> {
    let kernel = KernelSpec::new(gamma, Cutoff::Large)?.with_ramp(ramp);
    let hc = h.compile();
    Ok(h_sbar_compiled(&hc, v, v_star, &kernel, &cos_nodes(quad)))
}

fn h_sbar_compiled(hc: &AtomSum, v: Vec3, v_star: Vec3, kernel: &KernelSpec, nodes: &[CosNode]) -> f64 {
    let u = v - v_star;
    let k = kernel.radial(u.norm());
    if k == 0.0 {
        return 0.0;
    }
    let weight = (v.bracket() * v_star.bracket()).powf(-kernel.gamma);
    weight * k * radon_angular(hc, v, u, nodes)
}

/// Samples `v ↦ H_𝕤̄ h(v, v_star)` on a grid.
pub fn h_sbar_grid(
    h: &AnalyticFn,
    grid: &VelocityGrid,
    v_star: Vec3,
    gamma: f64,
    quad: &SphereQuadrature,
    ramp: Ramp,
) -> Result<GridFunction> {
    let kernel = KernelSpec::new(gamma, Cutoff::Large)?.with_ramp(ramp);
    let hc = h.compile();
    let nodes = cos_nodes(quad);
    let vals: Vec<f64> =
        (0..grid.len()).into_par_iter().map(|i| h_sbar_compiled(&hc, grid.point(i), v_star, &kernel, &nodes)).collect();
    GridFunction::from_real(*grid, &vals)
}

/// `∭ f(v) g(v*) B(v−v*, ω) h(v′) dΩ dv* dv` over `vgrid × vstar_grid ×`
/// hemisphere, for several kernels at once.
pub fn weak_form_multi(
    f: &AnalyticFn,
    g: &AnalyticFn,
    h: &AnalyticFn,
    kernels: &[KernelSpec],
    vgrid: &VelocityGrid,
    quad: &QuadConfig,
    guard: f64,
) -> Result<Vec<f64>> {
    for k in kernels {
        k.validate()?;
    }
    guard_inputs(&[f], vgrid, guard)?;
    guard_inputs(&[g], &quad.vstar_grid, guard)?;
    h.validate()?;
    let (fc, gc, hc) = (f.compile(), g.compile(), h.compile());
    let nodes = cos_nodes(&quad.sphere);
    let vs_grid = quad.vstar_grid;
    let gvals: Vec<(Vec3, f64, f64)> =
        vs_grid.points().into_iter().map(|p| (p, gc.eval(p), gc.min_exponent(p))).collect();
    let nk = kernels.len();

    let per_v: Vec<Vec<f64>> = (0..vgrid.len())
        .into_par_iter()
        .map(|i| {
            let v = vgrid.point(i);
            let fv = fc.eval(v);
            let ef = fc.min_exponent(v);
            let mut terms = vec![Vec::with_capacity(gvals.len()); nk];
            for &(vs, gv, eg) in &gvals {
                let prod = fv * gv;
                let (r, s) = if prod == 0.0 || ef + eg > PRODUCT_EXPONENT_CUT {
                    (0.0, 0.0)
                } else {
                    let u = v - vs;
                    let r = u.norm();
                    (r, radon_angular(&hc, v, u, &nodes))
                };
                for (k, kernel) in kernels.iter().enumerate() {
                    terms[k].push(if s == 0.0 { 0.0 } else { prod * kernel.radial(r) * s });
                }
            }
            terms.iter().map(|t| pairwise_sum(t)).collect()
        })
        .collect();

    let scale = vgrid.cell_volume() * vs_grid.cell_volume();
    Ok((0..nk).map(|k| pairwise_sum(&per_v.iter().map(|p| p[k]).collect::<Vec<_>>()) * scale).collect())
}

pub fn weak_form_rhs(
    f: &AnalyticFn,
    g: &AnalyticFn,
    h: &AnalyticFn,
    kernel: KernelSpec,
    vgrid: &VelocityGrid,
    quad: &QuadConfig,
    guard: f64,
) -> Result<f64> {
    Ok(weak_form_multi(f, g, h, &[kernel], vgrid, quad, guard)?[0])
}

/// Result of [`qplus_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEval {
    pub value: f64,
    pub coarse: f64,
    pub inconclusive: bool,
}

/// Relative gap between the two oracle levels above which the result is
/// flagged.
pub const ORACLE_TOL: f64 = 1e-5;

struct OracleLevel {
    n_cos: usize,
    n_phi: usize,
    panel: f64,
    per_panel: usize,
    n_alpha: usize,
    n_psi: usize,
}

const ORACLE_LEVELS: [OracleLevel; 2] = [
    OracleLevel { n_cos: 20, n_phi: 40, panel: 1.0, per_panel: 10, n_alpha: 20, n_psi: 28 },
    OracleLevel { n_cos: 28, n_phi: 56, panel: 0.75, per_panel: 12, n_alpha: 28, n_psi: 40 },
];

/// Q⁺(f,g)(v) from the ω-outer representation
///
/// `∫_{S²} dΩ(ω) ∫₀^∞ dρ ∫₀^{π/2} dα ρ^{2} w(ρ) cosα sinα f(v − ρcosα ω)
///  ∫₀^{2π} g(v − ρ sinα e(ψ)) dψ`,
///
/// where `w` is the kernel's radial factor and `e(ψ)` runs over the unit
/// circle orthogonal to ω. It shares no nodes, frames or lattice with
/// [`qplus_eval`]: ω covers the full sphere, the relative velocity is
/// integrated in spherical coordinates about ω, and there is no v* grid.
/// Two refinement levels are computed; disagreement beyond [`ORACLE_TOL`]
/// sets `inconclusive`.
pub fn qplus_oracle(f: &AnalyticFn, g: &AnalyticFn, v: Vec3, kernel: KernelSpec) -> Result<OracleEval> {
    kernel.validate()?;
    f.validate()?;
    g.validate()?;
    let (fc, gc) = (f.compile(), g.compile());
    if fc.is_zero() || gc.is_zero() {
        return Ok(OracleEval { value: 0.0, coarse: 0.0, inconclusive: false });
    }
    let (df, dg) = match (fc.reach(v), gc.reach(v)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Precondition("oracle needs decaying f and g".into())),
    };
    let rmax = df.hypot(dg);
    let vals: Vec<f64> = ORACLE_LEVELS.iter().map(|lvl| oracle_level(&fc, &gc, v, &kernel, rmax, lvl)).collect();
    let (coarse, value) = (vals[0], vals[1]);
    let scale = value.abs().max(coarse.abs());
    let inconclusive = !value.is_finite() || (value - coarse).abs() > ORACLE_TOL * scale.max(1e-300);
    Ok(OracleEval { value, coarse, inconclusive })
}

fn oracle_level(f: &AtomSum, g: &AtomSum, v: Vec3, kernel: &KernelSpec, rmax: f64, lvl: &OracleLevel) -> f64 {
    let (cz, cw) = gauss_legendre_on(lvl.n_cos, -1.0, 1.0);
    let dphi = 2.0 * PI / lvl.n_phi as f64;
    let n_panels = (rmax / lvl.panel).ceil().max(1.0) as usize;
    let width = rmax / n_panels as f64;
    let mut rho = Vec::new();
    let mut rho_w = Vec::new();
    for p in 0..n_panels {
        let (x, w) = gauss_legendre_on(lvl.per_panel, p as f64 * width, (p + 1) as f64 * width);
        rho.extend(x);
        rho_w.extend(w);
    }
    let (alpha, alpha_w) = gauss_legendre_on(lvl.n_alpha, 0.0, PI / 2.0);
    let psi: Vec<(f64, f64)> = (0..lvl.n_psi).map(|k| (2.0 * PI * k as f64 / lvl.n_psi as f64).sin_cos()).collect();
    let dpsi = 2.0 * PI / lvl.n_psi as f64;
    let radial: Vec<f64> = rho.iter().zip(&rho_w).map(|(&r, &w)| w * r * r * kernel.radial(r)).collect();

    let directions: Vec<(Vec3, f64)> = (0..lvl.n_cos)
        .flat_map(|i| {
            let z = cz[i];
            let s = (1.0 - z * z).max(0.0).sqrt();
            let wz = cw[i];
            (0..lvl.n_phi).map(move |j| {
                let (sp, cp) = (j as f64 * dphi).sin_cos();
                (Vec3::new(s * cp, s * sp, z), wz * dphi)
            })
        })
        .collect();

    let per_dir: Vec<f64> = directions
        .par_iter()
        .map(|&(omega, wd)| {
            let fr = Frame::new(omega).unwrap_or_else(|_| Frame::standard());
            let mut acc = Vec::with_capacity(rho.len());
            for (ir, &r) in rho.iter().enumerate() {
                if radial[ir] == 0.0 {
                    acc.push(0.0);
                    continue;
                }
                let mut sa = 0.0;
                for (ia, &a) in alpha.iter().enumerate() {
                    let (sn, cs) = a.sin_cos();
                    let fv = f.eval(v - omega * (r * cs));
                    if fv == 0.0 {
                        continue;
                    }
                    let mut sg = 0.0;
                    for &(sp, cp) in &psi {
                        let e = fr.e1 * cp + fr.e2 * sp;
                        sg += g.eval(v - e * (r * sn));
                    }
                    sa += alpha_w[ia] * cs * sn * fv * sg * dpsi;
                }
                acc.push(radial[ir] * sa);
            }
            wd * pairwise_sum(&acc)
        })
        .collect();
    pairwise_sum(&per_dir)
}

/// CSV of point values with header `vx,vy,vz,value`.
pub fn points_csv(points: &[Vec3], values: &[f64]) -> String {
    let mut s = String::from("vx,vy,vz,value\n");
    for (p, v) in points.iter().zip(values) {
        writeln!(s, "{:e},{:e},{:e},{:e}", p.x, p.y, p.z, v).ok();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm, sample_on_grid, NormSpec};

    fn grid16() -> VelocityGrid {
        VelocityGrid::new(16, 8.0).unwrap()
    }

    #[test]
    fn kernel_radial_factor() {
        let k = KernelSpec::full(1.0).unwrap();
        assert_eq!(k.radial(3.0), 3.0);
        assert_eq!(k.radial(0.0), 0.0);
        assert_eq!(KernelSpec::full(0.0).unwrap().radial(0.0), 1.0);
        let s = KernelSpec::new(1.0, Cutoff::Small).unwrap();
        let l = KernelSpec::new(1.0, Cutoff::Large).unwrap();
        for r in [0.5, 3.0, 9.0, 12.5, 20.0] {
            assert!((s.radial(r) + l.radial(r) - r).abs() < 1e-14);
        }
        assert!(KernelSpec::full(1.5).is_err());
    }

    #[test]
    fn zero_inputs_give_zero() {
        let q = QuadConfig::standard(grid16()).unwrap();
        let z = AnalyticFn::zero();
        let g = AnalyticFn::standard_gaussian();
        let pts = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::ZERO];
        let out = qplus_eval(&z, &g, &Output::Points(pts.clone()), KernelSpec::full(1.0).unwrap(), &q, 1e-12).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
        assert!(qplus_eval(&g, &g, &Output::Points(vec![]), KernelSpec::full(1.0).unwrap(), &q, 1e-12).is_err());
        assert_eq!(loss_eval(&z, Vec3::ZERO, KernelSpec::full(0.0).unwrap(), &q, 1e-12).unwrap(), 0.0);
        let s = SphereQuadrature::hemisphere(16, 16).unwrap();
        assert_eq!(h_sbar_eval(&z, Vec3::new(0.0, 0.0, 30.0), Vec3::ZERO, 1.0, &s, Ramp::Exp).unwrap(), 0.0);
        let w = weak_form_rhs(&z, &g, &g, KernelSpec::full(0.0).unwrap(), &grid16(), &q, 1e-12).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!(qplus_oracle(&z, &g, Vec3::ZERO, KernelSpec::full(0.0).unwrap()).unwrap().value, 0.0);
    }

    #[test]
    fn guard_violation_is_an_error() {
        let q = QuadConfig::standard(grid16()).unwrap();
        let wide = AnalyticFn::gaussian(Vec3::ZERO, 3.0, 1.0);
        let g = AnalyticFn::standard_gaussian();
        let r = qplus_eval(&wide, &g, &Output::Points(vec![Vec3::ZERO]), KernelSpec::full(0.0).unwrap(), &q, 1e-12);
        assert!(matches!(r, Err(Error::Truncation { .. })));
    }

    #[test]
    fn loss_examples() {
        let q = QuadConfig::standard(grid16()).unwrap();
        let g = AnalyticFn::standard_gaussian();
        let k0 = KernelSpec::full(0.0).unwrap();
        for v in [Vec3::ZERO, Vec3::new(1.0, -2.0, 0.5)] {
            let l = loss_eval(&g, v, k0, &q, 1e-12).unwrap();
            let exact = PI * (2.0 * PI).powf(1.5);
            assert!((l - exact).abs() / exact < 1e-5);
        }
        // Narrow unit-mass Gaussian approximates a point mass.
        let w: f64 = 0.05;
        let fine = QuadConfig::standard(VelocityGrid::new(64, 1.6).unwrap()).unwrap();
        let delta = AnalyticFn::gaussian(Vec3::ZERO, w, (2.0 * PI * w * w).powf(-1.5));
        let v = Vec3::new(0.6, 0.8, 0.0);
        let l = loss_eval(&delta, v, KernelSpec::full(1.0).unwrap(), &fine, 1e-12).unwrap();
        assert!((l - PI).abs() / PI < 1e-2, "{l}");
    }

    #[test]
    fn radon_examples() {
        let s = SphereQuadrature::hemisphere(16, 16).unwrap();
        let one = AnalyticFn::Constant(1.0);
        let x1 = Vec3::new(0.0, 0.0, 1.0);
        let v = radon_eval(&one, x1, 1.0, RadonVariant::T, &s, Ramp::Exp).unwrap();
        assert!((v - PI).abs() < 1e-12);
        let x2 = Vec3::new(0.0, 2.0, 0.0);
        let t = radon_eval(&one, x2, 1.0, RadonVariant::T, &s, Ramp::Exp).unwrap();
        let ts = radon_eval(&one, x2, 1.0, RadonVariant::TSmall, &s, Ramp::Exp).unwrap();
        assert!((t - 2.0 * PI).abs() < 1e-12 && (ts - 2.0 * PI).abs() < 1e-12);
        assert!(radon_eval(&one, Vec3::ZERO, 1.0, RadonVariant::T, &s, Ramp::Exp).is_err());
    }

    #[test]
    fn radon_of_radial_gaussian_reduces_to_one_dimension() {
        // x − (x·ω)ω has length |x| sinθ, so 𝕋h(x) = |x|^γ 2π ∫₀¹ μ e^{−|x|²(1−μ²)/2} dμ
        //                                          = |x|^γ 2π (1 − e^{−|x|²/2}) / |x|².
        let s = SphereQuadrature::hemisphere(24, 8).unwrap();
        let h = AnalyticFn::standard_gaussian();
        for r in [0.5, 1.0, 2.5] {
            let x = Vec3::new(0.0, 0.0, r);
            let got = radon_eval(&h, x, 1.0, RadonVariant::T, &s, Ramp::Exp).unwrap();
            let exact = r * 2.0 * PI * (1.0 - (-0.5 * r * r).exp()) / (r * r);
            assert!((got - exact).abs() < 1e-8, "r={r}");
        }
    }

    #[test]
    fn conjugated_radon_examples() {
        let s = SphereQuadrature::hemisphere(16, 16).unwrap();
        let h = AnalyticFn::gaussian(Vec3::new(0.3, 0.0, -0.2), 0.8, 1.0);
        let v = Vec3::new(0.5, 1.0, -0.7);
        let a = conjugated_radon(&h, v, Vec3::ZERO, 0.5, RadonVariant::T, &s, Ramp::Exp).unwrap();
        let b = radon_eval(&h, v, 0.5, RadonVariant::T, &s, Ramp::Exp).unwrap();
        assert_eq!(a.value, b);
        let m = Vec3::new(1.0, -2.0, 0.5);
        let vs = Vec3::new(0.2, 0.1, 0.0);
        let c = conjugated_radon(&h, v, vs, 1.0, RadonVariant::T, &s, Ramp::Exp).unwrap();
        let d = conjugated_radon(&h.clone().translate(m * -1.0), v + m, vs + m, 1.0, RadonVariant::T, &s, Ramp::Exp)
            .unwrap();
        assert!((c.value - d.value).abs() < 1e-12);
        let one = AnalyticFn::Constant(1.0);
        let e =
            conjugated_radon(&one, Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO, 1.0, RadonVariant::T, &s, Ramp::Exp).unwrap();
        assert!((e.value - PI).abs() < 1e-12);
        let z = conjugated_radon(&h, v, v, 0.0, RadonVariant::T, &s, Ramp::Exp).unwrap();
        assert!(z.zero_relative);
        assert!((z.value - PI * h.eval(v)).abs() < 1e-12);
        assert_eq!(conjugated_radon(&h, v, v, 1.0, RadonVariant::T, &s, Ramp::Exp).unwrap().value, 0.0);
    }

    #[test]
    fn h_sbar_examples() {
        let s = SphereQuadrature::hemisphere(16, 16).unwrap();
        let one = AnalyticFn::Constant(1.0);
        let near = h_sbar_eval(&one, Vec3::new(0.0, 0.0, 1.0), Vec3::ZERO, 1.0, &s, Ramp::Exp).unwrap();
        assert_eq!(near, 0.0);
        let far = h_sbar_eval(&one, Vec3::new(0.0, 0.0, 32.0), Vec3::ZERO, 1.0, &s, Ramp::Exp).unwrap();
        assert!((far - 32.0 * PI / 1025f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn mass_identity_maxwell() {
        let grid = grid16();
        let q = QuadConfig::standard(grid).unwrap();
        let f = AnalyticFn::standard_gaussian();
        let g = AnalyticFn::gaussian(Vec3::new(0.5, -0.3, 0.2), 0.8, 1.3);
        let out = qplus_grid(&f, &g, &grid, &[KernelSpec::full(0.0).unwrap()], &q, 1e-12).unwrap();
        let mass = out[0].integral().re;
        let nf = norm(&sample_on_grid(&f, &grid), NormSpec::lp(1.0)).unwrap();
        let ng = norm(&sample_on_grid(&g, &grid), NormSpec::lp(1.0)).unwrap();
        let exact = PI * nf * ng;
        assert!((mass - exact).abs() / exact < 1e-4, "{mass} vs {exact}");
    }

    #[test]
    fn split_and_bilinearity() {
        let grid = grid16();
        let q = QuadConfig::standard(grid).unwrap();
        let f1 = AnalyticFn::gaussian(Vec3::new(0.2, 0.0, 0.1), 0.9, 1.0);
        let f2 = AnalyticFn::gaussian(Vec3::new(-0.4, 0.3, 0.0), 0.7, 0.6);
        let g = AnalyticFn::gaussian(Vec3::new(0.0, -0.5, 0.3), 0.8, 1.0);
        let pts = vec![Vec3::new(0.3, 0.1, -0.2), Vec3::new(1.5, -1.0, 0.7), Vec3::new(4.0, 4.0, 4.0)];
        let ks = [
            KernelSpec::full(1.0).unwrap(),
            KernelSpec::new(1.0, Cutoff::Small).unwrap(),
            KernelSpec::new(1.0, Cutoff::Large).unwrap(),
        ];
        let v = qplus_multi(&f1, &g, &pts, &ks, &q, 1e-12).unwrap();
        for ((full, small), large) in v[0].iter().zip(&v[1]).zip(&v[2]) {
            assert!((full - small - large).abs() < 1e-10);
        }
        let alpha = -0.7;
        let combo = f1.clone().scale(alpha).plus(f2.clone());
        let a = qplus_multi(&combo, &g, &pts, &ks[..1], &q, 1e-12).unwrap();
        let b = qplus_multi(&f2, &g, &pts, &ks[..1], &q, 1e-12).unwrap();
        for i in 0..pts.len() {
            assert!((a[0][i] - (alpha * v[0][i] + b[0][i])).abs() < 1e-12);
        }
    }

    #[test]
    fn galilean_covariance_for_lattice_shift() {
        let grid = grid16();
        let q = QuadConfig::standard(grid).unwrap();
        let f = AnalyticFn::gaussian(Vec3::new(0.2, 0.0, 0.1), 0.7, 1.0);
        let g = AnalyticFn::gaussian(Vec3::new(0.0, -0.5, 0.3), 0.6, 1.0);
        let m = Vec3::new(1.0, -1.0, 0.0);
        let k = KernelSpec::full(0.5).unwrap();
        let pts = [Vec3::new(0.0, 1.0, -1.0), Vec3::new(-2.0, 0.0, 1.0)];
        let shifted: Vec<Vec3> = pts.iter().map(|&p| p + m).collect();
        let a =
            qplus_eval(&f.clone().translate(m), &g.clone().translate(m), &Output::Points(pts.to_vec()), k, &q, 1e-12)
                .unwrap();
        let b = qplus_eval(&f, &g, &Output::Points(shifted), k, &q, 1e-12).unwrap();
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() < 1e-10 * b[i].abs().max(1.0));
        }
    }

    #[test]
    fn oracle_agrees_with_lattice_engine() {
        let f = AnalyticFn::gaussian(Vec3::new(0.2, 0.0, 0.1), 0.8, 1.0);
        let g = AnalyticFn::gaussian(Vec3::new(-0.3, 0.4, 0.0), 0.7, 1.2);
        let q = QuadConfig::standard(VelocityGrid::new(32, 8.0).unwrap()).unwrap();
        let v = Vec3::new(0.4, -0.2, 0.5);
        for gamma in [0.0, 1.0] {
            let k = KernelSpec::full(gamma).unwrap();
            let lattice = qplus_eval(&f, &g, &Output::Points(vec![v]), k, &q, 1e-12).unwrap()[0];
            let o = qplus_oracle(&f, &g, v, k).unwrap();
            assert!(!o.inconclusive, "{o:?}");
            assert!((lattice - o.value).abs() / o.value < 1e-3, "gamma={gamma} {lattice} {o:?}");
        }
    }

    #[test]
    fn csv_rows() {
        let s = points_csv(&[Vec3::new(1.0, 2.0, 3.0)], &[0.5]);
        assert_eq!(s, "vx,vy,vz,value\n1e0,2e0,3e0,5e-1\n");
    }
}
