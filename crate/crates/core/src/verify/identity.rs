use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rel_diff, tag, Context, EstimateReport, Skip};
use crate::analytic::AnalyticFn;
use crate::collision::{
    qplus_eval, qplus_grid, qplus_multi, qplus_oracle, weak_form_multi, Cutoff, KernelSpec, Output, QuadConfig,
};
use crate::error::Result;
use crate::geometry::Vec3;
use crate::grid::{sample_on_grid, VelocityGrid};
use crate::quadrature::SphereQuadrature;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityParams {
    /// Weak-form triples.
    pub trials: usize,
    pub weak_gammas: Vec<f64>,
    pub oracle_gammas: Vec<f64>,
    pub oracle_points: usize,
    pub sample_points: usize,
    pub scaling_lambda: f64,
    pub mass_tol: f64,
    pub weak_tol: f64,
    pub split_tol: f64,
    pub galilean_tol: f64,
    pub scaling_tol: f64,
    pub oracle_tol: f64,
    pub guard: f64,
}

impl Default for IdentityParams {
    fn default() -> Self {
        IdentityParams {
            trials: 10,
            weak_gammas: vec![0.0, 0.5, 1.0],
            oracle_gammas: vec![0.0, 1.0],
            oracle_points: 20,
            sample_points: 8,
            scaling_lambda: 2.0,
            mass_tol: 1e-4,
            weak_tol: 1e-3,
            split_tol: 1e-10,
            galilean_tol: 1e-10,
            scaling_tol: 1e-3,
            oracle_tol: 1e-3,
            guard: 1e-8,
        }
    }
}

/// Widths resolved by the default spacing h = 1.
const WEAK_WIDTHS: std::ops::RangeInclusive<f64> = 0.9..=1.05;

fn gaussian<R: Rng>(rng: &mut R, spread: f64) -> (AnalyticFn, f64) {
    gaussian_in(rng, spread, 0.7..=1.0)
}

fn gaussian_in<R: Rng>(rng: &mut R, spread: f64, widths: std::ops::RangeInclusive<f64>) -> (AnalyticFn, f64) {
    let c =
        Vec3::new(rng.gen_range(-spread..=spread), rng.gen_range(-spread..=spread), rng.gen_range(-spread..=spread));
    let w: f64 = rng.gen_range(widths);
    let a: f64 = rng.gen_range(0.5..=1.5);
    (AnalyticFn::gaussian(c, w, a), a * (2.0 * PI).powf(1.5) * w.powi(3))
}

fn points<R: Rng>(rng: &mut R, n: usize, b: f64) -> Vec<Vec3> {
    (0..n).map(|_| Vec3::new(rng.gen_range(-b..=b), rng.gen_range(-b..=b), rng.gen_range(-b..=b))).collect()
}

struct Setup {
    out: VelocityGrid,
    quad: QuadConfig,
    fine: QuadConfig,
}

fn setup(ctx: &Context) -> Result<Setup> {
    let g = ctx.grid;
    let sphere = SphereQuadrature::hemisphere(ctx.quadrature.n_mu, ctx.quadrature.n_phi)?;
    Ok(Setup {
        out: VelocityGrid::new(g.n, g.half_width)?,
        quad: QuadConfig::new(sphere.clone(), VelocityGrid::new(g.vstar_n, g.half_width)?)?,
        fine: QuadConfig::new(sphere, VelocityGrid::new(2 * g.vstar_n, g.half_width)?)?,
    })
}

type Step = fn(&mut EstimateReport, &mut ChaCha8Rng, &Context, &Setup, usize, &IdentityParams) -> Result<()>;

/// Mass, weak-form, split, Galilean, scaling and oracle identities.
/// `n_trials` is the number of weak-form triples.
pub fn identity_suite(ctx: &Context, n_trials: usize, params: &IdentityParams) -> EstimateReport {
    let mut rep = EstimateReport::new("identity", ctx.seed);
    rep.metadata.grid = Some(ctx.grid);
    if n_trials == 0 {
        rep.push_check("trials", false, 0.0, 1.0, "n_trials must be at least 1".into());
        return rep;
    }
    let s = match setup(ctx) {
        Ok(s) => s,
        Err(e) => {
            rep.push_check("setup", false, f64::NAN, 0.0, e.to_string());
            return rep;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let steps: [(&str, Step); 6] = [
        ("mass", mass),
        ("weak_form", weak_form),
        ("split", split),
        ("galilean", galilean),
        ("scaling", scaling),
        ("oracle", oracle),
    ];
    for (name, step) in steps {
        if let Err(e) = step(&mut rep, &mut rng, ctx, &s, n_trials, params) {
            rep.skipped.push(Skip { trial: 0, reason: format!("{name}: {e}") });
            rep.push_check(name, false, f64::NAN, 0.0, e.to_string());
        }
    }
    rep
}

fn mass(
    rep: &mut EstimateReport,
    rng: &mut ChaCha8Rng,
    ctx: &Context,
    s: &Setup,
    _n: usize,
    p: &IdentityParams,
) -> Result<()> {
    let (f, mf) = gaussian(rng, 0.5);
    let (g, mg) = gaussian(rng, 0.5);
    let kernel = KernelSpec::full(0.0)?.with_ramp(ctx.ramp);
    let q = qplus_grid(&f, &g, &s.out, &[kernel], &s.quad, p.guard)?;
    let integral = q[0].integral().re;
    let expected = PI * mf * mg;
    let err = (integral - expected).abs() / expected;
    rep.aggregate("mass.integral", integral);
    rep.aggregate("mass.expected", expected);
    rep.check_le("mass.relative_error", err, p.mass_tol);
    Ok(())
}

fn weak_form(
    rep: &mut EstimateReport,
    rng: &mut ChaCha8Rng,
    ctx: &Context,
    s: &Setup,
    n: usize,
    p: &IdentityParams,
) -> Result<()> {
    let kernels: Vec<KernelSpec> =
        p.weak_gammas.iter().map(|&gm| Ok(KernelSpec::full(gm)?.with_ramp(ctx.ramp))).collect::<Result<_>>()?;
    let mut worst = vec![0.0f64; kernels.len()];
    for t in 0..n {
        let (f, _) = gaussian_in(rng, 0.5, WEAK_WIDTHS);
        let (g, _) = gaussian_in(rng, 0.5, WEAK_WIDTHS);
        let (h, _) = gaussian_in(rng, 0.5, WEAK_WIDTHS);
        let q = qplus_grid(&f, &g, &s.out, &kernels, &s.quad, p.guard)?;
        let hs = sample_on_grid(&h, &s.out);
        let rhs = weak_form_multi(&f, &g, &h, &kernels, &s.out, &s.quad, p.guard)?;
        for (k, qk) in q.iter().enumerate() {
            let lhs = qk.inner_real(&hs)?;
            let err = rel_diff(lhs, rhs[k]);
            rep.aggregate(format!("weak_form.trial={t}.gamma={}", tag(kernels[k].gamma)), err);
            worst[k] = worst[k].max(err);
        }
    }
    for (k, kernel) in kernels.iter().enumerate() {
        rep.check_le(format!("weak_form.gamma={}", tag(kernel.gamma)), worst[k], p.weak_tol);
    }
    Ok(())
}

fn split(
    rep: &mut EstimateReport,
    rng: &mut ChaCha8Rng,
    ctx: &Context,
    s: &Setup,
    _n: usize,
    p: &IdentityParams,
) -> Result<()> {
    let (f, _) = gaussian(rng, 1.0);
    let (g, _) = gaussian(rng, 1.0);
    let pts = points(rng, p.sample_points, 3.0);
    for gamma in [0.0, 0.5, 1.0] {
        let kernels: Vec<KernelSpec> = [Cutoff::Full, Cutoff::Small, Cutoff::Large]
            .iter()
            .map(|&c| Ok(KernelSpec::new(gamma, c)?.with_ramp(ctx.ramp)))
            .collect::<Result<_>>()?;
        let v = qplus_multi(&f, &g, &pts, &kernels, &s.quad, p.guard)?;
        let dev = (0..pts.len()).map(|i| (v[0][i] - v[1][i] - v[2][i]).abs()).fold(0.0, f64::max);
        rep.check_le(format!("split.gamma={}", tag(gamma)), dev, p.split_tol);
    }
    Ok(())
}

fn galilean(
    rep: &mut EstimateReport,
    rng: &mut ChaCha8Rng,
    ctx: &Context,
    s: &Setup,
    _n: usize,
    p: &IdentityParams,
) -> Result<()> {
    let (f, _) = gaussian(rng, 0.5);
    let (g, _) = gaussian(rng, 0.5);
    let h = s.quad.vstar_grid.h();
    let m = Vec3::new(h, -h, h);
    let pts = points(rng, p.sample_points, 2.0);
    let shifted: Vec<Vec3> = pts.iter().map(|&v| v + m).collect();
    for gamma in [0.0, 1.0] {
        let kernel = KernelSpec::full(gamma)?.with_ramp(ctx.ramp);
        let a = qplus_eval(
            &f.clone().translate(m),
            &g.clone().translate(m),
            &Output::Points(pts.clone()),
            kernel,
            &s.quad,
            p.guard,
        )?;
        let b = qplus_eval(&f, &g, &Output::Points(shifted.clone()), kernel, &s.quad, p.guard)?;
        let dev = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        rep.check_le(format!("galilean.gamma={}", tag(gamma)), dev, p.galilean_tol);
    }
    Ok(())
}

/// `Q⁺(f_λ, g_λ)(v) = λ^{−3−γ} Q⁺(f,g)(λv)`; the dilated side runs on a
/// v* lattice refined by two, so the two sides share no nodes.
fn scaling(
    rep: &mut EstimateReport,
    rng: &mut ChaCha8Rng,
    ctx: &Context,
    s: &Setup,
    _n: usize,
    p: &IdentityParams,
) -> Result<()> {
    let lam = p.scaling_lambda;
    let (f, _) = gaussian(rng, 0.5);
    let (g, _) = gaussian(rng, 0.5);
    let pts = points(rng, p.sample_points, 1.0);
    let scaled: Vec<Vec3> = pts.iter().map(|&v| v * lam).collect();
    let gammas = [0.0, 0.5, 1.0];
    let kernels: Vec<KernelSpec> =
        gammas.iter().map(|&gm| Ok(KernelSpec::full(gm)?.with_ramp(ctx.ramp))).collect::<Result<_>>()?;
    let lhs = qplus_multi(&f.clone().dilate(lam), &g.clone().dilate(lam), &pts, &kernels, &s.fine, p.guard)?;
    let rhs = qplus_multi(&f, &g, &scaled, &kernels, &s.quad, p.guard)?;
    for (k, &gamma) in gammas.iter().enumerate() {
        let factor = lam.powf(-3.0 - gamma);
        let scale = rhs[k].iter().map(|x| (x * factor).abs()).fold(0.0, f64::max);
        let dev = lhs[k].iter().zip(&rhs[k]).map(|(a, b)| (a - factor * b).abs()).fold(0.0, f64::max) / scale;
        rep.check_le(format!("scaling.gamma={}", tag(gamma)), dev, p.scaling_tol);
    }
    Ok(())
}

fn oracle(
    rep: &mut EstimateReport,
    rng: &mut ChaCha8Rng,
    ctx: &Context,
    s: &Setup,
    _n: usize,
    p: &IdentityParams,
) -> Result<()> {
    let (f, _) = gaussian(rng, 0.5);
    let (g, _) = gaussian(rng, 0.5);
    let pts = points(rng, p.oracle_points, 1.5);
    for &gamma in &p.oracle_gammas {
        let kernel = KernelSpec::full(gamma)?.with_ramp(ctx.ramp);
        let vals = qplus_eval(&f, &g, &Output::Points(pts.clone()), kernel, &s.fine, p.guard)?;
        let mut worst = 0.0f64;
        let mut inconclusive = 0usize;
        for (v, &q) in pts.iter().zip(&vals) {
            let o = qplus_oracle(&f, &g, *v, kernel)?;
            if o.inconclusive {
                inconclusive += 1;
            }
            worst = worst.max((q - o.value).abs() / o.value.abs());
        }
        let key = tag(gamma);
        rep.check_le(format!("oracle.gamma={key}"), worst, p.oracle_tol);
        rep.check_le(format!("oracle.inconclusive.gamma={key}"), inconclusive as f64, 0.0);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::GridParams;

    #[test]
    fn zero_trials_fail() {
        let rep = identity_suite(&Context::default(), 0, &IdentityParams::default());
        assert!(!rep.passed());
    }

    #[test]
    fn small_grid_identities() {
        let ctx = Context { grid: GridParams { n: 8, half_width: 8.0, vstar_n: 16 }, ..Default::default() };
        let p = IdentityParams { oracle_points: 2, sample_points: 3, weak_gammas: vec![1.0], ..Default::default() };
        let rep = identity_suite(&ctx, 1, &p);
        for name in ["split.gamma=0", "split.gamma=1", "galilean.gamma=1", "scaling.gamma=1", "oracle.gamma=1"] {
            let c = rep.find(name).unwrap_or_else(|| panic!("missing {name}"));
            assert!(c.passed, "{c:?}");
        }
    }
}
