//! Ratio sweep for the Sobolev estimates of Q⁺ and the Radon-family bounds.
//!
//! For `1/p + 1/q = 3/2` and `1/2 = γ/3 + 1/R` each trial reports
//!
//! * `ratio_hom   = ‖Q⁺(f,g)‖_{Ḣ^γ} / (‖g‖_{L^p}‖f‖_{L^q})`
//! * `ratio_inhom = ‖Q⁺(f,g)‖_{H^γ} / (‖g‖_{L^p_γ}‖f‖_{L^q_γ})`
//! * `ratio_LR    = ‖Q⁺(f,g)‖_{L^R} / (‖g‖_{L^p}‖f‖_{L^q})`
//! * `ratio_sbar_hom`, `ratio_sbar_inhom`: `Q⁺_𝕤̄` in `Ḣ¹` and `H¹`
//! * `radon_v`, `radon_vstar`: `‖τ_{−v*}𝕋τ_{v*}h‖_{L²}/‖h‖_{Ḣ^{−γ}}` in `v`
//!   and in `v*`, maximized over anchor points (the `v* = 0` anchor is 𝕋
//!   itself)
//! * `radon_small_*`, `hsbar_*`: the 𝕤-cut transform and `H_𝕤̄`
//!   against `‖h‖_{H^{−γ}}`
//!
//! on the output grid at two resolutions. Inputs `f`, `g` are normed on a
//! separate fine grid so only the Q⁺ side changes under refinement.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::family::{mean_zero_on_grid, random_mixture, random_pair, FamilyParams};
use super::{rel_diff, tag, Context, EstimateReport, Skip, TrialRecord};
use crate::analytic::AnalyticFn;
use crate::collision::{qplus_grid, radon_angular_grid, Cutoff, KernelSpec, QuadConfig, Running};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::grid::{norm, sample_on_grid, GridFunction, NormSpec, VelocityGrid};
use crate::partitions::{s_bar, s_cut, Ramp};
use crate::quadrature::{pairwise_sum, SphereQuadrature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateParams {
    pub trials: usize,
    pub gammas: Vec<f64>,
    /// `(p, q)` pairs.
    pub exponents: Vec<[f64; 2]>,
    pub dilations: Vec<f64>,
    /// Output grid size of the refined level.
    pub refine_n: usize,
    /// Grid for the norms of `f` and `g`.
    pub norm_n: usize,
    pub dilation_tol: f64,
    pub refinement_tol: f64,
    pub exponent_tol: f64,
    pub guard: f64,
    /// Extra order for the exploratory `Ḣ^{γ+ε}` dilation ratio.
    pub sharpness_epsilon: f64,
    pub family: FamilyParams,
}

impl Default for EstimateParams {
    fn default() -> Self {
        EstimateParams {
            trials: 50,
            gammas: vec![0.0, 0.5, 1.0],
            exponents: vec![[1.0, 2.0], [2.0, 1.0], [4.0 / 3.0, 4.0 / 3.0]],
            dilations: vec![0.5, 1.0, 2.0, 4.0],
            refine_n: 24,
            norm_n: 64,
            dilation_tol: 0.05,
            refinement_tol: 0.10,
            exponent_tol: 1e-12,
            guard: 1e-8,
            sharpness_epsilon: 0.5,
            family: FamilyParams::default(),
        }
    }
}

/// Inputs of one trial. `h = h_pos − c·h_neg` is made mean-zero per grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialInputs {
    pub f: AnalyticFn,
    pub g: AnalyticFn,
    pub h_pos: AnalyticFn,
    pub h_neg: AnalyticFn,
    /// Second anchor for the Radon-family ratios besides the origin.
    pub anchor: Vec3,
}

impl TrialInputs {
    pub fn random<R: Rng>(rng: &mut R, family: &FamilyParams) -> Self {
        let f = random_mixture(rng, family);
        let g = random_mixture(rng, family);
        let (h_pos, h_neg) = random_pair(rng, family);
        let anchor = Vec3::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        TrialInputs { f, g, h_pos, h_neg, anchor }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    /// `ratios[level][cell]`, cells ordered γ-major then `(p,q)`; `norms` holds
    /// input norms and the finest-level operator norms.
    Done {
        ratios: Vec<Vec<BTreeMap<String, f64>>>,
        norms: BTreeMap<String, f64>,
    },
    Skipped(String),
}

/// `1/2 = γ/3 + 1/R`.
fn lebesgue_r(gamma: f64) -> f64 {
    1.0 / (0.5 - gamma / 3.0)
}

fn check_exponents(gammas: &[f64], exponents: &[[f64; 2]], tol: f64) -> Result<()> {
    for &[p, q] in exponents {
        if !(1.0..=2.0).contains(&p) || !(1.0..=2.0).contains(&q) || (1.0 / p + 1.0 / q - 1.5).abs() > tol {
            return Err(Error::Precondition(format!("(p, q) = ({p}, {q}) violates 1/p + 1/q = 3/2, 1 <= p,q <= 2")));
        }
    }
    for &g in gammas {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::Precondition(format!("gamma = {g} outside [0, 1]")));
        }
    }
    Ok(())
}

fn cells(gammas: &[f64], exponents: &[[f64; 2]]) -> Vec<(f64, f64, f64)> {
    gammas.iter().flat_map(|&g| exponents.iter().map(move |&[p, q]| (g, p, q))).collect()
}

fn cell_key(g: f64, p: f64, q: f64) -> String {
    format!("gamma={}.p={}.q={}", tag(g), tag(p), tag(q))
}

fn l2(values: &[f64], cell: f64) -> f64 {
    (pairwise_sum(&values.iter().map(|v| v * v).collect::<Vec<_>>()) * cell).sqrt()
}

/// Norms of `f` and `g` keyed `"{f|g}.L{e}"` and `"{f|g}.L{e}.w{γ}"`.
fn input_norms(
    f: &AnalyticFn,
    g: &AnalyticFn,
    grid: &VelocityGrid,
    gammas: &[f64],
    exponents: &[[f64; 2]],
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let fs = sample_on_grid(f, grid);
    let gs = sample_on_grid(g, grid);
    let mut es: Vec<f64> = exponents.iter().flatten().copied().collect();
    es.sort_by(f64::total_cmp);
    es.dedup();
    for (name, gf) in [("f", &fs), ("g", &gs)] {
        for &e in &es {
            out.insert(format!("{name}.L{}", tag(e)), norm(gf, NormSpec::lp(e))?);
            for &gm in gammas {
                out.insert(format!("{name}.L{}.w{}", tag(e), tag(gm)), norm(gf, NormSpec::Lebesgue { p: e, q: gm })?);
            }
        }
    }
    Ok(out)
}

struct Level {
    /// Per γ: Ḣ^γ, H^γ, L^R of Q⁺, Ḣ¹ and H¹ of Q⁺_𝕤̄.
    q: Vec<[f64; 5]>,
    /// Per γ: the six Radon-family ratios.
    radon: Vec<[f64; 6]>,
}

const RADON_NAMES: [&str; 6] =
    ["radon_v", "radon_vstar", "radon_small_v", "radon_small_vstar", "hsbar_v", "hsbar_vstar"];

fn kernels_for(gammas: &[f64], ramp: Ramp) -> Result<Vec<KernelSpec>> {
    let mut ks = Vec::new();
    for cutoff in [Cutoff::Full, Cutoff::Large] {
        for &g in gammas {
            ks.push(KernelSpec::new(g, cutoff)?.with_ramp(ramp));
        }
    }
    Ok(ks)
}

fn q_norms(q: &[GridFunction], gammas: &[f64]) -> Result<Vec<[f64; 5]>> {
    let ng = gammas.len();
    gammas
        .iter()
        .enumerate()
        .map(|(k, &gm)| {
            let full = &q[k];
            let large = &q[ng + k];
            Ok([
                norm(full, NormSpec::SobolevHom { alpha: gm })?,
                norm(full, NormSpec::SobolevInhom { alpha: gm })?,
                norm(full, NormSpec::lp(lebesgue_r(gm)))?,
                norm(large, NormSpec::SobolevHom { alpha: 1.0 })?,
                norm(large, NormSpec::SobolevInhom { alpha: 1.0 })?,
            ])
        })
        .collect()
}

fn radon_ratios(
    inputs: &TrialInputs,
    grid: &VelocityGrid,
    gammas: &[f64],
    sphere: &SphereQuadrature,
    ramp: Ramp,
) -> Result<Vec<[f64; 6]>> {
    let h = mean_zero_on_grid(&inputs.h_pos, &inputs.h_neg, grid)?;
    let hs = sample_on_grid(&h, grid);
    let cell = grid.cell_volume();
    let mut out = vec![[0.0f64; 6]; gammas.len()];
    let denoms: Vec<(f64, f64)> = gammas
        .iter()
        .map(|&gm| {
            Ok((norm(&hs, NormSpec::SobolevHom { alpha: -gm })?, norm(&hs, NormSpec::SobolevInhom { alpha: -gm })?))
        })
        .collect::<Result<_>>()?;

    for anchor in [Vec3::ZERO, inputs.anchor] {
        for (side, running) in [(0usize, Running::V), (1usize, Running::VStar)] {
            let ang = radon_angular_grid(&h, grid, anchor, running, sphere)?;
            let brackets: Vec<f64> = (0..grid.len()).map(|i| grid.point(i).bracket() * anchor.bracket()).collect();
            for (k, &gm) in gammas.iter().enumerate() {
                let pw = |r: f64| if gm == 0.0 { 1.0 } else { r.powf(gm) };
                let t: Vec<f64> = ang.iter().map(|&(r, a)| pw(r) * a).collect();
                let ts: Vec<f64> = ang.iter().map(|&(r, a)| pw(r) * s_cut(r, ramp) * a).collect();
                let hb: Vec<f64> =
                    ang.iter().zip(&brackets).map(|(&(r, a), &b)| b.powf(-gm) * pw(r) * s_bar(r, ramp) * a).collect();
                let (hom, inhom) = denoms[k];
                let vals = [l2(&t, cell) / hom, l2(&ts, cell) / inhom, l2(&hb, cell) / inhom];
                for (j, v) in vals.iter().enumerate() {
                    let slot = &mut out[k][2 * j + side];
                    *slot = slot.max(*v);
                }
            }
        }
    }
    Ok(out)
}

fn level(inputs: &TrialInputs, n: usize, ctx: &Context, gammas: &[f64], params: &EstimateParams) -> Result<Level> {
    let g = ctx.grid;
    let out = VelocityGrid::new(n, g.half_width)?;
    let sphere = SphereQuadrature::hemisphere(ctx.quadrature.n_mu, ctx.quadrature.n_phi)?;
    let quad = QuadConfig::new(sphere.clone(), VelocityGrid::new(g.vstar_n, g.half_width)?)?;
    let q = qplus_grid(&inputs.f, &inputs.g, &out, &kernels_for(gammas, ctx.ramp)?, &quad, params.guard)?;
    Ok(Level { q: q_norms(&q, gammas)?, radon: radon_ratios(inputs, &out, gammas, &sphere, ctx.ramp)? })
}

/// Evaluates one trial at every output resolution in `levels`.
pub fn estimate_trial(
    inputs: &TrialInputs,
    ctx: &Context,
    gammas: &[f64],
    exponents: &[[f64; 2]],
    levels: &[usize],
    params: &EstimateParams,
) -> Result<TrialOutcome> {
    check_exponents(gammas, exponents, params.exponent_tol)?;
    let norm_grid = VelocityGrid::new(params.norm_n, ctx.grid.half_width)?;
    let mut norms = input_norms(&inputs.f, &inputs.g, &norm_grid, gammas, exponents)?;
    if norms.iter().any(|(k, v)| !k.contains(".w") && *v == 0.0) {
        return Ok(TrialOutcome::Skipped("ratios undefined (0/0): f or g vanishes".into()));
    }

    let mut ratios = Vec::with_capacity(levels.len());
    for (li, &n) in levels.iter().enumerate() {
        let lv = level(inputs, n, ctx, gammas, params)?;
        let mut per_cell = Vec::new();
        for (k, &gm) in gammas.iter().enumerate() {
            if li + 1 == levels.len() {
                let names = ["q.hom", "q.inhom", "q.lr", "q_sbar.hom1", "q_sbar.inhom1"];
                for (j, name) in names.iter().enumerate() {
                    norms.insert(format!("{name}.gamma={}", tag(gm)), lv.q[k][j]);
                }
            }
            for &[p, q] in exponents {
                let plain = norms[&format!("g.L{}", tag(p))] * norms[&format!("f.L{}", tag(q))];
                let weighted =
                    norms[&format!("g.L{}.w{}", tag(p), tag(gm))] * norms[&format!("f.L{}.w{}", tag(q), tag(gm))];
                let [hom, inhom, lr, sh, si] = lv.q[k];
                let mut m = BTreeMap::new();
                m.insert("ratio_hom".to_string(), hom / plain);
                m.insert("ratio_inhom".to_string(), inhom / weighted);
                m.insert("ratio_LR".to_string(), lr / plain);
                m.insert("ratio_sbar_hom".to_string(), sh / plain);
                m.insert("ratio_sbar_inhom".to_string(), si / weighted);
                for (j, name) in RADON_NAMES.iter().enumerate() {
                    m.insert(name.to_string(), lv.radon[k][j]);
                }
                per_cell.push(m);
            }
        }
        ratios.push(per_cell);
    }
    Ok(TrialOutcome::Done { ratios, norms })
}

pub fn estimate_suite(
    ctx: &Context,
    n_trials: usize,
    exponents: &[[f64; 2]],
    gammas: &[f64],
    params: &EstimateParams,
) -> EstimateReport {
    let mut rep = EstimateReport::new("estimate", ctx.seed);
    rep.metadata.grid = Some(ctx.grid);
    if let Err(e) = check_exponents(gammas, exponents, params.exponent_tol) {
        rep.push_check("exponents", false, f64::NAN, 0.0, e.to_string());
        return rep;
    }
    let levels = [ctx.grid.n, params.refine_n];
    if levels[1] <= levels[0] {
        rep.push_check(
            "refinement.levels",
            false,
            levels[1] as f64,
            levels[0] as f64,
            "refine_n must exceed grid.n".into(),
        );
        return rep;
    }
    let cells = cells(gammas, exponents);
    // maxima[level][cell][ratio]
    let mut maxima: Vec<Vec<BTreeMap<String, f64>>> = vec![vec![BTreeMap::new(); cells.len()]; 2];
    let mut completed = 0usize;
    let mut nonfinite = vec![0usize; cells.len()];

    for t in 0..n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        rng.set_stream(t as u64);
        let inputs = TrialInputs::random(&mut rng, &params.family);
        match estimate_trial(&inputs, ctx, gammas, exponents, &levels, params) {
            Ok(TrialOutcome::Done { ratios, norms }) => {
                completed += 1;
                for (c, &(gm, p, q)) in cells.iter().enumerate() {
                    let (coarse, fine) = (&ratios[0][c], &ratios[1][c]);
                    let mut delta = 0.0f64;
                    let mut values = BTreeMap::new();
                    for (name, &v) in fine {
                        let v0 = coarse[name];
                        if !(v.is_finite() && v0.is_finite() && v >= 0.0 && v0 >= 0.0) {
                            nonfinite[c] += 1;
                        }
                        delta = delta.max(rel_diff(v, v0));
                        values.insert(name.clone(), v);
                        values.insert(format!("coarse.{name}"), v0);
                        for (lv, val) in [(0, v0), (1, v)] {
                            let e = maxima[lv][c].entry(name.clone()).or_insert(0.0);
                            *e = e.max(val);
                        }
                    }
                    for (k, v) in &norms {
                        values.insert(format!("norm.{k}"), *v);
                    }
                    rep.trials.push(TrialRecord {
                        trial: t,
                        gamma: gm,
                        p,
                        q,
                        ratio_hom: fine["ratio_hom"],
                        ratio_inhom: fine["ratio_inhom"],
                        ratio_lr: fine["ratio_LR"],
                        refinement_delta: delta,
                        values,
                    });
                }
            }
            Ok(TrialOutcome::Skipped(reason)) => rep.skipped.push(Skip { trial: t, reason }),
            Err(e) => rep.skipped.push(Skip { trial: t, reason: e.to_string() }),
        }
    }

    rep.aggregate("trials.requested", n_trials as f64);
    rep.aggregate("trials.completed", completed as f64);
    rep.aggregate("levels.coarse_n", levels[0] as f64);
    rep.aggregate("levels.fine_n", levels[1] as f64);
    rep.check_le("trials.skipped", rep.skipped.len() as f64, 0.0);
    for (c, &(gm, p, q)) in cells.iter().enumerate() {
        let key = cell_key(gm, p, q);
        rep.check_le(format!("finite.{key}"), nonfinite[c] as f64, 0.0);
        for (name, &fine) in &maxima[1][c] {
            let coarse = maxima[0][c][name];
            let delta = rel_diff(fine, coarse);
            rep.aggregate(format!("max.{key}.{name}"), fine);
            rep.aggregate(format!("max_coarse.{key}.{name}"), coarse);
            rep.check_le(format!("refinement.{key}.{name}"), delta, params.refinement_tol);
        }
    }

    if let Err(e) = dilation_block(&mut rep, ctx, exponents, gammas, params) {
        rep.push_check("dilation", false, f64::NAN, 0.0, e.to_string());
    }
    rep
}

/// `ratio_hom` for a fixed Gaussian pair under `f ↦ f(λ·)`, every grid
/// scaled by `1/λ`.
fn dilation_block(
    rep: &mut EstimateReport,
    ctx: &Context,
    exponents: &[[f64; 2]],
    gammas: &[f64],
    params: &EstimateParams,
) -> Result<()> {
    if params.dilations.is_empty() {
        return Ok(());
    }
    let f0 = AnalyticFn::gaussian(Vec3::new(0.3, -0.2, 0.1), 0.8, 1.0);
    let g0 = AnalyticFn::gaussian(Vec3::new(-0.2, 0.25, -0.1), 0.7, 1.2);
    let kernels: Vec<KernelSpec> =
        gammas.iter().map(|&g| Ok(KernelSpec::full(g)?.with_ramp(ctx.ramp))).collect::<Result<_>>()?;
    let sphere = SphereQuadrature::hemisphere(ctx.quadrature.n_mu, ctx.quadrature.n_phi)?;
    let g = ctx.grid;
    let eps = params.sharpness_epsilon;

    // series[(cell)] = ratio per λ; sharp[(γ)] likewise for Ḣ^{γ+ε}
    let cells = cells(gammas, exponents);
    let mut series = vec![Vec::new(); cells.len()];
    let mut sharp = vec![Vec::new(); gammas.len()];
    for &lam in &params.dilations {
        let l = g.half_width / lam;
        let out = VelocityGrid::new(g.n, l)?;
        let quad = QuadConfig::new(sphere.clone(), VelocityGrid::new(g.vstar_n, l)?)?;
        let (f, gg) = (f0.clone().dilate(lam), g0.clone().dilate(lam));
        let q = qplus_grid(&f, &gg, &out, &kernels, &quad, params.guard)?;
        let norms = input_norms(&f, &gg, &VelocityGrid::new(params.norm_n, l)?, gammas, exponents)?;
        for (c, &(gm, p, qq)) in cells.iter().enumerate() {
            let k = gammas.iter().position(|&x| x == gm).unwrap_or(0);
            let plain = norms[&format!("g.L{}", tag(p))] * norms[&format!("f.L{}", tag(qq))];
            let r = norm(&q[k], NormSpec::SobolevHom { alpha: gm })? / plain;
            rep.aggregate(format!("dilation.{}.lambda={}", cell_key(gm, p, qq), tag(lam)), r);
            series[c].push(r);
        }
        for (k, &gm) in gammas.iter().enumerate() {
            sharp[k].push(norm(&q[k], NormSpec::SobolevHom { alpha: gm + eps })?);
        }
    }
    for (c, &(gm, p, q)) in cells.iter().enumerate() {
        let hi = series[c].iter().copied().fold(f64::MIN, f64::max);
        let lo = series[c].iter().copied().fold(f64::MAX, f64::min);
        let dev = (hi - lo) / hi;
        rep.check_le(format!("dilation.{}", cell_key(gm, p, q)), dev, params.dilation_tol);
    }
    for (k, &gm) in gammas.iter().enumerate() {
        let (first, last) = (sharp[k][0], sharp[k][sharp[k].len() - 1]);
        let growth = (last / first).ln() / (params.dilations[params.dilations.len() - 1] / params.dilations[0]).ln();
        rep.aggregate(format!("sharpness.gamma={}.log_growth_rate", tag(gm)), growth);
    }
    Ok(())
}
