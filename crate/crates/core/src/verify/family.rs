use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticFn;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::grid::{sample_on_grid, VelocityGrid};
use crate::quadrature::pairwise_sum;

/// Random Gaussian mixtures, some components cosine-modulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyParams {
    /// Centers are uniform in `[−center_box, center_box]³`.
    pub center_box: f64,
    pub width_min: f64,
    pub width_max: f64,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub max_components: usize,
    /// Probability that a component carries `cos(k·v + φ)`.
    pub modulation_probability: f64,
    pub max_wavenumber: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            center_box: 1.25,
            width_min: 0.6,
            width_max: 0.9,
            amplitude_min: 0.5,
            amplitude_max: 1.5,
            max_components: 3,
            modulation_probability: 1.0 / 3.0,
            max_wavenumber: 1.0,
        }
    }
}

fn uniform_in_box<R: Rng>(rng: &mut R, b: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-b..=b), rng.gen_range(-b..=b), rng.gen_range(-b..=b))
}

fn random_direction<R: Rng>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

fn random_gaussian<R: Rng>(rng: &mut R, p: &FamilyParams) -> AnalyticFn {
    let c = uniform_in_box(rng, p.center_box);
    let w = rng.gen_range(p.width_min..=p.width_max);
    let a = rng.gen_range(p.amplitude_min..=p.amplitude_max);
    AnalyticFn::gaussian(c, w, a)
}

pub fn random_mixture<R: Rng>(rng: &mut R, p: &FamilyParams) -> AnalyticFn {
    let n = rng.gen_range(1..=p.max_components.max(1));
    let parts: Vec<AnalyticFn> = (0..n)
        .map(|_| {
            let g = random_gaussian(rng, p);
            if rng.gen_bool(p.modulation_probability.clamp(0.0, 1.0)) {
                let k = random_direction(rng) * rng.gen_range(0.0..=p.max_wavenumber);
                g.modulated(k, rng.gen_range(0.0..2.0 * PI))
            } else {
                g
            }
        })
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap_or_else(AnalyticFn::zero)
    } else {
        AnalyticFn::Sum(parts)
    }
}

/// Two random Gaussians `(h₊, h₋)` for [`mean_zero_on_grid`].
pub fn random_pair<R: Rng>(rng: &mut R, p: &FamilyParams) -> (AnalyticFn, AnalyticFn) {
    (random_gaussian(rng, p), random_gaussian(rng, p))
}

/// `h₊ − c·h₋` with `c` chosen so the grid sum vanishes, making the zero
/// Fourier mode zero on that grid.
pub fn mean_zero_on_grid(pos: &AnalyticFn, neg: &AnalyticFn, grid: &VelocityGrid) -> Result<AnalyticFn> {
    let sum = |f: &AnalyticFn| pairwise_sum(&sample_on_grid(f, grid).real_parts());
    let (a, b) = (sum(pos), sum(neg));
    if b == 0.0 || !(a / b).is_finite() {
        return Err(Error::Precondition("negative part has zero grid mass".into()));
    }
    Ok(pos.clone().plus(neg.clone().scale(-a / b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm, NormSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mixtures_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = FamilyParams::default();
        for _ in 0..50 {
            let f = random_mixture(&mut rng, &p);
            f.validate().unwrap();
            let c = f.compile();
            assert!((1..=3).contains(&c.atoms.len()));
            assert!(c.max_amplitude() <= 1.5);
        }
    }

    #[test]
    fn grid_mean_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (a, b) = random_pair(&mut rng, &FamilyParams::default());
        let grid = VelocityGrid::new(16, 8.0).unwrap();
        let h = mean_zero_on_grid(&a, &b, &grid).unwrap();
        let gf = sample_on_grid(&h, &grid);
        assert!(norm(&gf, NormSpec::SobolevHom { alpha: -1.0 }).is_ok());
        assert!(norm(&sample_on_grid(&a, &grid), NormSpec::SobolevHom { alpha: -1.0 }).is_err());
    }
}
