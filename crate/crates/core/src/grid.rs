//! Uniform velocity grids, the scaled DFT, `D^s` and norms.
//!
//! Nodes are `v_i = −L + i·h`, `h = 2L/n`, `i = 0..n`. The forward transform
//! approximates `f̂(ξ) = ∫ e^{−iv·ξ} f(v) dv` on the dual grid
//! `ξ_m = (π/L)·m`, `m ∈ {−n/2, …, n/2−1}`, stored in increasing `m` order.
//! The inverse carries the `(2π)^{−3}(Δξ)³` measure, so the pair is an exact
//! inverse and Parseval reads `Σ|f|²h³ = (2π)^{−3} Σ|f̂|²(Δξ)³`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticFn;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::quadrature::pairwise_sum;

/// Width of the boundary shell inspected by the truncation guard, in grid
/// spacings.
pub const GUARD_SHELL: f64 = 1.0;

/// Uniform `n³` grid on `[−L, L)³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub n: usize,
    pub half_width: f64,
}

impl VelocityGrid {
    /// `n` must be even and at least 8. Configuration files additionally
    /// restrict `n` to powers of two; refinement studies use e.g. `n = 24`.
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::Precondition(format!("grid size must be even and >= 8, got {n}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Precondition(format!("grid half-width must be positive, got {half_width}")));
        }
        Ok(VelocityGrid { n, half_width })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(3)
    }

    /// Dual grid spacing Δξ = π/L.
    #[inline]
    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn triple(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.triple(idx);
        Vec3::new(self.coord(i), self.coord(j), self.coord(k))
    }

    pub fn points(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Frequency of the dual-grid index `p ∈ 0..n` along one axis.
    #[inline]
    pub fn freq_coord(&self, p: usize) -> f64 {
        self.dxi() * (p as f64 - (self.n / 2) as f64)
    }

    #[inline]
    pub fn freq(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.triple(idx);
        Vec3::new(self.freq_coord(i), self.freq_coord(j), self.freq_coord(k))
    }

    /// Index of the node at the origin.
    pub fn origin_index(&self) -> usize {
        let c = self.n / 2;
        self.index(c, c, c)
    }

    /// Index of ξ = 0 on the dual grid (same position as the origin node).
    pub fn zero_mode_index(&self) -> usize {
        self.origin_index()
    }

    /// Grid with every length scaled by `s` (h ↦ s·h).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        VelocityGrid::new(self.n, self.half_width * s)
    }

    /// True for nodes with some coordinate outside `[−L+shell, L−shell]`.
    pub fn in_shell(&self, idx: usize, shell: f64) -> bool {
        let p = self.point(idx);
        let lim = self.half_width - shell;
        p.x.abs() > lim || p.y.abs() > lim || p.z.abs() > lim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Velocity,
    Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Complex samples on a [`VelocityGrid`], row-major in `(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: VelocityGrid,
    pub space: Space,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: VelocityGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), found: values.len() });
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("grid function values must be finite".into()));
        }
        Ok(GridFunction { grid, space: Space::Velocity, values })
    }

    pub fn from_real(grid: VelocityGrid, values: &[f64]) -> Result<Self> {
        GridFunction::new(grid, values.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    pub fn zeros(grid: VelocityGrid) -> Self {
        GridFunction { grid, space: Space::Velocity, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Riemann sum `Σ f h³`.
    pub fn integral(&self) -> Complex64 {
        let re: Vec<f64> = self.values.iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.values.iter().map(|z| z.im).collect();
        Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) * self.grid.cell_volume()
    }

    /// Real inner product `Σ Re f · Re g · h³`.
    pub fn inner_real(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        let t: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| a.re * b.re).collect();
        Ok(pairwise_sum(&t) * self.grid.cell_volume())
    }

    fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::SizeMismatch { expected: self.grid.len(), found: other.grid.len() });
        }
        Ok(())
    }

    pub fn add_scaled(&self, other: &GridFunction, c: f64) -> Result<GridFunction> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b * c).collect();
        Ok(GridFunction { grid: self.grid, space: self.space, values })
    }

    /// Circular shift by whole nodes: result[i] = self[i + d] (indices mod n).
    pub fn circular_shift(&self, d: [isize; 3]) -> GridFunction {
        let n = self.grid.n as isize;
        let mut out = self.values.clone();
        for (idx, o) in out.iter_mut().enumerate() {
            let (i, j, k) = self.grid.triple(idx);
            let s = |a: usize, b: isize| ((a as isize + b).rem_euclid(n)) as usize;
            *o = self.values[self.grid.index(s(i, d[0]), s(j, d[1]), s(k, d[2]))];
        }
        GridFunction { grid: self.grid, space: self.space, values: out }
    }

    /// Writes the `GFv1` text format.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut s = String::with_capacity(self.values.len() * 48);
        writeln!(s, "GFv1 {} {:e}", self.grid.n, self.grid.half_width).ok();
        for z in &self.values {
            writeln!(s, "{:e} {:e}", z.re, z.im).ok();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    /// Reads the `GFv1` text format, rejecting wrong headers and counts.
    pub fn read_from(r: impl Read) -> Result<GridFunction> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty GFv1 file".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "GFv1" {
            return Err(Error::Parse(format!("bad GFv1 header `{header}`")));
        }
        let n: usize = parts[1].parse().map_err(|_| Error::Parse(format!("bad n `{}`", parts[1])))?;
        let l: f64 = parts[2].parse().map_err(|_| Error::Parse(format!("bad L `{}`", parts[2])))?;
        let grid = VelocityGrid::new(n, l)?;
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut num = || -> Result<f64> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("short line `{line}`")))?
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number in `{line}`")))
            };
            let re = num()?;
            let im = num()?;
            values.push(Complex64::new(re, im));
        }
        GridFunction::new(grid, values)
    }

    pub fn load(path: &Path) -> Result<GridFunction> {
        GridFunction::read_from(std::fs::File::open(path)?)
    }
}

/// Maximum of |f| over the boundary shell of width [`GUARD_SHELL`]`·h`.
pub fn boundary_shell_max(f: &AnalyticFn, grid: &VelocityGrid) -> f64 {
    let c = f.compile();
    (0..grid.len())
        .filter(|&i| grid.in_shell(i, GUARD_SHELL * grid.h()))
        .map(|i| c.eval(grid.point(i)).abs())
        .fold(0.0, f64::max)
}

/// Errors when the boundary shell carries values above `limit`.
pub fn truncation_check(f: &AnalyticFn, grid: &VelocityGrid, limit: f64) -> Result<f64> {
    let m = boundary_shell_max(f, grid);
    if m.is_nan() || m > limit {
        return Err(Error::Truncation { max_abs: m, limit });
    }
    Ok(m)
}

/// Pointwise samples of `f` at the grid nodes.
pub fn sample_on_grid(f: &AnalyticFn, grid: &VelocityGrid) -> GridFunction {
    let c = f.compile();
    let values = (0..grid.len()).map(|i| Complex64::new(c.eval(grid.point(i)), 0.0)).collect();
    GridFunction { grid: *grid, space: Space::Velocity, values }
}

/// [`sample_on_grid`] after a [`truncation_check`].
pub fn sample_guarded(f: &AnalyticFn, grid: &VelocityGrid, limit: f64) -> Result<GridFunction> {
    truncation_check(f, grid, limit)?;
    Ok(sample_on_grid(f, grid))
}

fn fft3(data: &mut [Complex64], n: usize, fft: &dyn Fft<f64>) {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for line in data.chunks_exact_mut(n) {
        fft.process_with_scratch(line, &mut scratch);
    }
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                buf[j] = data[(i * n + j) * n + k];
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..n {
                data[(i * n + j) * n + k] = buf[j];
            }
        }
    }
    for j in 0..n {
        for k in 0..n {
            for i in 0..n {
                buf[i] = data[(i * n + j) * n + k];
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for i in 0..n {
                data[(i * n + j) * n + k] = buf[i];
            }
        }
    }
}

/// Scaled DFT between velocity and frequency samples.
pub fn dft(gf: &GridFunction, direction: Direction) -> Result<GridFunction> {
    let grid = gf.grid;
    let n = grid.n;
    if gf.values.len() != grid.len() {
        return Err(Error::SizeMismatch { expected: grid.len(), found: gf.values.len() });
    }
    let expected = match direction {
        Direction::Forward => Space::Velocity,
        Direction::Inverse => Space::Frequency,
    };
    if gf.space != expected {
        return Err(Error::Precondition(format!("{direction:?} transform expects {expected:?}-space input")));
    }
    let half = n / 2;
    let sign = |idx: usize| {
        let (i, j, k) = grid.triple(idx);
        // (−1)^{m_x+m_y+m_z} with m = p − n/2
        if (i + j + k + 3 * half).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    };
    // FFT index of centered position p along one axis.
    let wrap = |p: usize| (p + half) % n;
    let mut planner = FftPlanner::<f64>::new();
    match direction {
        Direction::Forward => {
            let fft = planner.plan_fft(n, FftDirection::Forward);
            let mut data = gf.values.clone();
            fft3(&mut data, n, fft.as_ref());
            let h3 = grid.cell_volume();
            let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
            for (idx, o) in out.iter_mut().enumerate() {
                let (i, j, k) = grid.triple(idx);
                *o = data[grid.index(wrap(i), wrap(j), wrap(k))] * (h3 * sign(idx));
            }
            Ok(GridFunction { grid, space: Space::Frequency, values: out })
        }
        Direction::Inverse => {
            let fft = planner.plan_fft(n, FftDirection::Inverse);
            let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
            for idx in 0..grid.len() {
                let (i, j, k) = grid.triple(idx);
                data[grid.index(wrap(i), wrap(j), wrap(k))] = gf.values[idx] * sign(idx);
            }
            fft3(&mut data, n, fft.as_ref());
            let scale = 1.0 / (grid.len() as f64 * grid.cell_volume());
            for z in &mut data {
                *z *= scale;
            }
            Ok(GridFunction { grid, space: Space::Velocity, values: data })
        }
    }
}

/// Tolerance on |f̂(0)| for operations that need a mean-zero input,
/// relative to max(1, ‖f‖_{L¹}).
pub const MEAN_ZERO_TOL: f64 = 1e-10;

fn check_mean_zero(hat: &GridFunction, gf: &GridFunction) -> Result<()> {
    let z = hat.values[hat.grid.zero_mode_index()].norm();
    let l1: f64 = gf.values.iter().map(|v| v.norm()).sum::<f64>() * gf.grid.cell_volume();
    if z > MEAN_ZERO_TOL * l1.max(1.0) {
        return Err(Error::MeanZero(z));
    }
    Ok(())
}

/// `D^s f`: multiplies f̂ by |ξ|^s. The zero mode is dropped for `s ≠ 0`;
/// for `s < 0` it must already vanish.
pub fn apply_dpow(gf: &GridFunction, s: f64) -> Result<GridFunction> {
    let mut hat = dft(gf, Direction::Forward)?;
    if s == 0.0 {
        return dft(&hat, Direction::Inverse);
    }
    if s < 0.0 {
        check_mean_zero(&hat, gf)?;
    }
    let z0 = hat.grid.zero_mode_index();
    for (idx, v) in hat.values.iter_mut().enumerate() {
        if idx == z0 {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v *= hat.grid.freq(idx).norm().powf(s);
        }
    }
    dft(&hat, Direction::Inverse)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NormSpec {
    /// `(Σ |f|^p ⟨v⟩^{pq} h³)^{1/p}`; `p = ∞` gives the weighted sup.
    Lebesgue { p: f64, q: f64 },
    /// `‖|ξ|^α f̂‖` with measure `(2π)^{−3}(Δξ)³`.
    SobolevHom { alpha: f64 },
    /// `‖⟨ξ⟩^α f̂‖` with the same measure.
    SobolevInhom { alpha: f64 },
}

impl NormSpec {
    pub fn lp(p: f64) -> Self {
        NormSpec::Lebesgue { p, q: 0.0 }
    }
}

pub fn norm(gf: &GridFunction, spec: NormSpec) -> Result<f64> {
    let grid = gf.grid;
    match spec {
        NormSpec::Lebesgue { p, q } => {
            if p.is_nan() || p < 1.0 || !q.is_finite() {
                return Err(Error::InvalidNorm(format!("lebesgue norm needs p >= 1, got p={p}, q={q}")));
            }
            let w = |idx: usize| {
                if q == 0.0 {
                    1.0
                } else {
                    grid.point(idx).bracket().powf(q)
                }
            };
            if p.is_infinite() {
                return Ok((0..grid.len()).map(|i| gf.values[i].norm() * w(i)).fold(0.0, f64::max));
            }
            let terms: Vec<f64> = (0..grid.len()).map(|i| (gf.values[i].norm() * w(i)).powf(p)).collect();
            Ok((pairwise_sum(&terms) * grid.cell_volume()).powf(1.0 / p))
        }
        NormSpec::SobolevHom { alpha } | NormSpec::SobolevInhom { alpha } => {
            if !alpha.is_finite() {
                return Err(Error::InvalidNorm(format!("sobolev order must be finite, got {alpha}")));
            }
            let hom = matches!(spec, NormSpec::SobolevHom { .. });
            let hat = dft(gf, Direction::Forward)?;
            if hom && alpha < 0.0 {
                check_mean_zero(&hat, gf)?;
            }
            let z0 = grid.zero_mode_index();
            let terms: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let xi = grid.freq(i);
                    let weight = if hom {
                        if i == z0 {
                            if alpha == 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        } else {
                            xi.norm2().powf(alpha)
                        }
                    } else {
                        (1.0 + xi.norm2()).powf(alpha)
                    };
                    weight * hat.values[i].norm_sqr()
                })
                .collect();
            let measure = (grid.dxi() / (2.0 * PI)).powi(3);
            Ok((pairwise_sum(&terms) * measure).sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g32() -> VelocityGrid {
        VelocityGrid::new(32, 8.0).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = g32();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.point(g.origin_index()), Vec3::ZERO);
        assert_eq!(g.freq(g.zero_mode_index()), Vec3::ZERO);
        assert!(VelocityGrid::new(6, 1.0).is_err());
        assert!(VelocityGrid::new(9, 1.0).is_err());
        assert!(VelocityGrid::new(8, 0.0).is_err());
        assert!(VelocityGrid::new(24, 8.0).is_ok());
    }

    #[test]
    fn guard_on_standard_gaussian() {
        let g = g32();
        let m = truncation_check(&AnalyticFn::standard_gaussian(), &g, 1e-12).unwrap();
        assert!(m < 1e-12);
        assert!(truncation_check(&AnalyticFn::Constant(1.0), &g, 1e-12).is_err());
    }

    #[test]
    fn one_hot_has_flat_transform() {
        let g = VelocityGrid::new(8, 2.0).unwrap();
        let mut f = GridFunction::zeros(g);
        f.values[g.origin_index()] = Complex64::new(1.0, 0.0);
        let hat = dft(&f, Direction::Forward).unwrap();
        for z in &hat.values {
            assert!((z.norm() - g.cell_volume()).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_transform_at_zero_and_round_trip() {
        let g = g32();
        let f = sample_on_grid(&AnalyticFn::standard_gaussian(), &g);
        let hat = dft(&f, Direction::Forward).unwrap();
        let z = hat.values[g.zero_mode_index()];
        let exact = (2.0 * PI).powf(1.5);
        assert!((z.re - exact).abs() / exact < 1e-6);
        let back = dft(&hat, Direction::Inverse).unwrap();
        let err = back.values.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(dft(&f, Direction::Inverse).is_err());
    }

    #[test]
    fn off_center_gaussian_transform_matches_closed_form() {
        let g = g32();
        let c = Vec3::new(0.7, -0.3, 1.1);
        let f = sample_on_grid(&AnalyticFn::gaussian(c, 0.8, 1.0), &g);
        let hat = dft(&f, Direction::Forward).unwrap();
        for idx in [g.zero_mode_index() + 1, g.index(18, 15, 17), g.index(20, 16, 12)] {
            let xi = g.freq(idx);
            let mag = (2.0 * PI).powf(1.5) * 0.8f64.powi(3) * (-0.5 * 0.64 * xi.norm2()).exp();
            let exact = Complex64::from_polar(mag, -c.dot(xi));
            assert!((hat.values[idx] - exact).norm() < 1e-9, "{idx}");
        }
    }

    #[test]
    fn gaussian_norms() {
        let g = g32();
        let f = sample_on_grid(&AnalyticFn::standard_gaussian(), &g);
        let l1 = norm(&f, NormSpec::lp(1.0)).unwrap();
        assert!((l1 - (2.0 * PI).powf(1.5)).abs() < 1e-6);
        let l2 = norm(&f, NormSpec::lp(2.0)).unwrap();
        assert!((l2 - PI.powf(0.75)).abs() < 1e-6);
        let h0 = norm(&f, NormSpec::SobolevHom { alpha: 0.0 }).unwrap();
        assert!((h0 - l2).abs() < 1e-8);
        assert!(norm(&f, NormSpec::lp(0.5)).is_err());
        let sup = norm(&f, NormSpec::lp(f64::INFINITY)).unwrap();
        assert_eq!(sup, 1.0);
    }

    #[test]
    fn homogeneous_norm_of_gaussian_matches_radial_integral() {
        // ‖e^{−|v|²/2}‖²_{Ḣ^α} = 4π ∫ r^{2α+2} e^{−r²} dr = 2π Γ(α + 3/2)
        let g = g32();
        let f = sample_on_grid(&AnalyticFn::standard_gaussian(), &g);
        // |ξ| is not smooth at the origin, so α = 1/2 converges algebraically in Δξ.
        for (alpha, gamma_fn, tol) in [(0.5f64, 1.0f64, 1e-3), (1.0, 0.75 * PI.sqrt(), 1e-8)] {
            let exact = (2.0 * PI * gamma_fn).sqrt();
            let got = norm(&f, NormSpec::SobolevHom { alpha }).unwrap();
            assert!((got - exact).abs() / exact < tol, "alpha={alpha} got={got} exact={exact}");
        }
    }

    #[test]
    fn laplacian_of_gaussian() {
        let g = g32();
        let f = sample_on_grid(&AnalyticFn::standard_gaussian(), &g);
        let d2 = apply_dpow(&f, 2.0).unwrap();
        let mut err: f64 = 0.0;
        for idx in 0..g.len() {
            let v = g.point(idx);
            let exact = (3.0 - v.norm2()) * (-0.5 * v.norm2()).exp();
            err = err.max((d2.values[idx].re - exact).abs());
        }
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn dpow_inverse_on_mean_zero() {
        let g = g32();
        let a = sample_on_grid(&AnalyticFn::gaussian(Vec3::new(0.5, 0.0, 0.0), 0.8, 1.0), &g);
        let b = sample_on_grid(&AnalyticFn::gaussian(Vec3::new(-0.5, 0.2, 0.0), 1.1, 1.0), &g);
        let c = a.integral().re / b.integral().re;
        let h = a.add_scaled(&b, -c).unwrap();
        assert!(apply_dpow(&a, -0.5).is_err());
        let back = apply_dpow(&apply_dpow(&h, 0.5).unwrap(), -0.5).unwrap();
        let err = back.values.iter().zip(&h.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        let id = apply_dpow(&h, 0.0).unwrap();
        let err = id.values.iter().zip(&h.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn gfv1_round_trip_and_rejection() {
        let g = VelocityGrid::new(8, 3.0).unwrap();
        let f = sample_on_grid(&AnalyticFn::gaussian(Vec3::new(0.1, 0.2, 0.3), 0.9, 1.7), &g);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let back = GridFunction::read_from(&buf[..]).unwrap();
        assert_eq!(back, f);
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(100).map(|l| format!("{l}\n")).collect();
        assert!(matches!(GridFunction::read_from(truncated.as_bytes()), Err(Error::SizeMismatch { .. })));
        assert!(GridFunction::read_from("GFv2 8 1\n".as_bytes()).is_err());
    }
}
