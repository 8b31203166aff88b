//! Free-space Poisson solves for the transverse trace `h^T` sourced by an
//! energy density, and the mutual Coulomb integral `∬ E_A E_B / |x − y|`.

use std::path::Path;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fft3, read_raw_grid, write_raw_grid, GridHeader, GridSpec};
use crate::sources::{sample_on_grid, EnergyDensity, GridDensity, PhysicalConstants};

/// Mean of `1/r` over a cube of unit side centred on the origin.
pub const UNIT_CELL_MEAN_INVERSE_DISTANCE: f64 = 2.380_077_363_979_553;

/// Largest lattice the O(N⁶) quadrature accepts.
pub const DIRECT_MAX_N: usize = 48;
/// Largest lattice the padded FFT solver accepts (padded grid is (2N)³).
pub const SPECTRAL_MAX_N: usize = 256;

/// Real scalar field sampled on lattice nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarFieldX {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarFieldX {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!("{} values for {} sites", values.len(), spec.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scalar field has non-finite entries"));
        }
        Ok(Self { spec, values })
    }

    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[self.spec.index(ix, iy, iz)]
    }

    pub fn save(&self, base: &Path, quantity: &str, units: &str) -> Result<()> {
        write_raw_grid(base, &GridHeader::new(quantity, &self.spec, units, None), &self.values)
    }

    pub fn load(base: &Path) -> Result<Self> {
        let (header, values) = read_raw_grid(base)?;
        Self::new(header.spec()?, values)
    }

    /// Seven-point Laplacian at interior nodes; boundary nodes are set to 0.
    pub fn laplacian(&self) -> Vec<f64> {
        let spec = self.spec;
        let n = spec.n;
        let h2 = spec.cell_size().powi(2);
        let mut out = vec![0.0; spec.len()];
        for iz in 1..n - 1 {
            for iy in 1..n - 1 {
                for ix in 1..n - 1 {
                    let c = self.at(ix, iy, iz);
                    let sum = self.at(ix - 1, iy, iz)
                        + self.at(ix + 1, iy, iz)
                        + self.at(ix, iy - 1, iz)
                        + self.at(ix, iy + 1, iz)
                        + self.at(ix, iy, iz - 1)
                        + self.at(ix, iy, iz + 1);
                    out[spec.index(ix, iy, iz)] = (sum - 6.0 * c) / h2;
                }
            }
        }
        out
    }
}

/// Lattice Green's function `1/|r|` with the cell-averaged value at `r = 0`.
#[inline]
fn kernel(h: f64, d: [i64; 3]) -> f64 {
    if d == [0, 0, 0] {
        UNIT_CELL_MEAN_INVERSE_DISTANCE / h
    } else {
        let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
        1.0 / (h * r2.sqrt())
    }
}

fn grid_of(e: &EnergyDensity, spec: &GridSpec) -> Result<GridDensity> {
    sample_on_grid(e, spec)
}

/// `φ(x) = ∫ E(y)/|x − y| d³y` on the lattice by Hockney zero padding.
fn coulomb_potential_spectral(rho: &GridDensity) -> Result<Vec<f64>> {
    let spec = rho.spec;
    let n = spec.n;
    if n > SPECTRAL_MAX_N {
        return Err(Error::SizeGuard(format!("spectral solve limited to N <= {SPECTRAL_MAX_N}, got {n}")));
    }
    let m = 2 * n;
    let h = spec.cell_size();
    let padded_index = |ix: usize, iy: usize, iz: usize| ix + m * (iy + m * iz);

    let signed = |i: usize| if i < n { i as i64 } else { i as i64 - m as i64 };
    let mut green = vec![Complex64::new(0.0, 0.0); m * m * m];
    for iz in 0..m {
        for iy in 0..m {
            for ix in 0..m {
                green[padded_index(ix, iy, iz)] = Complex64::new(kernel(h, [signed(ix), signed(iy), signed(iz)]), 0.0);
            }
        }
    }
    fft3(&mut green, m, false);

    let mut src = vec![Complex64::new(0.0, 0.0); m * m * m];
    for (idx, v) in rho.values.iter().enumerate() {
        let [ix, iy, iz] = spec.coords(idx);
        src[padded_index(ix, iy, iz)] = Complex64::new(*v, 0.0);
    }
    fft3(&mut src, m, false);
    src.iter_mut().zip(&green).for_each(|(s, g)| *s *= g);
    fft3(&mut src, m, true);

    let scale = spec.cell_volume() / (m * m * m) as f64;
    Ok((0..spec.len())
        .map(|idx| {
            let [ix, iy, iz] = spec.coords(idx);
            src[padded_index(ix, iy, iz)].re * scale
        })
        .collect())
}

fn coulomb_potential_direct(rho: &GridDensity) -> Result<Vec<f64>> {
    let spec = rho.spec;
    if spec.n > DIRECT_MAX_N {
        return Err(Error::SizeGuard(format!(
            "direct quadrature limited to N <= {DIRECT_MAX_N}, got {}",
            spec.n
        )));
    }
    let h = spec.cell_size();
    let sources: Vec<([i64; 3], f64)> = rho
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(idx, v)| (spec.coords(idx).map(|c| c as i64), *v))
        .collect();
    let vol = spec.cell_volume();
    Ok((0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let x = spec.coords(idx).map(|c| c as i64);
            sources
                .iter()
                .map(|(y, e)| e * kernel(h, [x[0] - y[0], x[1] - y[1], x[2] - y[2]]))
                .sum::<f64>()
                * vol
        })
        .collect())
}

fn to_h_t(phi: Vec<f64>, spec: GridSpec, consts: &PhysicalConstants) -> Result<ScalarFieldX> {
    let pref = consts.kappa() / (4.0 * std::f64::consts::PI);
    ScalarFieldX::new(spec, phi.into_iter().map(|p| p * pref).collect())
}

/// `h^T(x) = κ/4π ∫ E(y)/|x − y| d³y` by direct lattice quadrature.
pub fn solve_ht_direct(e: &EnergyDensity, consts: &PhysicalConstants, spec: &GridSpec) -> Result<ScalarFieldX> {
    let rho = grid_of(e, spec)?;
    to_h_t(coulomb_potential_direct(&rho)?, *spec, consts)
}

/// Same field by FFT convolution on a zero-padded `(2N)³` lattice, so that
/// periodic images never overlap the box.
pub fn solve_ht_spectral(e: &EnergyDensity, consts: &PhysicalConstants, spec: &GridSpec) -> Result<ScalarFieldX> {
    let rho = grid_of(e, spec)?;
    to_h_t(coulomb_potential_spectral(&rho)?, *spec, consts)
}

/// RMS of `∇²h^T + κE` over interior nodes, relative to the RMS of `κE`.
pub fn laplacian_residual(field: &ScalarFieldX, density: &GridDensity, consts: &PhysicalConstants) -> Result<f64> {
    field.spec.check_same(&density.spec)?;
    let spec = field.spec;
    let n = spec.n;
    let lap = field.laplacian();
    let kappa = consts.kappa();
    let (mut res, mut src) = (0.0, 0.0);
    for iz in 1..n - 1 {
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                let i = spec.index(ix, iy, iz);
                let ke = kappa * density.values[i];
                res += (lap[i] + ke).powi(2);
                src += ke * ke;
            }
        }
    }
    if src == 0.0 {
        return Err(Error::domain("density vanishes on the interior nodes"));
    }
    Ok((res / src).sqrt())
}

/// Quadrature for the mutual Coulomb integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoulombBackend {
    /// Closed form for Gaussian and point profiles.
    Analytic,
    Direct { grid: GridSpec },
    Spectral { grid: GridSpec },
    /// 6-D Monte Carlo over the two normalised densities.
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Monte-Carlo standard error; `None` for deterministic backends.
    pub std_error: Option<f64>,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Self { value, std_error: None }
    }

    pub fn scaled(self, a: f64) -> Self {
        Self {
            value: self.value * a,
            std_error: self.std_error.map(|s| s * a.abs()),
        }
    }
}

/// `I = ∬ E_A(x) E_B(y) / |x − y| d³x d³y`.
pub fn mutual_coulomb(a: &EnergyDensity, b: &EnergyDensity, backend: &CoulombBackend) -> Result<Estimate> {
    if a.total_energy() == 0.0 || b.total_energy() == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    match backend {
        CoulombBackend::Analytic => analytic_pair(a, b).map(Estimate::exact),
        CoulombBackend::Direct { grid } => {
            let ra = grid_of(a, grid)?;
            let phi = coulomb_potential_direct(&grid_of(b, grid)?)?;
            Ok(Estimate::exact(lattice_dot(&ra, &phi)))
        }
        CoulombBackend::Spectral { grid } => {
            let ra = grid_of(a, grid)?;
            let phi = coulomb_potential_spectral(&grid_of(b, grid)?)?;
            Ok(Estimate::exact(lattice_dot(&ra, &phi)))
        }
        CoulombBackend::MonteCarlo { samples, seed } => monte_carlo(a, b, *samples, *seed),
    }
}

fn lattice_dot(rho: &GridDensity, phi: &[f64]) -> f64 {
    rho.values.iter().zip(phi).map(|(r, p)| r * p).sum::<f64>() * rho.spec.cell_volume()
}

/// Two spherical Gaussians (points have zero width) interact like points
/// smeared by the combined width: `E_A E_B erf(d/√(2s²))/d`, `s² = σ_A² + σ_B²`.
fn analytic_pair(a: &EnergyDensity, b: &EnergyDensity) -> Result<f64> {
    let ((ca, sa), (cb, sb)) = match (a.gaussian_parameters(), b.gaussian_parameters()) {
        (Some(pa), Some(pb)) => (pa, pb),
        _ => return Err(Error::invalid("analytic Coulomb backend needs point or gaussian profiles")),
    };
    let d = (0..3).map(|i| (ca[i] - cb[i]).powi(2)).sum::<f64>().sqrt();
    let s = (sa * sa + sb * sb).sqrt();
    let ee = a.total_energy() * b.total_energy();
    if s == 0.0 {
        if d == 0.0 {
            return Err(Error::domain("coincident unregularised point sources"));
        }
        return Ok(ee / d);
    }
    let x = d / (s * std::f64::consts::SQRT_2);
    if x < 1e-8 {
        // erf(x)/d → 2/(√π · s√2)
        Ok(ee * (2.0 / std::f64::consts::PI).sqrt() / s)
    } else {
        Ok(ee * libm::erf(x) / d)
    }
}

enum PositionSampler {
    Point([f64; 3]),
    Gaussian([f64; 3], f64),
    Grid { spec: GridSpec, cells: WeightedIndex<f64> },
}

impl PositionSampler {
    fn new(e: &EnergyDensity) -> Result<Self> {
        Ok(match e {
            EnergyDensity::Point { center, sigma_reg: None, .. } => Self::Point(*center),
            EnergyDensity::Point { center, sigma_reg: Some(s), .. } => Self::Gaussian(*center, *s),
            EnergyDensity::Gaussian { center, sigma, .. } => Self::Gaussian(*center, *sigma),
            EnergyDensity::Grid(g) => Self::Grid {
                spec: g.spec,
                cells: WeightedIndex::new(&g.values).map_err(|e| Error::invalid(format!("density not samplable: {e}")))?,
            },
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        match self {
            Self::Point(c) => *c,
            Self::Gaussian(c, s) => std::array::from_fn(|i| {
                let z: f64 = rng.sample(StandardNormal);
                c[i] + s * z
            }),
            Self::Grid { spec, cells } => {
                let x = spec.position(cells.sample(rng));
                let h = spec.cell_size();
                std::array::from_fn(|i| x[i] + h * (rng.random::<f64>() - 0.5))
            }
        }
    }
}

/// Samples per independent RNG stream.
pub const MC_CHUNK: u64 = 1 << 16;

/// Chunked so the estimate depends on the seed only, never on the thread
/// count: chunk `c` draws from stream `c` and chunk sums are reduced in order.
fn monte_carlo(a: &EnergyDensity, b: &EnergyDensity, samples: u64, seed: u64) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::invalid("Monte-Carlo backend needs at least 2 samples"));
    }
    if let (EnergyDensity::Grid(ga), EnergyDensity::Grid(gb)) = (a, b) {
        ga.spec.check_same(&gb.spec)?;
    }
    let sa = PositionSampler::new(a)?;
    let sb = PositionSampler::new(b)?;
    if let (PositionSampler::Point(x), PositionSampler::Point(y)) = (&sa, &sb) {
        if x == y {
            return Err(Error::domain("coincident unregularised point sources"));
        }
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let x = sa.sample(&mut rng);
                let y = sb.sample(&mut rng);
                let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
                let f = 1.0 / r;
                s1 += f;
                s2 += f * f;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    let ee = a.total_energy() * b.total_energy();
    Ok(Estimate {
        value: ee * mean,
        std_error: Some(ee * (var / n).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    
    fn consts() -> PhysicalConstants {
        PhysicalConstants::natural()
    }

    #[test]
    fn cell_mean_of_inverse_distance() {
        // 3 ln(2 + √3) − π/2
        let closed = 3.0 * (2.0 + 3f64.sqrt()).ln() - std::f64::consts::FRAC_PI_2;
        assert!((closed - UNIT_CELL_MEAN_INVERSE_DISTANCE).abs() < 1e-14);
        // Midpoint rule over a 60³ subdivision of the unit cell.
        let m = 60;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = |q: usize| (q as f64 + 0.5) / m as f64 - 0.5;
                    acc += 1.0 / (p(i).powi(2) + p(j).powi(2) + p(k).powi(2)).sqrt();
                }
            }
        }
        assert!((acc / (m * m * m) as f64 / closed - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_density_gives_zero_field() {
        let spec = GridSpec::new(8, 4.0).unwrap();
        let z = EnergyDensity::zero_grid(spec);
        assert!(solve_ht_direct(&z, &consts(), &spec).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(solve_ht_spectral(&z, &consts(), &spec).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn point_far_field() {
        let c = consts();
        let spec = GridSpec::new(32, 16.0).unwrap();
        let e = EnergyDensity::point(1.0, [0.0; 3], &c).unwrap();
        let f = solve_ht_spectral(&e, &c, &spec).unwrap();
        // r = L/4 along x
        let v = f.at(16 + 8, 16, 16);
        let expected = c.kappa() / (4.0 * std::f64::consts::PI * 4.0);
        assert!((v / expected - 1.0).abs() < 0.02, "{v} vs {expected}");
    }

    #[test]
    fn gaussian_radial_profile() {
        let c = consts();
        let spec = GridSpec::new(32, 16.0).unwrap();
        let sigma = 1.0;
        let e = EnergyDensity::gaussian(2.0, [0.0; 3], sigma, &c).unwrap();
        let f = solve_ht_direct(&e, &c, &spec).unwrap();
        for r_cells in [1usize, 2, 3, 5, 8, 12] {
            let r = r_cells as f64 * spec.cell_size();
            let expected = c.kappa() * 2.0 / (4.0 * std::f64::consts::PI * r) * libm::erf(r / (2f64.sqrt() * sigma));
            let v = f.at(16 + r_cells, 16, 16);
            assert!((v / expected - 1.0).abs() < 0.02, "r={r}: {v} vs {expected}");
        }
    }

    #[test]
    fn spectral_matches_direct() {
        let c = consts();
        let spec = GridSpec::new(16, 8.0).unwrap();
        let e = EnergyDensity::gaussian(1.0, [0.7, -0.4, 0.2], 0.8, &c).unwrap();
        let a = solve_ht_direct(&e, &c, &spec).unwrap();
        let b = solve_ht_spectral(&e, &c, &spec).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10 * x.abs());
        }
    }

    #[test]
    fn linearity_positivity_and_translation() {
        let c = consts();
        let spec = GridSpec::new(16, 8.0).unwrap();
        let e1 = EnergyDensity::Grid(sample_on_grid(&EnergyDensity::gaussian(1.0, [1.0, 0.0, 0.0], 0.6, &c).unwrap(), &spec).unwrap());
        let e2 = EnergyDensity::Grid(sample_on_grid(&EnergyDensity::gaussian(0.5, [-1.0, 0.5, 0.0], 0.9, &c).unwrap(), &spec).unwrap());
        let (a, b) = (1.7, 0.3);
        let combo = match (&e1, &e2) {
            (EnergyDensity::Grid(g1), EnergyDensity::Grid(g2)) => EnergyDensity::Grid(
                GridDensity::new(spec, g1.values.iter().zip(&g2.values).map(|(x, y)| a * x + b * y).collect()).unwrap(),
            ),
            _ => unreachable!(),
        };
        let f1 = solve_ht_spectral(&e1, &c, &spec).unwrap();
        let f2 = solve_ht_spectral(&e2, &c, &spec).unwrap();
        let fc = solve_ht_spectral(&combo, &c, &spec).unwrap();
        for i in 0..spec.len() {
            let lin = a * f1.values[i] + b * f2.values[i];
            assert!((fc.values[i] - lin).abs() < 1e-10 * lin.abs());
            assert!(fc.values[i] > 0.0);
        }

        // Clear the plane that would wrap around so the shift is a pure translation.
        let EnergyDensity::Grid(g1) = &e1 else { unreachable!() };
        let mut g1 = g1.clone();
        for iz in 0..16 {
            for ix in 0..16 {
                g1.values[spec.index(ix, 15, iz)] = 0.0;
            }
        }
        let f1 = solve_ht_spectral(&EnergyDensity::Grid(g1.clone()), &c, &spec).unwrap();
        let shifted = solve_ht_spectral(&EnergyDensity::Grid(g1.shifted([0, 1, 0])), &c, &spec).unwrap();
        for iz in 0..16 {
            for iy in 0..15 {
                for ix in 0..16 {
                    let (x, y) = (f1.at(ix, iy, iz), shifted.at(ix, iy + 1, iz));
                    assert!((x - y).abs() < 1e-12 * x.abs());
                }
            }
        }
    }

    #[test]
    fn laplacian_residual_is_small() {
        let c = consts();
        let spec = GridSpec::new(32, 16.0).unwrap();
        // Seven-point stencil error is ~(h/σ)²/4; five cells keeps it under 1%.
        let e = EnergyDensity::gaussian(1.0, [0.2, -0.1, 0.1], 2.5, &c).unwrap();
        let f = solve_ht_spectral(&e, &c, &spec).unwrap();
        let rho = sample_on_grid(&e, &spec).unwrap();
        let rel = laplacian_residual(&f, &rho, &c).unwrap();
        assert!(rel < 1e-2, "relative residual {rel}");
    }

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new(4, 2.0).unwrap();
        let f = ScalarFieldX::new(spec, (0..64).map(|i| i as f64).collect()).unwrap();
        let base = dir.path().join("hT");
        f.save(&base, "h_T", "dimensionless").unwrap();
        assert_eq!(ScalarFieldX::load(&base).unwrap(), f);
    }

    #[test]
    fn direct_guard() {
        let spec = GridSpec::new(64, 8.0).unwrap();
        let g = EnergyDensity::gaussian(1.0, [0.0; 3], 1.0, &consts()).unwrap();
        assert!(matches!(
            solve_ht_direct(&g, &consts(), &spec),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn coulomb_pair_and_zero() {
        let c = consts();
        let a = EnergyDensity::point(2.0, [0.0; 3], &c).unwrap();
        let b = EnergyDensity::point(3.0, [0.0, 0.0, 2.5], &c).unwrap();
        let exact = mutual_coulomb(&a, &b, &CoulombBackend::Analytic).unwrap();
        assert!((exact.value - 6.0 / 2.5).abs() < 1e-15);
        let mc = mutual_coulomb(&a, &b, &CoulombBackend::MonteCarlo { samples: 1000, seed: 1 }).unwrap();
        assert!((mc.value - 2.4).abs() < 1e-12);

        let spec = GridSpec::new(32, 16.0).unwrap();
        let a = a.with_regularisation(0.25);
        let b = b.with_regularisation(0.25);
        let grid = mutual_coulomb(&a, &b, &CoulombBackend::Spectral { grid: spec }).unwrap();
        assert!((grid.value / 2.4 - 1.0).abs() < 0.02);
        let z = EnergyDensity::zero_grid(spec);
        assert_eq!(mutual_coulomb(&a, &z, &CoulombBackend::Spectral { grid: spec }).unwrap().value, 0.0);
    }

    #[test]
    fn gaussian_self_energy_matches_monte_carlo() {
        let c = consts();
        let g = EnergyDensity::gaussian(1.0, [0.0; 3], 0.5, &c).unwrap();
        let closed = mutual_coulomb(&g, &g, &CoulombBackend::Analytic).unwrap().value;
        assert!((closed - 1.0 / (0.5 * std::f64::consts::PI.sqrt())).abs() < 1e-14);
        let mc = mutual_coulomb(&g, &g, &CoulombBackend::MonteCarlo { samples: 400_000, seed: 9 }).unwrap();
        let se = mc.std_error.unwrap();
        assert!((mc.value - closed).abs() < 5.0 * se, "{} ± {se} vs {closed}", mc.value);
        assert!((mc.value / closed - 1.0).abs() < 0.02);
    }

    #[test]
    fn monte_carlo_is_seed_deterministic_and_symmetric() {
        let c = consts();
        let a = EnergyDensity::gaussian(1.0, [0.0; 3], 0.3, &c).unwrap();
        let b = EnergyDensity::gaussian(2.0, [1.0, 0.0, 0.0], 0.2, &c).unwrap();
        let be = CoulombBackend::MonteCarlo { samples: 200_000, seed: 42 };
        let x = mutual_coulomb(&a, &b, &be).unwrap();
        let y = mutual_coulomb(&a, &b, &be).unwrap();
        assert_eq!(x, y);
        let z = mutual_coulomb(&b, &a, &be).unwrap();
        assert!((x.value / z.value - 1.0).abs() < 0.005);
    }

    #[test]
    fn grid_monte_carlo_agrees_with_lattice_quadrature() {
        let c = consts();
        let spec = GridSpec::new(32, 16.0).unwrap();
        let a = EnergyDensity::Grid(sample_on_grid(&EnergyDensity::gaussian(1.0, [-1.5, 0.0, 0.0], 0.8, &c).unwrap(), &spec).unwrap());
        let b = EnergyDensity::Grid(sample_on_grid(&EnergyDensity::gaussian(1.0, [1.5, 0.0, 0.0], 1.2, &c).unwrap(), &spec).unwrap());
        let lat = mutual_coulomb(&a, &b, &CoulombBackend::Spectral { grid: spec }).unwrap().value;
        let mc = mutual_coulomb(&a, &b, &CoulombBackend::MonteCarlo { samples: 500_000, seed: 3 }).unwrap();
        assert!((mc.value / lat - 1.0).abs() < 0.01, "{} vs {lat}", mc.value);
    }
}
