//! Energy densities (eigenvalues of the energy-density operator) and quantum
//! source states expanded over them.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{read_raw_grid, write_raw_grid, GridHeader, GridSpec};

/// Gravitational constant, speed of light and reduced Planck constant in a
/// consistent unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub g: f64,
    pub c: f64,
    pub hbar: f64,
}

pub const G_SI: f64 = 6.674_30e-11;
pub const C_SI: f64 = 299_792_458.0;
pub const HBAR_SI: f64 = 1.054_571_817e-34;

impl PhysicalConstants {
    pub fn new(g: f64, c: f64, hbar: f64) -> Result<Self> {
        for (name, v) in [("G", g), ("c", c), ("hbar", hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { g, c, hbar })
    }

    /// `G = c = ħ = 1`.
    pub fn natural() -> Self {
        Self { g: 1.0, c: 1.0, hbar: 1.0 }
    }

    pub fn si() -> Self {
        Self { g: G_SI, c: C_SI, hbar: HBAR_SI }
    }

    /// Linearised-gravity coupling `κ = 16πG/c⁴`.
    #[inline]
    pub fn kappa(&self) -> f64 {
        16.0 * std::f64::consts::PI * self.g / self.c.powi(4)
    }
}

/// Rescaled units with `c = 1` and user-chosen mass and length scales.
/// Converting SI inputs through this keeps `κ` and `ħ` of order one instead
/// of ~1e−43.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalUnits {
    pub mass_scale_kg: f64,
    pub length_scale_m: f64,
}

impl NaturalUnits {
    pub fn new(mass_scale_kg: f64, length_scale_m: f64) -> Result<Self> {
        if !(mass_scale_kg > 0.0 && length_scale_m > 0.0) {
            return Err(Error::invalid("unit scales must be positive"));
        }
        Ok(Self { mass_scale_kg, length_scale_m })
    }

    pub fn time_scale_s(&self) -> f64 {
        self.length_scale_m / C_SI
    }

    pub fn energy_scale_j(&self) -> f64 {
        self.mass_scale_kg * C_SI * C_SI
    }

    /// SI constants expressed in these units.
    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants {
            g: G_SI * self.mass_scale_kg / (self.length_scale_m * C_SI * C_SI),
            c: 1.0,
            hbar: HBAR_SI / (self.mass_scale_kg * self.length_scale_m * C_SI),
        }
    }

    pub fn mass(&self, kg: f64) -> f64 {
        kg / self.mass_scale_kg
    }

    pub fn length(&self, m: f64) -> f64 {
        m / self.length_scale_m
    }

    pub fn time(&self, s: f64) -> f64 {
        s / self.time_scale_s()
    }

    pub fn energy_to_si(&self, e: f64) -> f64 {
        e * self.energy_scale_j()
    }
}

/// Energy density sampled on a lattice (values in energy/volume).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} lattice sites",
                values.len(),
                spec.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("energy density must be finite and non-negative, found {v}")));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![0.0; spec.len()] }
    }

    pub fn total_energy(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn save(&self, base: &Path, units: &str, consts: &PhysicalConstants) -> Result<()> {
        let mass = self.total_energy() / (consts.c * consts.c);
        let header = GridHeader::new("energy_density", &self.spec, units, Some(mass));
        write_raw_grid(base, &header, &self.values)
    }

    pub fn load(base: &Path) -> Result<Self> {
        let (header, values) = read_raw_grid(base)?;
        Self::new(header.spec()?, values)
    }

    /// Periodic shift by whole cells.
    pub fn shifted(&self, by: [i64; 3]) -> Self {
        let spec = self.spec;
        let n = spec.n as i64;
        let mut out = vec![0.0; spec.len()];
        for (idx, v) in self.values.iter().enumerate() {
            let c = spec.coords(idx);
            let t: [usize; 3] = std::array::from_fn(|a| (c[a] as i64 + by[a]).rem_euclid(n) as usize);
            out[spec.index(t[0], t[1], t[2])] = *v;
        }
        Self { spec, values: out }
    }
}

/// Eigenvalue `E(x)` of the energy-density operator.
///
/// Analytic profiles store their rest energy `m c²`; a point source is a
/// Gaussian of width `sigma_reg` (two lattice cells when left unset and
/// the profile is gridded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyDensity {
    Point {
        rest_energy: f64,
        center: [f64; 3],
        #[serde(default)]
        sigma_reg: Option<f64>,
    },
    Gaussian {
        rest_energy: f64,
        center: [f64; 3],
        sigma: f64,
    },
    Grid(GridDensity),
}

/// Default point-source regularisation width in lattice cells.
pub const POINT_REGULARISATION_CELLS: f64 = 2.0;

impl EnergyDensity {
    pub fn point(mass: f64, center: [f64; 3], consts: &PhysicalConstants) -> Result<Self> {
        check_mass(mass)?;
        Ok(Self::Point {
            rest_energy: mass * consts.c * consts.c,
            center,
            sigma_reg: None,
        })
    }

    pub fn gaussian(mass: f64, center: [f64; 3], sigma: f64, consts: &PhysicalConstants) -> Result<Self> {
        check_mass(mass)?;
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("gaussian width must be positive, got {sigma}")));
        }
        Ok(Self::Gaussian {
            rest_energy: mass * consts.c * consts.c,
            center,
            sigma,
        })
    }

    pub fn zero_grid(spec: GridSpec) -> Self {
        Self::Grid(GridDensity::zeros(spec))
    }

    pub fn with_regularisation(self, sigma_reg: f64) -> Self {
        match self {
            Self::Point { rest_energy, center, .. } => Self::Point {
                rest_energy,
                center,
                sigma_reg: Some(sigma_reg),
            },
            other => other,
        }
    }

    pub fn total_energy(&self) -> f64 {
        match self {
            Self::Point { rest_energy, .. } | Self::Gaussian { rest_energy, .. } => *rest_energy,
            Self::Grid(g) => g.total_energy(),
        }
    }

    /// Centre and width of an analytic profile; `None` for lattice data.
    /// Unregularised points report width 0.
    pub fn gaussian_parameters(&self) -> Option<([f64; 3], f64)> {
        match self {
            Self::Point { center, sigma_reg, .. } => Some((*center, sigma_reg.unwrap_or(0.0))),
            Self::Gaussian { center, sigma, .. } => Some((*center, *sigma)),
            Self::Grid(_) => None,
        }
    }

    /// Scale the density by a non-negative factor.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::invalid("densities scale by non-negative factors only"));
        }
        Ok(match self {
            Self::Point { rest_energy, center, sigma_reg } => Self::Point {
                rest_energy: rest_energy * a,
                center: *center,
                sigma_reg: *sigma_reg,
            },
            Self::Gaussian { rest_energy, center, sigma } => Self::Gaussian {
                rest_energy: rest_energy * a,
                center: *center,
                sigma: *sigma,
            },
            Self::Grid(g) => Self::Grid(GridDensity {
                spec: g.spec,
                values: g.values.iter().map(|v| v * a).collect(),
            }),
        })
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if mass.is_finite() && mass >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("mass must be finite and non-negative, got {mass}")))
    }
}

/// Total mass `∫E d³x / c²`.
pub fn total_mass(e: &EnergyDensity, consts: &PhysicalConstants) -> f64 {
    e.total_energy() / (consts.c * consts.c)
}

/// Normalised Gaussian `(2πσ²)^{-3/2} exp(−r²/2σ²)`.
pub fn gaussian_profile(r2: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (2.0 * std::f64::consts::PI * s2).powf(-1.5) * (-0.5 * r2 / s2).exp()
}

/// Sample an analytic profile on the lattice and renormalise so the discrete
/// integral equals the rest energy exactly. Lattice input must match `spec`.
pub fn sample_on_grid(e: &EnergyDensity, spec: &GridSpec) -> Result<GridDensity> {
    spec.require_power_of_two()?;
    let (energy, center, sigma) = match e {
        EnergyDensity::Grid(g) => {
            g.spec.check_same(spec)?;
            return Ok(g.clone());
        }
        EnergyDensity::Gaussian { rest_energy, center, sigma } => (*rest_energy, *center, *sigma),
        EnergyDensity::Point { rest_energy, center, sigma_reg } => (
            *rest_energy,
            *center,
            sigma_reg.unwrap_or(POINT_REGULARISATION_CELLS * spec.cell_size()),
        ),
    };
    let half = 0.5 * spec.box_length;
    if spec.box_length <= 6.0 * sigma || center.iter().any(|c| c.abs() + 3.0 * sigma > half) {
        return Err(Error::ProfileTruncated(format!(
            "gaussian of width {sigma} at {center:?} does not fit a box of side {}",
            spec.box_length
        )));
    }
    let mut values: Vec<f64> = (0..spec.len())
        .map(|idx| {
            let x = spec.position(idx);
            let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
            gaussian_profile(r2, sigma)
        })
        .collect();
    let raw: f64 = values.iter().sum::<f64>() * spec.cell_volume();
    if raw > 0.0 {
        let scale = energy / raw;
        values.iter_mut().for_each(|v| *v *= scale);
    }
    GridDensity::new(*spec, values)
}

/// One term `c_i |E_i⟩` of a source state; `index` identifies the eigenstate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceComponent {
    pub index: usize,
    pub amplitude: Complex64,
    pub density: EnergyDensity,
}

/// Finite expansion of a source state over energy-density eigenstates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumSourceState {
    components: Vec<SourceComponent>,
}

pub const NORMALISATION_TOLERANCE: f64 = 1e-12;

impl QuantumSourceState {
    pub fn new(components: Vec<SourceComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("a source state needs at least one component"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &components {
            if !seen.insert(c.index) {
                return Err(Error::invalid(format!("eigenstate index {} appears twice", c.index)));
            }
        }
        let norm: f64 = components.iter().map(|c| c.amplitude.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORMALISATION_TOLERANCE {
            return Err(Error::invalid(format!("amplitudes not normalised: Σ|c|² = {norm}")));
        }
        Ok(Self { components })
    }

    /// Normalise the amplitudes before validating.
    pub fn normalised(mut components: Vec<SourceComponent>) -> Result<Self> {
        let norm: f64 = components.iter().map(|c| c.amplitude.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("cannot normalise a zero state"));
        }
        components.iter_mut().for_each(|c| c.amplitude /= norm);
        Self::new(components)
    }

    /// Single eigenstate with unit amplitude.
    pub fn eigenstate(index: usize, density: EnergyDensity) -> Self {
        Self {
            components: vec![SourceComponent {
                index,
                amplitude: Complex64::new(1.0, 0.0),
                density,
            }],
        }
    }

    pub fn components(&self) -> &[SourceComponent] {
        &self.components
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.components.iter().map(|c| c.amplitude).collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// `⟨ψ|φ⟩ = Σ_i ψ_i* φ_i` over eigenstate indices shared by both states.
pub fn source_overlap(psi: &QuantumSourceState, phi: &QuantumSourceState) -> Complex64 {
    let phi_by_index: BTreeMap<usize, Complex64> =
        phi.components.iter().map(|c| (c.index, c.amplitude)).collect();
    psi.components
        .iter()
        .filter_map(|c| phi_by_index.get(&c.index).map(|a| c.amplitude.conj() * a))
        .sum()
}

/// Branch of a superposition of localised semiclassical states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizedBranch {
    pub amplitude: Complex64,
    pub center: [f64; 3],
    pub width: f64,
}

/// A mass `m` in the superposition `Σ_i c_i |α_{x_i}⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedSourceSpec {
    pub mass: f64,
    pub branches: Vec<LocalizedBranch>,
}

impl LocalizedSourceSpec {
    pub fn new(mass: f64, branches: Vec<LocalizedBranch>) -> Result<Self> {
        check_mass(mass)?;
        if branches.is_empty() {
            return Err(Error::invalid("a localised source needs at least one branch"));
        }
        for b in &branches {
            if !(b.width.is_finite() && b.width >= 0.0) || b.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("branch {b:?} has a non-finite centre or width")));
            }
        }
        let norm: f64 = branches.iter().map(|b| b.amplitude.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORMALISATION_TOLERANCE {
            return Err(Error::invalid(format!("branch amplitudes not normalised: Σ|c|² = {norm}")));
        }
        Ok(Self { mass, branches })
    }

    /// Equal-weight superposition of branches sharing one width.
    pub fn equal_superposition(mass: f64, centers: &[[f64; 3]], width: f64) -> Result<Self> {
        let a = Complex64::new((centers.len() as f64).powf(-0.5), 0.0);
        Self::new(
            mass,
            centers
                .iter()
                .map(|&center| LocalizedBranch { amplitude: a, center, width })
                .collect(),
        )
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.branches.iter().map(|b| b.amplitude).collect()
    }

    /// Density of branch `i`: a Gaussian of the branch width, or a point for
    /// zero width.
    pub fn branch_density(&self, i: usize, consts: &PhysicalConstants) -> Result<EnergyDensity> {
        let b = &self.branches[i];
        if b.width > 0.0 {
            EnergyDensity::gaussian(self.mass, b.center, b.width, consts)
        } else {
            EnergyDensity::point(self.mass, b.center, consts)
        }
    }

    /// Each branch taken as its own energy-density eigenstate, indexed by
    /// branch position.
    pub fn to_quantum_state(&self, consts: &PhysicalConstants) -> Result<QuantumSourceState> {
        let components = (0..self.branches.len())
            .map(|i| {
                Ok(SourceComponent {
                    index: i,
                    amplitude: self.branches[i].amplitude,
                    density: self.branch_density(i, consts)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        QuantumSourceState::new(components)
    }

    pub fn with_width(&self, width: f64) -> Self {
        Self {
            mass: self.mass,
            branches: self.branches.iter().map(|b| LocalizedBranch { width, ..*b }).collect(),
        }
    }
}
