//! Scenario configuration: JSON schema, dotted-path overrides and conversion
//! into library types.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use qgphase::grid::GridSpec;
use qgphase::poisson::CoulombBackend;
use qgphase::sources::{LocalizedBranch, LocalizedSourceSpec, NaturalUnits};
use qgphase::{EnergyDensity, PhysicalConstants};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 20240917;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_output() -> PathBuf {
    PathBuf::from("qgphase-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for every Monte-Carlo estimate in the run; echoed in all outputs.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub constants: ConstantsConfig,
    /// Output directory; `report.json`, `tables/` and `grids/` go here.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub scenario: Scenario,
}

/// Exactly one scenario kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    PhaseCompare(PhaseCompareConfig),
    Poisson(PoissonConfig),
    OverlapSweep(OverlapSweepConfig),
    OpalgVerify(OpalgConfig),
    Negativity(NegativityConfig),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::PhaseCompare(_) => "phase-compare",
            Scenario::Poisson(_) => "poisson",
            Scenario::OverlapSweep(_) => "overlap-sweep",
            Scenario::OpalgVerify(_) => "opalg-verify",
            Scenario::Negativity(_) => "negativity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(tag = "system", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstantsConfig {
    /// G = c = ħ = 1.
    #[default]
    Natural,
    /// SI values throughout.
    Si,
    /// SI constants expressed in units of the given mass and length scales.
    Scaled { mass_scale_kg: f64, length_scale_m: f64 },
    Custom { g: f64, c: f64, hbar: f64 },
}

impl ConstantsConfig {
    pub fn build(&self) -> Result<(PhysicalConstants, Option<NaturalUnits>), CliError> {
        Ok(match self {
            ConstantsConfig::Natural => (PhysicalConstants::natural(), None),
            ConstantsConfig::Si => (PhysicalConstants::si(), None),
            ConstantsConfig::Scaled { mass_scale_kg, length_scale_m } => {
                let u = NaturalUnits::new(*mass_scale_kg, *length_scale_m).map_err(CliError::config)?;
                (u.constants(), Some(u))
            }
            ConstantsConfig::Custom { g, c, hbar } => {
                (PhysicalConstants::new(*g, *c, *hbar).map_err(CliError::config)?, None)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes per axis (power of two).
    pub n: usize,
    pub box_length: f64,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.n, self.box_length).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    Analytic,
    Direct { grid: GridConfig },
    Spectral { grid: GridConfig },
    /// The seed comes from the top-level `seed`.
    MonteCarlo { samples: u64 },
}

impl BackendConfig {
    pub fn build(&self, seed: u64) -> Result<CoulombBackend, CliError> {
        Ok(match self {
            BackendConfig::Analytic => CoulombBackend::Analytic,
            BackendConfig::Direct { grid } => CoulombBackend::Direct { grid: grid.spec()? },
            BackendConfig::Spectral { grid } => CoulombBackend::Spectral { grid: grid.spec()? },
            BackendConfig::MonteCarlo { samples } => CoulombBackend::MonteCarlo { samples: *samples, seed },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub center: [f64; 3],
    /// Gaussian width; 0 for a point branch.
    #[serde(default)]
    pub width: f64,
    /// Complex amplitude `[re, im]`; omitted on every branch for an equal
    /// superposition.
    #[serde(default)]
    pub amplitude: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub mass: f64,
    pub branches: Vec<BranchConfig>,
}

impl SourceConfig {
    pub fn build(&self) -> Result<LocalizedSourceSpec, CliError> {
        let explicit = self.branches.iter().filter(|b| b.amplitude.is_some()).count();
        if explicit != 0 && explicit != self.branches.len() {
            return Err(CliError::Config("give an amplitude on every branch or on none".into()));
        }
        let equal = Complex64::new((self.branches.len().max(1) as f64).powf(-0.5), 0.0);
        let branches = self
            .branches
            .iter()
            .map(|b| LocalizedBranch {
                amplitude: b.amplitude.map(|[re, im]| Complex64::new(re, im)).unwrap_or(equal),
                center: b.center,
                width: b.width,
            })
            .collect();
        LocalizedSourceSpec::new(self.mass, branches).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PhaseCompareConfig {
    pub a: SourceConfig,
    pub b: SourceConfig,
    pub t: f64,
    pub backend: BackendConfig,
    /// Widths for the narrow-source convergence table.
    #[serde(default)]
    pub width_ladder: Vec<f64>,
    /// Optional second width for the functional-form check: every branch
    /// is re-evaluated with this width.
    #[serde(default)]
    pub alternate_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NegativityConfig {
    pub a: SourceConfig,
    pub b: SourceConfig,
    pub times: Vec<f64>,
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    Point { mass: f64, center: [f64; 3] },
    Gaussian { mass: f64, center: [f64; 3], sigma: f64 },
    /// Raw-f64 grid with its JSON sidecar, path relative to the config file.
    GridFile { path: PathBuf },
}

impl DensityConfig {
    pub fn build(&self, consts: &PhysicalConstants, base: &Path) -> Result<EnergyDensity, CliError> {
        match self {
            DensityConfig::Point { mass, center } => EnergyDensity::point(*mass, *center, consts).map_err(CliError::config),
            DensityConfig::Gaussian { mass, center, sigma } => {
                EnergyDensity::gaussian(*mass, *center, *sigma, consts).map_err(CliError::config)
            }
            DensityConfig::GridFile { path } => {
                let full = base.join(path);
                let (data, _) = qgphase::grid::grid_paths(&full);
                if !data.exists() {
                    return Err(CliError::Config(format!("referenced grid file {} does not exist", data.display())));
                }
                qgphase::sources::GridDensity::load(&full).map(EnergyDensity::Grid).map_err(CliError::config)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Direct,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PoissonConfig {
    pub density: DensityConfig,
    pub grid: GridConfig,
    pub solvers: Vec<SolverKind>,
    /// Write the field grids to `grids/`.
    #[serde(default = "yes")]
    pub write_grids: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OverlapSweepConfig {
    pub mass: f64,
    pub position: [f64; 3],
    pub matter_width: f64,
    pub displacements: Vec<[f64; 3]>,
    pub widths: Vec<f64>,
    pub grids: Vec<GridConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OpalgConfig {
    /// Wavevector of the single quantised TT mode.
    pub k: [f64; 3],
    pub box_length: f64,
    /// Oscillator truncation.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// TT amplitude `e:T` of the excited probe branch.
    pub amplitude: f64,
    /// Transverse trace `P:T` of the excited probe branch.
    #[serde(default)]
    pub trace: f64,
    /// Constraint-determined trace field `𝗁^T(k)` of the source.
    #[serde(default)]
    pub trace_shift: f64,
    /// Free energy gap between the probe branches.
    #[serde(default)]
    pub gap: f64,
    /// Defect sweep for the Zassenhaus order certificate.
    pub defect_times: TimeLadder,
    /// Sweep for the phase, damping and driven-oscillator checks.
    pub phase_times: TimeLadder,
}

fn default_dim() -> usize {
    qgphase::opalg::DEFAULT_OSCILLATOR_DIM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TimeLadder {
    pub t0: f64,
    pub t1: f64,
    pub n: usize,
}

impl TimeLadder {
    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        if !(self.t0 > 0.0 && self.t1 > self.t0) || self.n < 2 {
            return Err(CliError::Config("time ladder needs 0 < t0 < t1 and n ≥ 2".into()));
        }
        Ok(qgphase::opalg::geometric_times(self.t0, self.t1, self.n))
    }
}

/// Parse a config from text; syntax and schema errors carry line and column.
pub fn parse(text: &str, origin: &str) -> Result<ScenarioConfig, CliError> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Config(format!("{origin}:{}:{}: {}", e.line(), e.column(), strip_position(&e.to_string())))
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

/// Apply `path=value` overrides. Only existing scalar (or null) fields may
/// be replaced; the value is read as JSON, falling back to a plain string.
pub fn apply_overrides(cfg: ScenarioConfig, sets: &[String]) -> Result<ScenarioConfig, CliError> {
    if sets.is_empty() {
        return Ok(cfg);
    }
    let mut root = serde_json::to_value(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    for s in sets {
        let (path, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set {s}: expected path=value")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let slot = lookup(&mut root, path)?;
        if slot.is_object() || slot.is_array() {
            return Err(CliError::Config(format!("--set {path}: only scalar fields can be overridden")));
        }
        *slot = value;
    }
    serde_json::from_value(root).map_err(|e| CliError::Config(format!("after --set overrides: {e}")))
}

fn lookup<'a>(root: &'a mut Value, path: &str) -> Result<&'a mut Value, CliError> {
    let mut cur = root;
    for seg in path.split('.') {
        let missing = || CliError::Config(format!("--set {path}: no field `{seg}`"));
        cur = match cur {
            Value::Object(map) => map.get_mut(seg).ok_or_else(missing)?,
            Value::Array(items) => {
                let i: usize = seg.parse().map_err(|_| missing())?;
                items.get_mut(i).ok_or_else(missing)?
            }
            _ => return Err(missing()),
        };
    }
    Ok(cur)
}

pub fn schema() -> Value {
    serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serialises")
}
