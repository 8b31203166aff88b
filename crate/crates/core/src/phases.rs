//! Entangling phases of two static quantum sources and the competing
//! Newton, nonlocal and Schrödinger–Newton predictions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poisson::{mutual_coulomb, CoulombBackend, Estimate};
use crate::sources::{EnergyDensity, LocalizedSourceSpec, PhysicalConstants, QuantumSourceState, SourceComponent};
use crate::table::{Cell, Table};

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("evolution time must be finite and non-negative, got {t}")))
    }
}

/// `Θ_AB = −κt/(4πħ) ∬ E_A(x) E_B(y)/|x − y|`.
pub fn theta_ab(
    a: &EnergyDensity,
    b: &EnergyDensity,
    t: f64,
    consts: &PhysicalConstants,
    backend: &CoulombBackend,
) -> Result<Estimate> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(Estimate { value: 0.0, std_error: None });
    }
    let i = mutual_coulomb(a, b, backend)?;
    Ok(i.scaled(-consts.kappa() * t / (4.0 * std::f64::consts::PI * consts.hbar)))
}

/// `𝓔_S = −κ/(8π) ∬ E_S(x) E_S(y)/|x − y|`.
pub fn self_energy(e: &EnergyDensity, consts: &PhysicalConstants, backend: &CoulombBackend) -> Result<Estimate> {
    let i = mutual_coulomb(e, e, backend)?;
    Ok(i.scaled(-consts.kappa() / (8.0 * std::f64::consts::PI)))
}

/// Phase `−V_Nloc t/ħ` of the ad hoc trace-trace coupling, with the trace of
/// each static stress tensor taken as its energy density.
pub fn nonlocal_phase(
    a: &EnergyDensity,
    b: &EnergyDensity,
    t: f64,
    consts: &PhysicalConstants,
    backend: &CoulombBackend,
) -> Result<Estimate> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(Estimate { value: 0.0, std_error: None });
    }
    let i = mutual_coulomb(a, b, backend)?;
    Ok(i.scaled(consts.g * t / (consts.c.powi(4) * consts.hbar)))
}

/// `Θ_AB / Θ_Newton` for point sources: `−κc⁴/(4πG)`.
pub fn newton_prefactor_ratio(consts: &PhysicalConstants) -> f64 {
    -consts.kappa() * consts.c.powi(4) / (4.0 * std::f64::consts::PI * consts.g)
}

/// `nonlocal / Θ_AB` for any pair of densities: `−4πG/(κc⁴)`.
pub fn nonlocal_prefactor_ratio(consts: &PhysicalConstants) -> f64 {
    1.0 / newton_prefactor_ratio(consts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseModel {
    General,
    Newton,
    Nonlocal,
    SchrodingerNewton,
    ClassicalQuantum,
}

impl PhaseModel {
    pub fn name(&self) -> &'static str {
        match self {
            PhaseModel::General => "general",
            PhaseModel::Newton => "newton",
            PhaseModel::Nonlocal => "nonlocal",
            PhaseModel::SchrodingerNewton => "schrodinger-newton",
            PhaseModel::ClassicalQuantum => "classical-quantum",
        }
    }
}

/// Complex log-amplitudes `Θ_ij` over eigenstate pairs: the real part is a
/// damping (log-magnitude), the imaginary part the phase in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatrix {
    pub model: PhaseModel,
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub entries: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<Vec<f64>>,
}

impl PhaseMatrix {
    pub fn from_phases(model: PhaseModel, rows: usize, cols: usize, phases: Vec<f64>) -> Result<Self> {
        Self::new(model, rows, cols, phases.into_iter().map(|p| Complex64::new(0.0, p)).collect())
    }

    pub fn new(model: PhaseModel, rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("{} entries for a {rows}x{cols} phase matrix", entries.len())));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::domain("phase matrix has non-finite entries"));
        }
        Ok(Self { model, rows, cols, entries, std_error: None })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    pub fn phase(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).im
    }

    pub fn damping(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).re
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        let mut se = self.std_error.as_ref().map(|_| Vec::with_capacity(self.entries.len()));
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
                if let (Some(out), Some(src)) = (se.as_mut(), self.std_error.as_ref()) {
                    out.push(src[i * self.cols + j]);
                }
            }
        }
        Self { model: self.model, rows: self.cols, cols: self.rows, entries, std_error: se }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            model: self.model,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * a).collect(),
            std_error: self.std_error.as_ref().map(|v| v.iter().map(|s| s * a.abs()).collect()),
        }
    }

    /// `Θ₀₀ + Θ₁₁ − Θ₀₁ − Θ₁₀` (phase part) for matrices of at least 2×2;
    /// the single entry for 1×1.
    pub fn entangling_phase(&self) -> f64 {
        if self.rows >= 2 && self.cols >= 2 {
            self.phase(0, 0) + self.phase(1, 1) - self.phase(0, 1) - self.phase(1, 0)
        } else {
            self.phase(0, 0)
        }
    }

    /// Standard error of [`Self::entangling_phase`], treating entries as
    /// independent (an upper bound when they share random numbers).
    pub fn entangling_phase_error(&self) -> Option<f64> {
        let se = self.std_error.as_ref()?;
        let at = |i: usize, j: usize| se[i * self.cols + j];
        Some(if self.rows >= 2 && self.cols >= 2 {
            at(0, 0) + at(1, 1) + at(0, 1) + at(1, 0)
        } else {
            at(0, 0)
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `I(E_i, E_j)` for every component pair. Each pair reuses the backend seed
/// so Monte-Carlo errors are correlated across entries and largely cancel in
/// the entangling combination.
fn coulomb_matrix(
    a: &QuantumSourceState,
    b: &QuantumSourceState,
    backend: &CoulombBackend,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let (na, nb) = (a.len(), b.len());
    let values: Vec<Estimate> = (0..na * nb)
        .into_par_iter()
        .map(|p| mutual_coulomb(&a.components()[p / nb].density, &b.components()[p % nb].density, backend))
        .collect::<Result<_>>()?;
    let se = if values.iter().any(|v| v.std_error.is_some()) {
        Some(values.iter().map(|v| v.std_error.unwrap_or(0.0)).collect())
    } else {
        None
    };
    Ok((values.iter().map(|v| v.value).collect(), se))
}

fn matrix_from_coulomb(
    model: PhaseModel,
    na: usize,
    nb: usize,
    coulomb: &(Vec<f64>, Option<Vec<f64>>),
    scale: f64,
) -> Result<PhaseMatrix> {
    let mut m = PhaseMatrix::from_phases(model, na, nb, coulomb.0.iter().map(|i| i * scale).collect())?;
    m.std_error = coulomb.1.as_ref().map(|v| v.iter().map(|s| s * scale.abs()).collect());
    Ok(m)
}

fn general_scale(t: f64, consts: &PhysicalConstants) -> f64 {
    -consts.kappa() * t / (4.0 * std::f64::consts::PI * consts.hbar)
}

fn g_scale(t: f64, consts: &PhysicalConstants) -> f64 {
    consts.g * t / (consts.c.powi(4) * consts.hbar)
}

/// `Θ_ij = Θ_AB(E_i, E_j)` for every pair of eigen-densities. Self-energies
/// are not included.
pub fn phase_matrix_general(
    a: &QuantumSourceState,
    b: &QuantumSourceState,
    t: f64,
    consts: &PhysicalConstants,
    backend: &CoulombBackend,
) -> Result<PhaseMatrix> {
    check_time(t)?;
    let c = coulomb_matrix(a, b, backend)?;
    matrix_from_coulomb(PhaseModel::General, a.len(), b.len(), &c, general_scale(t, consts))
}

/// Per-pair nonlocal-coupling phases.
pub fn phase_matrix_nonlocal(
    a: &QuantumSourceState,
    b: &QuantumSourceState,
    t: f64,
    consts: &PhysicalConstants,
    backend: &CoulombBackend,
) -> Result<PhaseMatrix> {
    check_time(t)?;
    let c = coulomb_matrix(a, b, backend)?;
    matrix_from_coulomb(PhaseModel::Nonlocal, a.len(), b.len(), &c, g_scale(t, consts))
}

/// Point masses `(m, x)` on each side.
fn newton_points(ma: &[(f64, [f64; 3])], mb: &[(f64, [f64; 3])], t: f64, consts: &PhysicalConstants) -> Result<PhaseMatrix> {
    check_time(t)?;
    let mut phases = Vec::with_capacity(ma.len() * mb.len());
    for (m1, x) in ma {
        for (m2, y) in mb {
            let d = (0..3).map(|i| (x[i] - y[i]).powi(2)).sum::<f64>().sqrt();
            if d == 0.0 {
                return Err(Error::domain(format!("coincident branch centres at {x:?}")));
            }
            phases.push(consts.g * m1 * m2 * t / (consts.hbar * d));
        }
    }
    PhaseMatrix::from_phases(PhaseModel::Newton, ma.len(), mb.len(), phases)
}

/// `Θ_ij = G m_A m_B t/(ħ|x_i − y_j|)`, the phase of `e^{−iV_N t/ħ}` on
/// branch pair `(i, j)`.
pub fn newton_phase(
    a: &LocalizedSourceSpec,
    b: &LocalizedSourceSpec,
    t: f64,
    consts: &PhysicalConstants,
) -> Result<PhaseMatrix> {
    let pa: Vec<_> = a.branches.iter().map(|br| (a.mass, br.center)).collect();
    let pb: Vec<_> = b.branches.iter().map(|br| (b.mass, br.center)).collect();
    newton_points(&pa, &pb, t, consts)
}

/// Masses and centres of a state whose components are all analytic profiles.
fn localized_points(s: &QuantumSourceState, consts: &PhysicalConstants) -> Option<Vec<(f64, [f64; 3])>> {
    s.components()
        .iter()
        .map(|c| {
            c.density
                .gaussian_parameters()
                .map(|(x, _)| (c.density.total_energy() / (consts.c * consts.c), x))
        })
        .collect()
}

fn sn_from_coulomb(
    a: &QuantumSourceState,
    b: &QuantumSourceState,
    coulomb: &[f64],
    t: f64,
    consts: &PhysicalConstants,
) -> Result<PhaseMatrix> {
    let (na, nb) = (a.len(), b.len());
    let wa: Vec<f64> = a.amplitudes().iter().map(|c| c.norm_sqr()).collect();
    let wb: Vec<f64> = b.amplitudes().iter().map(|c| c.norm_sqr()).collect();
    let s = g_scale(t, consts);
    // Each branch of one source feels the mean field of the other's full state.
    let u: Vec<f64> = (0..na).map(|i| s * (0..nb).map(|j| wb[j] * coulomb[i * nb + j]).sum::<f64>()).collect();
    let v: Vec<f64> = (0..nb).map(|j| s * (0..na).map(|i| wa[i] * coulomb[i * nb + j]).sum::<f64>()).collect();
    let phases = (0..na * nb).map(|p| u[p / nb] + v[p % nb]).collect();
    PhaseMatrix::from_phases(PhaseModel::SchrodingerNewton, na, nb, phases)
}

/// First-order Schrödinger–Newton phases with self-interaction dropped:
/// `Θ_ij = u_i + v_j`, separable by construction.
pub fn sn_phase(
    a: &QuantumSourceState,
    b: &QuantumSourceState,
    t: f64,
    consts: &PhysicalConstants,
    backend: &CoulombBackend,
) -> Result<PhaseMatrix> {
    check_time(t)?;
    let (c, _) = coulomb_matrix(a, b, backend)?;
    sn_from_coulomb(a, b, &c, t, consts)
}

/// Entanglement negativity of the normalised `Σ c_i d_j e^{Θ_ij} |i⟩|j⟩`:
/// summed magnitude of the negative eigenvalues of its partial transpose.
pub fn negativity(ca: &[Complex64], cb: &[Complex64], theta: &PhaseMatrix) -> Result<f64> {
    let (na, nb) = (ca.len(), cb.len());
    if theta.rows != na || theta.cols != nb {
        return Err(Error::invalid(format!(
            "{}x{} phase matrix for {na}x{nb} amplitudes",
            theta.rows, theta.cols
        )));
    }
    let mut psi: Vec<Complex64> = (0..na * nb)
        .map(|p| {
            let (i, j) = (p / nb, p % nb);
            ca[i] * cb[j] * theta.get(i, j).exp()
        })
        .collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::invalid("state is not normalisable"));
    }
    psi.iter_mut().for_each(|z| *z /= norm);

    let dim = na * nb;
    let pt = DMatrix::<Complex64>::from_fn(dim, dim, |r, c| {
        let (i, j) = (r / nb, r % nb);
        let (k, l) = (c / nb, c % nb);
        // ⟨i j|ρ^{T_B}|k l⟩ = ⟨i l|ρ|k j⟩
        psi[i * nb + l] * psi[k * nb + j].conj()
    });
    let eig = pt.symmetric_eigen();
    // Eigenvalues of a product state's partial transpose are ≥ 0 exactly;
    // round-off below this floor is not entanglement.
    let floor = 64.0 * f64::EPSILON * dim as f64;
    Ok(eig.eigenvalues.iter().filter(|l| **l < -floor).fold(0.0, |acc, l| acc - l))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRequest {
    pub a: QuantumSourceState,
    pub b: QuantumSourceState,
    pub t: f64,
    pub consts: PhysicalConstants,
    pub backend: CoulombBackend,
    /// Widths for the narrow-source convergence table; empty to skip.
    #[serde(default)]
    pub width_ladder: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelStatus {
    Computed,
    Skipped,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    pub model: PhaseModel,
    pub status: ModelStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PhaseMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negativity: Option<f64>,
    /// Factor that maps this model's phases onto the general prediction for
    /// point sources.
    pub normalisation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entangling_phase: Option<f64>,
}

impl ModelRow {
    fn computed(m: PhaseMatrix, neg: f64, normalisation: f64) -> Self {
        Self {
            model: m.model,
            status: ModelStatus::Computed,
            reason: None,
            negativity: Some(neg),
            normalisation,
            entangling_phase: Some(m.entangling_phase()),
            matrix: Some(m),
        }
    }

    fn skipped(model: PhaseModel, reason: String) -> Self {
        Self {
            model,
            status: ModelStatus::Skipped,
            reason: Some(reason),
            matrix: None,
            negativity: None,
            normalisation: 1.0,
            entangling_phase: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDeviation {
    pub a: PhaseModel,
    pub b: PhaseModel,
    /// `max_ij |N_a Θ^a_ij − N_b Θ^b_ij| / max_ij |N_a Θ^a_ij|`.
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfEnergyEntry {
    pub source: String,
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub sigma: f64,
    pub entangling_phase: f64,
    pub std_error: f64,
    pub newton_normalised: f64,
    pub relative_deviation: f64,
}

pub const CQ_NOTE: &str = "stub: stochastic open-system dynamics; decoherence-dominated, no entanglement";
pub const VACUUM_NOTE: &str = "vacuum energy E_vac is divergent and enters only as a subtracted reference; it is never evaluated";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub t: f64,
    pub models: Vec<ModelRow>,
    pub deviations: Vec<ModelDeviation>,
    pub self_energies: Vec<SelfEnergyEntry>,
    pub newton_prefactor_ratio: f64,
    pub nonlocal_prefactor_ratio: f64,
    pub convergence: Vec<ConvergenceRow>,
    pub vacuum_reference: String,
}

impl PhaseReport {
    pub fn model(&self, m: PhaseModel) -> Option<&ModelRow> {
        self.models.iter().find(|r| r.model == m)
    }

    pub fn deviation(&self, a: PhaseModel, b: PhaseModel) -> Option<f64> {
        self.deviations
            .iter()
            .find(|d| (d.a, d.b) == (a, b) || (d.a, d.b) == (b, a))
            .map(|d| d.max_relative_deviation)
    }

    /// One row per model and eigenpair.
    pub fn phase_table(&self) -> Table {
        let mut t = Table::new("phase_matrix", &["model", "i", "j", "damping", "phase_rad", "std_error", "normalised_phase_rad", "note"]);
        for row in &self.models {
            if let Some(m) = &row.matrix {
                for i in 0..m.rows {
                    for j in 0..m.cols {
                        let se = m.std_error.as_ref().map_or(0.0, |v| v[i * m.cols + j]);
                        t.push(vec![
                            m.model.name().into(),
                            i.into(),
                            j.into(),
                            m.damping(i, j).into(),
                            m.phase(i, j).into(),
                            se.into(),
                            (m.phase(i, j) * row.normalisation).into(),
                            "".into(),
                        ]);
                    }
                }
            } else {
                let note = row.reason.clone().unwrap_or_else(|| CQ_NOTE.to_string());
                let blank = || Cell::Text(String::new());
                t.push(vec![row.model.name().into(), blank(), blank(), blank(), blank(), blank(), blank(), note.into()]);
            }
        }
        t
    }

    pub fn convergence_table(&self) -> Table {
        let mut t = Table::new("convergence", &["sigma", "entangling_phase_rad", "std_error", "newton_normalised_rad", "relative_deviation"]);
        for r in &self.convergence {
            t.push(vec![
                r.sigma.into(),
                r.entangling_phase.into(),
                r.std_error.into(),
                r.newton_normalised.into(),
                r.relative_deviation.into(),
            ]);
        }
        t
    }
}

fn with_width(s: &QuantumSourceState, sigma: f64, consts: &PhysicalConstants) -> Result<QuantumSourceState> {
    let comps = s
        .components()
        .iter()
        .map(|c| {
            let (center, _) = c
                .density
                .gaussian_parameters()
                .ok_or_else(|| Error::invalid("width ladder needs analytic profiles"))?;
            let mass = c.density.total_energy() / (consts.c * consts.c);
            Ok(SourceComponent {
                index: c.index,
                amplitude: c.amplitude,
                density: EnergyDensity::gaussian(mass, center, sigma, consts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    QuantumSourceState::new(comps)
}

fn relative_deviation(x: &PhaseMatrix, nx: f64, y: &PhaseMatrix, ny: f64) -> f64 {
    let scale = x.max_abs() * nx.abs();
    let diff = x
        .entries
        .iter()
        .zip(&y.entries)
        .map(|(p, q)| (p * nx - q * ny).norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

/// Phase matrices of every applicable model, their negativities and
/// pairwise deviations, self-energies, and the narrow-width convergence
/// table. Newton-type models are compared after rescaling by the
/// point-source prefactor ratio.
pub fn compare_models(req: &PhaseRequest) -> Result<PhaseReport> {
    check_time(req.t)?;
    let (a, b, t, consts) = (&req.a, &req.b, req.t, &req.consts);
    let (ca, cb) = (a.amplitudes(), b.amplitudes());
    let ratio = newton_prefactor_ratio(consts);

    let coulomb = coulomb_matrix(a, b, &req.backend)?;
    let general = matrix_from_coulomb(PhaseModel::General, a.len(), b.len(), &coulomb, general_scale(t, consts))?;
    let nonlocal = matrix_from_coulomb(PhaseModel::Nonlocal, a.len(), b.len(), &coulomb, g_scale(t, consts))?;
    let sn = sn_from_coulomb(a, b, &coulomb.0, t, consts)?;

    let mut models = vec![ModelRow::computed(general.clone(), negativity(&ca, &cb, &general)?, 1.0)];
    let newton = match (localized_points(a, consts), localized_points(b, consts)) {
        (Some(pa), Some(pb)) => match newton_points(&pa, &pb, t, consts) {
            Ok(m) => {
                models.push(ModelRow::computed(m.clone(), negativity(&ca, &cb, &m)?, ratio));
                Some(m)
            }
            Err(e) => {
                models.push(ModelRow::skipped(PhaseModel::Newton, e.to_string()));
                None
            }
        },
        _ => {
            models.push(ModelRow::skipped(
                PhaseModel::Newton,
                "Newton potential needs localised branch centres; lattice densities have none".into(),
            ));
            None
        }
    };
    models.push(ModelRow::computed(nonlocal.clone(), negativity(&ca, &cb, &nonlocal)?, ratio));
    models.push(ModelRow::computed(sn.clone(), negativity(&ca, &cb, &sn)?, ratio));
    models.push(ModelRow {
        model: PhaseModel::ClassicalQuantum,
        status: ModelStatus::Stub,
        reason: Some(CQ_NOTE.into()),
        matrix: None,
        negativity: Some(0.0),
        normalisation: 1.0,
        entangling_phase: None,
    });

    let computed: Vec<(&PhaseMatrix, f64)> = models
        .iter()
        .filter_map(|r| r.matrix.as_ref().map(|m| (m, r.normalisation)))
        .collect();
    let mut deviations = Vec::new();
    for x in 0..computed.len() {
        for y in x + 1..computed.len() {
            let ((mx, nx), (my, ny)) = (computed[x], computed[y]);
            deviations.push(ModelDeviation {
                a: mx.model,
                b: my.model,
                max_relative_deviation: relative_deviation(mx, nx, my, ny),
            });
        }
    }

    let mut self_energies = Vec::new();
    for (label, s) in [("A", a), ("B", b)] {
        for c in s.components() {
            let (value, note) = match self_energy(&c.density, consts, &req.backend) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            self_energies.push(SelfEnergyEntry { source: label.into(), index: c.index, value, note });
        }
    }

    let mut convergence = Vec::new();
    if let Some(nm) = &newton {
        for &sigma in &req.width_ladder {
            let ga = with_width(a, sigma, consts)?;
            let gb = with_width(b, sigma, consts)?;
            let m = phase_matrix_general(&ga, &gb, t, consts, &req.backend)?;
            let phase = m.entangling_phase();
            let reference = nm.entangling_phase() * ratio;
            convergence.push(ConvergenceRow {
                sigma,
                entangling_phase: phase,
                std_error: m.entangling_phase_error().unwrap_or(0.0),
                newton_normalised: reference,
                relative_deviation: ((phase - reference) / reference).abs(),
            });
        }
    }

    Ok(PhaseReport {
        t,
        models,
        deviations,
        self_energies,
        newton_prefactor_ratio: ratio,
        nonlocal_prefactor_ratio: 1.0 / ratio,
        convergence,
        vacuum_reference: VACUUM_NOTE.into(),
    })
}

/// Gaussian pair at fixed separation, one width per entry of `sigmas`:
/// `(σ, Θ_AB(σ), standard error)`. The point-pair value is `sigma = 0`
/// under the analytic backend.
pub fn narrow_limit_study(
    masses: (f64, f64),
    separation: f64,
    sigmas: &[f64],
    t: f64,
    consts: &PhysicalConstants,
    backend: &CoulombBackend,
) -> Result<Vec<(f64, Estimate)>> {
    sigmas
        .iter()
        .map(|&s| {
            let (a, b) = if s == 0.0 {
                (
                    EnergyDensity::point(masses.0, [0.0; 3], consts)?,
                    EnergyDensity::point(masses.1, [separation, 0.0, 0.0], consts)?,
                )
            } else {
                (
                    EnergyDensity::gaussian(masses.0, [0.0; 3], s, consts)?,
                    EnergyDensity::gaussian(masses.1, [separation, 0.0, 0.0], s, consts)?,
                )
            };
            Ok((s, theta_ab(&a, &b, t, consts, backend)?))
        })
        .collect()
}
