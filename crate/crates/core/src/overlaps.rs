//! Inner products of joint source-field states in a mode-discretised
//! momentum representation.
//!
//! A field state sourced by `E` is the TT vacuum times the trace-part shift
//! `exp(−(i/2ħ) Σ_k π_T(k) 𝗁^T_E(k))`. Integrating the trace momentum gives
//! a delta functional `δ(𝗁^T_a − 𝗁^T_b)`, regularised here as a Gaussian of
//! width `w` per mode.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, GridSpec};
use crate::sources::{sample_on_grid, source_overlap, EnergyDensity, PhysicalConstants, QuantumSourceState};
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeData {
    /// Flat lattice index of the wavevector.
    pub index: usize,
    pub k_norm: f64,
    /// Coefficient `a` in the TT vacuum factor `exp(−a π²)`, `a = κ/(ħ c|k|)`.
    pub vacuum_width: f64,
    /// `𝗁^T_E(k) / 2ħ`, the coefficient of `−iπ_T(k)` in the shift phase.
    pub shift: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGaussianState {
    pub spec: GridSpec,
    pub hbar: f64,
    /// Every lattice mode except `k = 0`.
    pub modes: Vec<ModeData>,
}

impl ModeGaussianState {
    /// `𝗁^T_E(k)` for mode `m`.
    pub fn trace_amplitude(&self, m: usize) -> Complex64 {
        self.modes[m].shift * (2.0 * self.hbar)
    }

    pub fn is_vacuum(&self) -> bool {
        self.modes.iter().all(|m| m.shift == Complex64::new(0.0, 0.0))
    }
}

/// Per-mode trace amplitudes `𝗁^T(k) = κ Ê(k)/|k|²` of the lattice density,
/// with `Ê` the continuum-normalised transform referenced to `x = 0`.
fn trace_modes(e: &EnergyDensity, consts: &PhysicalConstants, spec: &GridSpec) -> Result<Vec<(usize, f64, Complex64)>> {
    let rho = sample_on_grid(e, spec)?;
    let ek = forward_transform(spec, &rho.values);
    let kappa = consts.kappa();
    Ok((1..spec.len())
        .map(|idx| {
            let k2 = spec.wavevector::<f64>(idx).norm_sq();
            (idx, k2.sqrt(), ek[idx] * (kappa / k2))
        })
        .collect())
}

/// Field state sourced by the eigen-density `E`.
pub fn build_field_state(e: &EnergyDensity, consts: &PhysicalConstants, spec: &GridSpec) -> Result<ModeGaussianState> {
    let modes = trace_modes(e, consts, spec)?
        .into_iter()
        .map(|(index, k_norm, h)| ModeData {
            index,
            k_norm,
            vacuum_width: consts.kappa() / (consts.hbar * consts.c * k_norm),
            shift: h / (2.0 * consts.hbar),
        })
        .collect();
    Ok(ModeGaussianState { spec: *spec, hbar: consts.hbar, modes })
}

fn check_w(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("regularisation width must be positive, got {w}")))
    }
}

/// Log of the gravitational factor `⟨Ψ_a|Ψ_b⟩_G`: TT vacua are shared and
/// normalised, so only `−Σ_k |𝗁^T_a(k) − 𝗁^T_b(k)|²/(4w²)` survives.
pub fn gravity_log_factor(a: &ModeGaussianState, b: &ModeGaussianState, w: f64) -> Result<f64> {
    check_w(w)?;
    a.spec.check_same(&b.spec)?;
    let mut acc = 0.0;
    for (m, (x, y)) in a.modes.iter().zip(&b.modes).enumerate() {
        if x.vacuum_width != y.vacuum_width {
            return Err(Error::invalid("field states carry different vacua"));
        }
        acc += (a.trace_amplitude(m) - b.trace_amplitude(m)).norm_sqr();
    }
    Ok(-acc / (4.0 * w * w))
}

/// Largest per-mode residual `|s_a(k) − s_b(k)|` of the shift phases.
pub fn shift_residual(a: &ModeGaussianState, b: &ModeGaussianState) -> f64 {
    a.modes
        .iter()
        .zip(&b.modes)
        .map(|(x, y)| (x.shift - y.shift).norm())
        .fold(0.0, f64::max)
}

/// `⟨Ψ_ψ|Ψ_φ⟩` for joint source-field states. Terms pair equal eigenstate
/// indices only; the two field states of each term are sourced by the same
/// eigen-density, so their shift phases cancel mode by mode and the gravity
/// factor is exactly one.
pub fn exact_joint_overlap(
    psi: &QuantumSourceState,
    phi: &QuantumSourceState,
    spec: &GridSpec,
    consts: &PhysicalConstants,
) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for c in psi.components() {
        let Some(d) = phi.components().iter().find(|d| d.index == c.index) else {
            continue;
        };
        let field = build_field_state(&c.density, consts, spec)?;
        let gravity = gravity_log_factor(&field, &field, 1.0)?.exp();
        total += c.amplitude.conj() * d.amplitude * gravity;
    }
    debug_assert!((total - source_overlap(psi, phi)).norm() <= 1e-12);
    Ok(total)
}

/// Semiclassical source: mass `m` localised at `x` as a wavepacket of
/// position spread `matter_width`, which is also the width of its energy
/// density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalSource {
    pub mass: f64,
    pub position: [f64; 3],
    pub matter_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub value: f64,
    pub log_value: f64,
    pub gravity_log: f64,
    pub matter_log: f64,
    pub modes: usize,
}

/// `|⟨α_x, 𝗁_x | α_{x+ε}, 𝗁_{x+ε}⟩|` with the gravity factor
/// `Π_k exp(−|Δ(k)|²/4w²)`, `Δ(k) = (1 − e^{−ik·ε}) 𝗁^T_x(k)`, and the
/// matter factor `exp(−|ε|²/8s²)` of two Gaussian packets of spread `s`.
pub fn semiclassical_overlap(
    src: &SemiclassicalSource,
    eps: [f64; 3],
    w: f64,
    spec: &GridSpec,
    consts: &PhysicalConstants,
) -> Result<OverlapResult> {
    check_w(w)?;
    if !(src.matter_width.is_finite() && src.matter_width > 0.0) {
        return Err(Error::domain("matter wavepacket width must be positive"));
    }
    let half = 0.5 * spec.box_length;
    if (0..3).any(|i| !(src.position[i] + eps[i]).abs().lt(&half)) {
        return Err(Error::domain("displaced source leaves the box"));
    }
    let e = EnergyDensity::gaussian(src.mass, src.position, src.matter_width, consts)?;
    let modes = trace_modes(&e, consts, spec)?;
    let mut acc = 0.0;
    for (idx, _, h) in &modes {
        let k = spec.wavevector::<f64>(*idx);
        let phase = Complex64::from_polar(1.0, -k.dot(&eps));
        acc += ((Complex64::new(1.0, 0.0) - phase) * h).norm_sqr();
    }
    let gravity_log = -acc / (4.0 * w * w);
    let e2: f64 = eps.iter().map(|v| v * v).sum();
    let matter_log = -e2 / (8.0 * src.matter_width.powi(2));
    let log_value = gravity_log + matter_log;
    Ok(OverlapResult {
        value: log_value.exp(),
        log_value,
        gravity_log,
        matter_log,
        modes: modes.len(),
    })
}

/// Sweep over displacements, regularisation widths and lattices.
pub fn overlap_sweep(
    src: &SemiclassicalSource,
    displacements: &[[f64; 3]],
    widths: &[f64],
    grids: &[GridSpec],
    consts: &PhysicalConstants,
) -> Result<Table> {
    let mut t = Table::new(
        "overlap_sweep",
        &["eps_x", "eps_y", "eps_z", "w", "N", "L", "overlap", "log_overlap", "gravity_log", "matter_log"],
    );
    for spec in grids {
        for eps in displacements {
            for &w in widths {
                let r = semiclassical_overlap(src, *eps, w, spec, consts)?;
                t.push(vec![
                    eps[0].into(),
                    eps[1].into(),
                    eps[2].into(),
                    w.into(),
                    spec.n.into(),
                    spec.box_length.into(),
                    r.value.into(),
                    r.log_value.into(),
                    r.gravity_log.into(),
                    r.matter_log.into(),
                ]);
            }
        }
    }
    Ok(t)
}
