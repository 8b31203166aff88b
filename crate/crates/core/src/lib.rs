//! Gravitationally induced phases and entanglement between quantum sources
//! in linearised gravity.

pub mod error;
pub mod fit;
pub mod grid;
pub mod opalg;
pub mod overlaps;
pub mod phases;
pub mod poisson;
pub mod scalar;
pub mod sources;
pub mod table;
pub mod tensoralg;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use sources::{EnergyDensity, PhysicalConstants, QuantumSourceState};
pub use tensoralg::{SymTensor3, WaveVector};

pub type WaveVec = WaveVector<f64>;
pub type SymTensor = SymTensor3<f64>;
pub type ComplexSymTensor = SymTensor3<num_complex::Complex64>;
