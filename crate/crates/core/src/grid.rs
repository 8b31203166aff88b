//! Periodic N³ lattices, their FFT frequency grid, and the raw-f64 + JSON
//! sidecar file format used for densities and fields.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::tensoralg::WaveVector;

/// Cubic lattice of `n` points per axis spanning `[-L/2, L/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub box_length: f64,
}

impl GridSpec {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid needs n >= 2, got {n}")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::invalid(format!("box length must be positive, got {box_length}")));
        }
        Ok(Self { n, box_length })
    }

    pub fn require_power_of_two(&self) -> Result<()> {
        if self.n.is_power_of_two() {
            Ok(())
        } else {
            Err(Error::invalid(format!("grid size {} is not a power of two", self.n)))
        }
    }

    #[inline]
    pub fn cell_size(&self) -> f64 {
        self.box_length / self.n as f64
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.cell_size().powi(3)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Row-major flat index with x fastest.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    /// Position of lattice node `i` along one axis.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        -0.5 * self.box_length + i as f64 * self.cell_size()
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.coords(idx);
        [self.node(ix), self.node(iy), self.node(iz)]
    }

    /// Signed FFT frequency index of lattice index `i`.
    #[inline]
    pub fn frequency_index(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < (n + 1) / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn wavevector<T: Real>(&self, idx: usize) -> WaveVector<T> {
        let dk = 2.0 * std::f64::consts::PI / self.box_length;
        let [ix, iy, iz] = self.coords(idx);
        WaveVector::new(
            lit(dk * self.frequency_index(ix) as f64),
            lit(dk * self.frequency_index(iy) as f64),
            lit(dk * self.frequency_index(iz) as f64),
        )
    }

    /// Flat index of the lattice wavevector `-k`.
    #[inline]
    pub fn negated_index(&self, idx: usize) -> usize {
        let n = self.n;
        let [ix, iy, iz] = self.coords(idx);
        self.index((n - ix) % n, (n - iy) % n, (n - iz) % n)
    }

    /// Measure of one lattice mode, `(2π/L)³ / (2π)³ = 1/L³`.
    #[inline]
    pub fn mode_weight(&self) -> f64 {
        self.box_length.powi(-3)
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "n={} L={} vs n={} L={}",
                self.n, self.box_length, other.n, other.box_length
            )))
        }
    }
}

/// In-place 3-D FFT over a flat x-fastest array. Unnormalised in both
/// directions.
pub fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n, "fft3 buffer length");
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    // x lines are contiguous.
    fft.process(data);

    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for stride_axis in [1usize, 2] {
        let stride = n.pow(stride_axis as u32);
        for outer in 0..n {
            for inner in 0..n {
                // Lines along y: index = ix + n*(iy + n*iz), vary iy.
                // Lines along z: vary iz.
                let base = if stride_axis == 1 {
                    inner + n * n * outer
                } else {
                    inner + n * outer
                };
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Continuum-normalised Fourier transform `f(k) = Σ_x f(x) e^{-ik·x} h³`
/// of a real lattice field. The phase reference is the lattice origin node
/// at `x = -L/2`; [`centred_phase`] shifts it to `x = 0`.
pub fn forward_transform(spec: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3(&mut buf, spec.n, false);
    let vol = spec.cell_volume();
    for (idx, v) in buf.iter_mut().enumerate() {
        *v *= vol * centred_phase(spec, idx);
    }
    buf
}

/// `e^{-ik·x0}` with `x0 = (-L/2, -L/2, -L/2)`.
pub fn centred_phase(spec: &GridSpec, idx: usize) -> Complex64 {
    let k = spec.wavevector::<f64>(idx);
    let x0 = -0.5 * spec.box_length;
    let dot = (k.kx + k.ky + k.kz) * x0;
    Complex64::from_polar(1.0, -dot)
}

/// Header of the raw-f64 grid format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub format: String,
    pub quantity: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub box_length: f64,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    pub order: String,
}

pub const RAW_FORMAT: &str = "raw-f64-le";
pub const RAW_ORDER: &str = "row-major, x fastest";

impl GridHeader {
    pub fn new(quantity: &str, spec: &GridSpec, units: &str, mass: Option<f64>) -> Self {
        Self {
            format: RAW_FORMAT.to_string(),
            quantity: quantity.to_string(),
            n: spec.n,
            box_length: spec.box_length,
            units: units.to_string(),
            mass,
            order: RAW_ORDER.to_string(),
        }
    }

    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.box_length)
    }
}

/// Paths of the sidecar header and payload for a grid stored at `base`.
pub fn grid_paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("json"), base.with_extension("f64"))
}

pub fn write_raw_grid(base: &Path, header: &GridHeader, values: &[f64]) -> Result<()> {
    if values.len() != header.n.pow(3) {
        return Err(Error::invalid(format!(
            "payload has {} values, header declares N={}",
            values.len(),
            header.n
        )));
    }
    let (json_path, raw_path) = grid_paths(base);
    fs::write(&json_path, serde_json::to_string_pretty(header)?)?;
    let mut out = BufWriter::new(fs::File::create(&raw_path)?);
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_raw_grid(base: &Path) -> Result<(GridHeader, Vec<f64>)> {
    let (json_path, raw_path) = grid_paths(base);
    let header: GridHeader = serde_json::from_str(&fs::read_to_string(&json_path)?)?;
    if header.format != RAW_FORMAT {
        return Err(Error::invalid(format!("unsupported grid format {:?}", header.format)));
    }
    let mut bytes = Vec::new();
    fs::File::open(&raw_path)?.read_to_end(&mut bytes)?;
    let expected = header.n.pow(3) * 8;
    if bytes.len() != expected {
        return Err(Error::invalid(format!(
            "{} holds {} bytes, expected {expected}",
            raw_path.display(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negated_index_is_an_involution_and_negates_k() {
        let spec = GridSpec::new(8, 3.0).unwrap();
        for idx in 0..spec.len() {
            let neg = spec.negated_index(idx);
            assert_eq!(spec.negated_index(neg), idx);
            let k = spec.wavevector::<f64>(idx);
            let kn = spec.wavevector::<f64>(neg);
            // Nyquist planes map onto themselves.
            for (a, b) in [(k.kx, kn.kx), (k.ky, kn.ky), (k.kz, kn.kz)] {
                let nyq = std::f64::consts::PI * 8.0 / 3.0;
                assert!((a + b).abs() < 1e-12 || (a.abs() - nyq).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fft3_matches_direct_dft() {
        let n = 4;
        let spec = GridSpec::new(n, 1.0).unwrap();
        let data: Vec<Complex64> = (0..spec.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        fft3(&mut fast, n, false);
        for kidx in 0..spec.len() {
            let [kx, ky, kz] = spec.coords(kidx);
            let mut acc = Complex64::new(0.0, 0.0);
            for (xidx, v) in data.iter().enumerate() {
                let [x, y, z] = spec.coords(xidx);
                let arg = -2.0 * std::f64::consts::PI * ((kx * x + ky * y + kz * z) as f64) / n as f64;
                acc += v * Complex64::from_polar(1.0, arg);
            }
            assert!((acc - fast[kidx]).norm() < 1e-10);
        }
        fft3(&mut fast, n, true);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a / (spec.len() as f64) - b).norm() < 1e-12);
        }
    }

    #[test]
    fn raw_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new(4, 2.0).unwrap();
        let values: Vec<f64> = (0..spec.len()).map(|i| i as f64 * 0.5 - 3.0).collect();
        let header = GridHeader::new("energy_density", &spec, "J/m^3", Some(1.5));
        let base = dir.path().join("rho");
        write_raw_grid(&base, &header, &values).unwrap();
        let raw = std::fs::read(base.with_extension("f64")).unwrap();
        assert_eq!(&raw[8..16], &(-2.5f64).to_le_bytes());
        let (h2, v2) = read_raw_grid(&base).unwrap();
        assert_eq!(h2, header);
        assert_eq!(v2, values);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new(2, 1.0).unwrap();
        let base = dir.path().join("f");
        write_raw_grid(&base, &GridHeader::new("h", &spec, "1", None), &[0.0; 8]).unwrap();
        std::fs::write(base.with_extension("f64"), [0u8; 16]).unwrap();
        assert!(read_raw_grid(&base).is_err());
    }
}
