//! Fourier-space algebra of symmetric 3×3 tensors: transverse projectors,
//! the longitudinal / transverse-trace / transverse-traceless split, and
//! lattice mode contractions.
//!
//! Everything here is generic over the scalar: `f32`/`f64` components, or
//! complex components over either.

use num_complex::Complex;
use num_traits::{Float, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::{lit, Component, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveVector<T> {
    pub kx: T,
    pub ky: T,
    pub kz: T,
}

impl<T: Real> WaveVector<T> {
    pub fn new(kx: T, ky: T, kz: T) -> Self {
        Self { kx, ky, kz }
    }

    pub fn try_new(kx: T, ky: T, kz: T) -> Result<Self> {
        if kx.is_finite() && ky.is_finite() && kz.is_finite() {
            Ok(Self::new(kx, ky, kz))
        } else {
            Err(Error::domain("wavevector components must be finite"))
        }
    }

    #[inline]
    pub fn components(&self) -> [T; 3] {
        [self.kx, self.ky, self.kz]
    }

    #[inline]
    pub fn norm_sq(&self) -> T {
        self.kx * self.kx + self.ky * self.ky + self.kz * self.kz
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, x: &[T; 3]) -> T {
        self.kx * x[0] + self.ky * x[1] + self.kz * x[2]
    }

    fn require_nonzero(&self) -> Result<T> {
        let n2 = self.norm_sq();
        if n2 > T::zero() {
            Ok(n2)
        } else {
            Err(Error::domain("transverse projector undefined at k = 0"))
        }
    }

    /// Orthonormal pair `(e1, e2)` spanning the plane transverse to `k`.
    pub fn transverse_basis(&self) -> Result<([T; 3], [T; 3])> {
        self.require_nonzero()?;
        let n = self.norm();
        let khat = [self.kx / n, self.ky / n, self.kz / n];
        // Seed with the axis least aligned with k.
        let abs = khat.map(|c| c.abs());
        let seed = if abs[0] <= abs[1] && abs[0] <= abs[2] {
            [T::one(), T::zero(), T::zero()]
        } else if abs[1] <= abs[2] {
            [T::zero(), T::one(), T::zero()]
        } else {
            [T::zero(), T::zero(), T::one()]
        };
        let e1 = normalise(cross(&khat, &seed));
        let e2 = cross(&khat, &e1);
        Ok((e1, e2))
    }
}

fn cross<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalise<T: Real>(v: [T; 3]) -> [T; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

/// Symmetric 3×3 tensor stored as its six independent components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor3<S> {
    pub xx: S,
    pub yy: S,
    pub zz: S,
    pub xy: S,
    pub xz: S,
    pub yz: S,
}

impl<S: Component> SymTensor3<S> {
    pub fn new(xx: S, yy: S, zz: S, xy: S, xz: S, yz: S) -> Self {
        Self { xx, yy, zz, xy, xz, yz }
    }

    pub fn zero() -> Self {
        let z = S::zero();
        Self::new(z, z, z, z, z, z)
    }

    pub fn identity() -> Self {
        Self::diag(S::one(), S::one(), S::one())
    }

    pub fn diag(a: S, b: S, c: S) -> Self {
        let z = S::zero();
        Self::new(a, b, c, z, z, z)
    }

    /// Symmetrised outer product `(a⊗b + b⊗a)/2`.
    pub fn sym_outer(a: &[S; 3], b: &[S; 3]) -> Self {
        let two = S::one() + S::one();
        let h = |i: usize, j: usize| (a[i] * b[j] + a[j] * b[i]) / two;
        Self::new(h(0, 0), h(1, 1), h(2, 2), h(0, 1), h(0, 2), h(1, 2))
    }

    /// Symmetric part of a full matrix.
    pub fn from_matrix(m: &[[S; 3]; 3]) -> Self {
        let two = S::one() + S::one();
        Self::new(
            m[0][0],
            m[1][1],
            m[2][2],
            (m[0][1] + m[1][0]) / two,
            (m[0][2] + m[2][0]) / two,
            (m[1][2] + m[2][1]) / two,
        )
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            (2, 2) => self.zz,
            (0, 1) => self.xy,
            (0, 2) => self.xz,
            (1, 2) => self.yz,
            _ => panic!("tensor index ({i}, {j}) out of range"),
        }
    }

    pub fn to_matrix(&self) -> [[S; 3]; 3] {
        let mut m = [[S::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    /// Components in storage order `xx, yy, zz, xy, xz, yz`.
    pub fn components(&self) -> [S; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
    }

    pub fn from_components(c: [S; 6]) -> Self {
        Self::new(c[0], c[1], c[2], c[3], c[4], c[5])
    }

    pub fn map<U: Component>(&self, f: impl Fn(S) -> U) -> SymTensor3<U> {
        SymTensor3::from_components(self.components().map(f))
    }

    pub fn scale(&self, a: S) -> Self {
        self.map(|c| c * a)
    }

    pub fn conj(&self) -> Self {
        self.map(Component::conj)
    }

    #[inline]
    pub fn trace(&self) -> S {
        self.xx + self.yy + self.zz
    }

    /// Full contraction `A_ij B_ij` (no conjugation).
    pub fn contract(&self, other: &Self) -> S {
        let two = S::one() + S::one();
        self.xx * other.xx
            + self.yy * other.yy
            + self.zz * other.zz
            + two * (self.xy * other.xy + self.xz * other.xz + self.yz * other.yz)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> S::Real {
        self.contract(&self.conj()).modulus().sqrt()
    }

    pub fn max_abs(&self) -> S::Real {
        self.components()
            .iter()
            .map(|c| c.modulus())
            .fold(S::Real::zero(), |a, b| a.max(b))
    }

    pub fn apply(&self, v: &[S; 3]) -> [S; 3] {
        let mut out = [S::zero(); 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.get(i, 0) * v[0] + self.get(i, 1) * v[1] + self.get(i, 2) * v[2];
        }
        out
    }

    /// Plain matrix product; not symmetric in general.
    pub fn matmul(&self, other: &Self) -> [[S; 3]; 3] {
        let mut m = [[S::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).fold(S::zero(), |acc, a| acc + self.get(i, a) * other.get(a, j));
            }
        }
        m
    }

    /// Congruence `M A M` for symmetric `M`; the result is symmetric.
    pub fn sandwich(&self, m: &Self) -> Self {
        let ma = m.matmul(self);
        let mut out = [[S::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).fold(S::zero(), |acc, b| acc + ma[i][b] * m.get(b, j));
            }
        }
        Self::from_matrix(&out)
    }
}

impl<S: Component> std::ops::Add for SymTensor3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (self.components(), o.components());
        Self::from_components(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl<S: Component> std::ops::Sub for SymTensor3<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let (a, b) = (self.components(), o.components());
        Self::from_components(std::array::from_fn(|i| a[i] - b[i]))
    }
}

impl<S: Component> std::ops::Neg for SymTensor3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|c| -c)
    }
}

impl<T: Real> SymTensor3<T> {
    /// Embed a real tensor into any component type over the same real.
    pub fn lift<S: Component<Real = T>>(&self) -> SymTensor3<S> {
        SymTensor3 {
            xx: S::from_real(self.xx),
            yy: S::from_real(self.yy),
            zz: S::from_real(self.zz),
            xy: S::from_real(self.xy),
            xz: S::from_real(self.xz),
            yz: S::from_real(self.yz),
        }
    }
}

/// `P_ij = δ_ij − k_i k_j / |k|²`.
pub fn transverse_projector<T: Real>(k: &WaveVector<T>) -> Result<SymTensor3<T>> {
    let n2 = k.require_nonzero()?;
    let c = k.components();
    let p = |i: usize, j: usize| {
        let delta = if i == j { T::one() } else { T::zero() };
        delta - c[i] * c[j] / n2
    };
    Ok(SymTensor3 {
        xx: p(0, 0),
        yy: p(1, 1),
        zz: p(2, 2),
        xy: p(0, 1),
        xz: p(0, 2),
        yz: p(1, 2),
    })
}

/// `P T P`: the fully transverse part of `T`.
pub fn transverse_part<S: Component>(t: &SymTensor3<S>, k: &WaveVector<S::Real>) -> Result<SymTensor3<S>> {
    let p: SymTensor3<S> = transverse_projector(k)?.lift();
    Ok(t.sandwich(&p))
}

/// Transverse trace `P_ab T_ab`.
pub fn transverse_trace<S: Component>(t: &SymTensor3<S>, k: &WaveVector<S::Real>) -> Result<S> {
    let p: SymTensor3<S> = transverse_projector(k)?.lift();
    Ok(p.contract(t))
}

/// Transverse-traceless part `P T P − ½ P (P·T)`.
pub fn tt_project<S: Component>(t: &SymTensor3<S>, k: &WaveVector<S::Real>) -> Result<SymTensor3<S>> {
    let p: SymTensor3<S> = transverse_projector(k)?.lift();
    let half = S::from_real(lit(0.5));
    let tr = p.contract(t);
    Ok(t.sandwich(&p) - p.scale(half * tr))
}

/// Split of a symmetric tensor relative to a wavevector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition<S> {
    /// Everything not transverse: `T − P T P`.
    pub longitudinal: SymTensor3<S>,
    /// Transverse trace `P_ab T_ab`; the transverse-trace tensor is `½ P · trace_part`.
    pub trace_part: S,
    pub tt: SymTensor3<S>,
}

impl<S: Component> Decomposition<S> {
    pub fn recompose(&self, k: &WaveVector<S::Real>) -> Result<SymTensor3<S>> {
        let p: SymTensor3<S> = transverse_projector(k)?.lift();
        let half = S::from_real(lit(0.5));
        Ok(self.longitudinal + self.tt + p.scale(half * self.trace_part))
    }

    /// The transverse-trace piece as a tensor, `½ P · trace_part`.
    pub fn trace_tensor(&self, k: &WaveVector<S::Real>) -> Result<SymTensor3<S>> {
        let p: SymTensor3<S> = transverse_projector(k)?.lift();
        Ok(p.scale(S::from_real(lit(0.5)) * self.trace_part))
    }
}

pub fn decompose<S: Component>(t: &SymTensor3<S>, k: &WaveVector<S::Real>) -> Result<Decomposition<S>> {
    let p: SymTensor3<S> = transverse_projector(k)?.lift();
    let half = S::from_real(lit(0.5));
    let trace_part = p.contract(t);
    let transverse = t.sandwich(&p);
    let tt = transverse - p.scale(half * trace_part);
    Ok(Decomposition {
        longitudinal: *t - transverse,
        trace_part,
        tt,
    })
}

/// Symmetric tensor field on the FFT frequency lattice of a periodic box.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorFieldK<S> {
    spec: GridSpec,
    data: Vec<SymTensor3<S>>,
    real_space_real: bool,
}

impl<S: Component> SymTensorFieldK<S> {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            data: vec![SymTensor3::zero(); spec.len()],
            real_space_real: false,
        }
    }

    /// Build a field; when `reality` is set, `F(−k) = conj F(k)` is checked
    /// to 1e−12 relative to the largest component.
    pub fn new(spec: GridSpec, data: Vec<SymTensor3<S>>, reality: bool) -> Result<Self> {
        if data.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} tensors for a grid of {} modes",
                data.len(),
                spec.len()
            )));
        }
        let field = Self {
            spec,
            data,
            real_space_real: reality,
        };
        if reality {
            let scale = field
                .data
                .iter()
                .map(|t| t.max_abs())
                .fold(S::Real::zero(), |a, b| a.max(b));
            let tol = lit::<S::Real>(1e-12) * scale.max(S::Real::min_positive_value());
            for idx in 0..spec.len() {
                let neg = spec.negated_index(idx);
                let defect = (field.data[neg] - field.data[idx].conj()).max_abs();
                if defect > tol {
                    return Err(Error::invalid(format!(
                        "reality condition violated at mode {idx}: defect {defect:?}"
                    )));
                }
            }
        }
        Ok(field)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn is_real_in_position_space(&self) -> bool {
        self.real_space_real
    }

    pub fn at(&self, idx: usize) -> &SymTensor3<S> {
        &self.data[idx]
    }

    pub fn data(&self) -> &[SymTensor3<S>] {
        &self.data
    }
}

/// Lattice version of `∫ d³k/(2π)³ w(k) A_ij(k) B_ij(−k)`, as a Riemann sum
/// with measure `1/L³` per mode. The zero mode is skipped.
pub fn contract<T: Real>(
    a: &SymTensorFieldK<Complex<T>>,
    b: &SymTensorFieldK<Complex<T>>,
    weight: impl Fn(&WaveVector<T>) -> T,
) -> Result<Complex<T>> {
    a.spec.check_same(&b.spec)?;
    let spec = a.spec;
    let measure: T = lit(spec.mode_weight());
    let mut acc = Complex::<T>::zero();
    for idx in 1..spec.len() {
        let k = spec.wavevector::<T>(idx);
        let w = weight(&k);
        if w == T::zero() {
            continue;
        }
        let term = a.data[idx].contract(&b.data[spec.negated_index(idx)]);
        acc = acc + term * Complex::from_real(w);
    }
    Ok(acc * Complex::from_real(measure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn k(x: f64, y: f64, z: f64) -> WaveVector<f64> {
        WaveVector::new(x, y, z)
    }

    fn assert_tensor_close(a: &SymTensor3<f64>, b: &SymTensor3<f64>, tol: f64) {
        assert!((*a - *b).max_abs() <= tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn axis_aligned_projector() {
        let p = transverse_projector(&k(0.0, 0.0, 1.0)).unwrap();
        assert_tensor_close(&p, &SymTensor3::diag(1.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn zero_wavevector_is_a_domain_error() {
        let zero = k(0.0, 0.0, 0.0);
        assert!(matches!(transverse_projector(&zero), Err(Error::Domain(_))));
        assert!(tt_project(&SymTensor3::<f64>::identity(), &zero).is_err());
        assert!(decompose(&SymTensor3::<f64>::identity(), &zero).is_err());
        assert!(WaveVector::try_new(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn tt_projection_examples() {
        let kz = k(0.0, 0.0, 1.0);
        let removed = tt_project(&SymTensor3::diag(1.0, 1.0, 0.0), &kz).unwrap();
        assert_tensor_close(&removed, &SymTensor3::zero(), 1e-15);
        let plus = SymTensor3::diag(1.0, -1.0, 0.0);
        assert_tensor_close(&tt_project(&plus, &kz).unwrap(), &plus, 1e-15);
    }

    #[test]
    fn decomposition_of_projector_and_longitudinal_tensor() {
        let kv = k(0.3, -1.2, 0.7);
        let p = transverse_projector(&kv).unwrap();
        let d = decompose(&p, &kv).unwrap();
        assert!((d.trace_part - 2.0).abs() < 1e-14);
        assert!(d.tt.max_abs() < 1e-14);
        assert!(d.longitudinal.max_abs() < 1e-14);

        let c = kv.components();
        let n2 = kv.norm_sq();
        let long = SymTensor3::sym_outer(&c, &c).scale(1.0 / n2);
        let d = decompose(&long, &kv).unwrap();
        assert!(d.trace_part.abs() < 1e-14);
        assert!(d.tt.max_abs() < 1e-14);
        assert_tensor_close(&d.longitudinal, &long, 1e-14);
    }

    #[test]
    fn projector_works_in_single_precision() {
        let kv = WaveVector::<f32>::new(1.0, 2.0, -0.5);
        let p = transverse_projector(&kv).unwrap();
        let pk = p.apply(&kv.components());
        assert!(pk.iter().all(|c| c.abs() < 1e-5));
        let tt = tt_project(&SymTensor3::<f32>::diag(1.0, 2.0, 3.0), &kv).unwrap();
        assert!(tt.trace().abs() < 1e-5);
    }

    #[test]
    fn complex_components_are_supported() {
        let kv = k(0.2, 0.4, 1.0);
        let t = SymTensor3::new(
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.3, 0.1),
            Complex64::new(0.7, -1.0),
            Complex64::new(0.2, 0.2),
            Complex64::new(0.0, -0.4),
            Complex64::new(0.9, 0.0),
        );
        let tt = tt_project(&t, &kv).unwrap();
        assert!(tt.trace().norm() < 1e-14);
        let kc = kv.components().map(Complex64::from_real);
        assert!(tt.apply(&kc).iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn transverse_basis_is_orthonormal_and_transverse() {
        for kv in [k(0.0, 0.0, 2.0), k(1.0, 1.0, 1.0), k(-3.0, 0.1, 0.0)] {
            let (e1, e2) = kv.transverse_basis().unwrap();
            let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert!((dot(&e1, &e1) - 1.0).abs() < 1e-14);
            assert!((dot(&e2, &e2) - 1.0).abs() < 1e-14);
            assert!(dot(&e1, &e2).abs() < 1e-14);
            assert!(kv.dot(&e1).abs() < 1e-14 && kv.dot(&e2).abs() < 1e-14);
        }
    }

    fn single_mode_field(spec: GridSpec, idx: usize, t: SymTensor3<Complex64>) -> SymTensorFieldK<Complex64> {
        let mut data = vec![SymTensor3::zero(); spec.len()];
        data[idx] = t;
        data[spec.negated_index(idx)] = t.conj();
        SymTensorFieldK::new(spec, data, true).unwrap()
    }

    #[test]
    fn contraction_of_zero_fields_is_zero() {
        let spec = GridSpec::new(4, 1.0).unwrap();
        let z = SymTensorFieldK::<Complex64>::zeros(spec);
        assert_eq!(contract(&z, &z, |_| 1.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn single_mode_pair_contraction_matches_hand_sum() {
        let spec = GridSpec::new(4, 2.0).unwrap();
        let idx = spec.index(1, 0, 0);
        let t = SymTensor3::new(
            Complex64::new(1.0, 2.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        let a = single_mode_field(spec, idx, t);
        let got = contract(&a, &a, |kv| kv.norm()).unwrap();
        // Two summands (k and −k), each w·T(k)·T(−k) = w·T·conj(T) = w·|T|²_F.
        let tt_norm_sq = 1.0 + 4.0 + 0.25 + 2.0 * 1.0;
        let kmag = 2.0 * std::f64::consts::PI / 2.0;
        let expected = 2.0 * kmag * tt_norm_sq / 8.0;
        assert!((got.re - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!(got.im.abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = SymTensorFieldK::<Complex64>::zeros(GridSpec::new(4, 1.0).unwrap());
        let b = SymTensorFieldK::<Complex64>::zeros(GridSpec::new(4, 2.0).unwrap());
        assert!(matches!(contract(&a, &b, |_| 1.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn reality_violation_is_detected() {
        let spec = GridSpec::new(4, 1.0).unwrap();
        let mut data = vec![SymTensor3::<Complex64>::zero(); spec.len()];
        data[spec.index(1, 0, 0)] = SymTensor3::identity();
        assert!(SymTensorFieldK::new(spec, data, true).is_err());
    }

    fn arb_k() -> impl Strategy<Value = WaveVector<f64>> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)
            .prop_filter("nonzero", |(a, b, c)| a * a + b * b + c * c > 1e-3)
            .prop_map(|(a, b, c)| k(a, b, c))
    }

    fn arb_t() -> impl Strategy<Value = SymTensor3<f64>> {
        prop::array::uniform6(-3.0..3.0f64).prop_map(SymTensor3::from_components)
    }

    proptest! {
        #[test]
        fn projector_is_symmetric_idempotent_rank_two(kv in arb_k()) {
            let p = transverse_projector(&kv).unwrap();
            let pp = SymTensor3::from_matrix(&p.matmul(&p));
            prop_assert!((pp - p).max_abs() < 1e-12);
            prop_assert!(p.apply(&kv.components()).iter().all(|c| c.abs() < 1e-12 * kv.norm().max(1.0)));
            prop_assert!((p.trace() - 2.0).abs() < 1e-12);
        }

        #[test]
        fn tt_projection_is_a_traceless_transverse_projector(t in arb_t(), kv in arb_k()) {
            let tt = tt_project(&t, &kv).unwrap();
            prop_assert!(tt.trace().abs() < 1e-12);
            prop_assert!(tt.apply(&kv.components()).iter().all(|c| c.abs() < 1e-12 * kv.norm().max(1.0)));
            let again = tt_project(&tt, &kv).unwrap();
            prop_assert!((again - tt).max_abs() < 1e-12);
        }

        #[test]
        fn decomposition_parts_recompose_and_are_orthogonal(t in arb_t(), kv in arb_k()) {
            let d = decompose(&t, &kv).unwrap();
            prop_assert!((d.recompose(&kv).unwrap() - t).max_abs() < 1e-12);
            let trace_t = d.trace_tensor(&kv).unwrap();
            prop_assert!(d.longitudinal.contract(&d.tt).abs() < 1e-12);
            prop_assert!(d.longitudinal.contract(&trace_t).abs() < 1e-12);
            prop_assert!(d.tt.contract(&trace_t).abs() < 1e-12);
        }
    }
}
