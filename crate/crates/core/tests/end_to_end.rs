use num_complex::Complex64;
use proptest::prelude::*;
use qgphase::grid::GridSpec;
use qgphase::opalg::{self, TwoBranchParams};
use qgphase::overlaps::{build_field_state, gravity_log_factor, semiclassical_overlap, SemiclassicalSource};
use qgphase::phases::{negativity, newton_phase, phase_matrix_general, theta_ab, PhaseMatrix, PhaseModel};
use qgphase::poisson::{mutual_coulomb, solve_ht_direct, CoulombBackend};
use qgphase::sources::LocalizedSourceSpec;
use qgphase::tensoralg::{decompose, tt_project};
use qgphase::{EnergyDensity, PhysicalConstants, SymTensor, WaveVec};

const PI: f64 = std::f64::consts::PI;

fn nat() -> PhysicalConstants {
    PhysicalConstants::natural()
}

fn tensor() -> impl Strategy<Value = SymTensor> {
    prop::array::uniform6(-5.0..5.0f64).prop_map(SymTensor::from_components)
}

fn wavevector() -> impl Strategy<Value = WaveVec> {
    prop::array::uniform3(-4.0..4.0f64)
        .prop_filter("nonzero", |k| k.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|k| WaveVec::new(k[0], k[1], k[2]))
}

proptest! {
    #[test]
    fn tt_part_depends_only_on_direction(t in tensor(), k in wavevector(), a in 0.1..10.0f64) {
        let scaled = WaveVec::new(a * k.components()[0], a * k.components()[1], a * k.components()[2]);
        let diff = tt_project(&t, &k).unwrap() - tt_project(&t, &scaled).unwrap();
        prop_assert!(diff.max_abs() <= 1e-12 * (1.0 + t.max_abs()));
    }

    #[test]
    fn decomposition_parts_are_orthogonal(t in tensor(), k in wavevector()) {
        let d = decompose(&t, &k).unwrap();
        prop_assert!(d.tt.contract(&d.trace_tensor(&k).unwrap()).abs() <= 1e-11 * (1.0 + t.norm().powi(2)));
        prop_assert!(d.tt.contract(&d.longitudinal).abs() <= 1e-11 * (1.0 + t.norm().powi(2)));
    }

    #[test]
    fn product_phases_never_entangle(f in prop::array::uniform2(-3.0..3.0f64), g in prop::array::uniform2(-3.0..3.0f64)) {
        let phases = vec![f[0] + g[0], f[0] + g[1], f[1] + g[0], f[1] + g[1]];
        let m = PhaseMatrix::from_phases(PhaseModel::General, 2, 2, phases).unwrap();
        let c = [Complex64::new(0.5f64.sqrt(), 0.0); 2];
        prop_assert_eq!(negativity(&c, &c, &m).unwrap(), 0.0);
    }
}

#[test]
fn direct_field_of_gaussian_matches_erf_profile() {
    let c = nat();
    let spec = GridSpec::new(16, 12.0).unwrap();
    let sigma = 1.2;
    let e = EnergyDensity::gaussian(1.0, [0.0; 3], sigma, &c).unwrap();
    let h = solve_ht_direct(&e, &c, &spec).unwrap();
    for step in [3usize, 4, 5] {
        let r = step as f64 * spec.cell_size();
        let expected = c.kappa() / (4.0 * PI * r) * libm::erf(r / (2f64.sqrt() * sigma));
        let got = h.at(8 + step, 8, 8);
        assert!((got / expected - 1.0).abs() < 0.02, "r = {r}: {got} vs {expected}");
    }
}

#[test]
fn lattice_backends_agree_with_closed_form_coulomb_integral() {
    let c = nat();
    let a = EnergyDensity::gaussian(1.0, [-1.0, 0.0, 0.0], 0.9, &c).unwrap();
    let b = EnergyDensity::gaussian(2.0, [1.0, 0.0, 0.0], 0.9, &c).unwrap();
    let exact = mutual_coulomb(&a, &b, &CoulombBackend::Analytic).unwrap().value;
    let grid = GridSpec::new(32, 12.0).unwrap();
    for backend in [CoulombBackend::Spectral { grid }, CoulombBackend::Direct { grid }] {
        let v = mutual_coulomb(&a, &b, &backend).unwrap().value;
        assert!((v / exact - 1.0).abs() < 0.01, "{backend:?}: {v} vs {exact}");
    }
    let mc = mutual_coulomb(&a, &b, &CoulombBackend::MonteCarlo { samples: 200_000, seed: 7 }).unwrap();
    assert!((mc.value - exact).abs() < 5.0 * mc.std_error.unwrap());
}

#[test]
fn separated_narrow_sources_reproduce_newton_up_to_prefactor() {
    let c = nat();
    let centres = [[0.0, 0.0, 0.0], [0.7, 0.0, 0.0]];
    let a = LocalizedSourceSpec::equal_superposition(1.0, &centres, 0.01).unwrap();
    let b = LocalizedSourceSpec::equal_superposition(1.0, &centres.map(|x| [x[0], 3.0, 0.0]), 0.01).unwrap();
    let general = phase_matrix_general(
        &a.to_quantum_state(&c).unwrap(),
        &b.to_quantum_state(&c).unwrap(),
        1.0,
        &c,
        &CoulombBackend::Analytic,
    )
    .unwrap();
    let newton = newton_phase(&a, &b, 1.0, &c).unwrap();
    let ratio = qgphase::phases::newton_prefactor_ratio(&c);
    for i in 0..2 {
        for j in 0..2 {
            let n = newton.phase(i, j) * ratio;
            assert!((general.phase(i, j) / n - 1.0).abs() < 1e-9, "{i}{j}");
        }
    }
}

#[test]
fn theta_is_linear_in_time_and_masses() {
    let c = nat();
    let a = EnergyDensity::gaussian(1.5, [0.0; 3], 0.3, &c).unwrap();
    let b = EnergyDensity::gaussian(0.5, [2.0, 0.0, 0.0], 0.3, &c).unwrap();
    let b2 = EnergyDensity::gaussian(1.0, [2.0, 0.0, 0.0], 0.3, &c).unwrap();
    let th = |b: &EnergyDensity, t| theta_ab(&a, b, t, &c, &CoulombBackend::Analytic).unwrap().value;
    assert!((th(&b, 3.0) / th(&b, 1.0) - 3.0).abs() < 1e-12);
    assert!((th(&b2, 1.0) / th(&b, 1.0) - 2.0).abs() < 1e-12);
    assert!(th(&b, 1.0) < 0.0);
}

#[test]
fn gravity_factor_is_symmetric_and_shrinks_with_displacement() {
    let c = nat();
    let spec = GridSpec::new(8, 4.0).unwrap();
    let field = |x: f64| build_field_state(&EnergyDensity::gaussian(1.0, [x, 0.0, 0.0], 0.4, &c).unwrap(), &c, &spec).unwrap();
    let (f0, f1, f2) = (field(0.0), field(0.25), field(0.5));
    assert_eq!(gravity_log_factor(&f0, &f0, 1.0).unwrap(), 0.0);
    assert_eq!(gravity_log_factor(&f0, &f1, 1.0).unwrap(), gravity_log_factor(&f1, &f0, 1.0).unwrap());
    assert!(gravity_log_factor(&f0, &f2, 1.0).unwrap() < gravity_log_factor(&f0, &f1, 1.0).unwrap());
}

#[test]
fn zero_displacement_overlap_is_one() {
    let c = nat();
    let src = SemiclassicalSource { mass: 2.0, position: [0.0; 3], matter_width: 0.3 };
    let o = semiclassical_overlap(&src, [0.0; 3], 0.5, &GridSpec::new(8, 4.0).unwrap(), &c).unwrap();
    assert_eq!(o.value, 1.0);
}

fn small_params() -> TwoBranchParams {
    TwoBranchParams {
        consts: PhysicalConstants::new(1.0 / (16.0 * PI), 1.0, 1.0).unwrap(),
        k: WaveVec::new(0.0, 1.0, 0.0),
        box_length: 2.0 * PI,
        dim: 24,
        amplitude: 4.0,
        trace: 0.0,
        shift: 0.0,
        gap: 0.2,
    }
}

#[test]
fn higher_zassenhaus_order_tracks_exact_propagator_better() {
    let p = small_params();
    let t = 0.05;
    let defect = |order| p.problem(order).unwrap().prepare().unwrap().compare(t).unwrap().defect;
    let (d1, d2, d3) = (defect(1), defect(2), defect(3));
    assert!(d2 < d1 && d3 < d2, "{d1} {d2} {d3}");
}

#[test]
fn exact_vacuum_amplitude_matches_driven_oscillator() {
    let p = small_params();
    let problem = p.problem(3).unwrap();
    let sys = &problem.system;
    let prepared = problem.prepare().unwrap();
    let lambda = opalg::drive_strength(sys, &problem.stress, 0, 1).unwrap();
    for t in [0.3, 1.0, 2.5] {
        let row = prepared.compare(t).unwrap();
        let oracle = opalg::driven_oscillator_log_amplitude(lambda, sys.omega(0), p.consts.kappa(), p.consts.hbar, t)
            - opalg::driven_oscillator_log_amplitude(0.0, sys.omega(0), p.consts.kappa(), p.consts.hbar, t);
        assert!((row.dlogmag_exact - oracle.re).abs() < 1e-8, "t = {t}: {} vs {}", row.dlogmag_exact, oracle.re);
        let dphase = row.dphase_exact - row.dphase_free;
        assert!((dphase - oracle.im).abs() < 1e-8, "t = {t}: {dphase} vs {}", oracle.im);
    }
}
