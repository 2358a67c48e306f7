use nalgebra::DMatrix;
use num_complex::Complex64;
use twinbeam_vss::grid::FrequencyGrid;
use twinbeam_vss::schmidt::{apply_gain, calibrate_gain, mean_photon_number, schmidt_decompose, SchmidtDecomposition};
use twinbeam_vss::source::{build_jsa, phase_mismatch, CrystalParams, JointSpectralAmplitude, PumpParams};
use twinbeam_vss::units::{MM, PS, UM};
use twinbeam_vss::Error;

const DESK_G: [f64; 3] = [5.4 * PS, 5.2 * PS, 5.6 * PS];

fn desk_crystal() -> CrystalParams {
    CrystalParams::degenerate(0.801 * MM, DESK_G, 0.4 * UM).unwrap()
}

/// Same walk-off as the desk crystal but 1000× longer, so the sinc is
/// resolved on sub-eV grids.
fn long_crystal() -> CrystalParams {
    CrystalParams::degenerate(0.801, DESK_G, 0.4 * UM).unwrap()
}

fn grids(c: &CrystalParams, half_span: f64, n: usize) -> (FrequencyGrid, FrequencyGrid) {
    let [_, ws0, wi0] = c.central_frequencies();
    (FrequencyGrid::new(ws0, 2.0 * half_span, n).unwrap(), FrequencyGrid::new(wi0, 2.0 * half_span, n).unwrap())
}

fn long_jsa(n: usize) -> JointSpectralAmplitude {
    let c = long_crystal();
    let (gs, gi) = grids(&c, 4e13, n);
    build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(1.0 * PS, &c).unwrap()).unwrap()
}

fn weighted_inner(grid: &FrequencyGrid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    grid.weights().iter().zip(a).zip(b).map(|((w, x), y)| x.conj() * y * *w).sum()
}

#[test]
fn phase_mismatch_vanishes_at_centre() {
    let c = desk_crystal();
    let [_, ws0, wi0] = c.central_frequencies();
    assert_eq!(phase_mismatch(ws0, wi0, &c).unwrap(), 0.0);
}

#[test]
fn phase_mismatch_difference_direction() {
    let c = desk_crystal();
    let [_, ws0, wi0] = c.central_frequencies();
    let delta = 1e13;
    let dk = phase_mismatch(ws0 + delta, wi0 - delta, &c).unwrap();
    let expected = 0.4e-12 * delta;
    assert!((dk - expected).abs() < 1e-9 * expected, "{dk} vs {expected}");
}

#[test]
fn phase_mismatch_sum_direction_is_pump_matched() {
    let c = desk_crystal();
    let [_, ws0, wi0] = c.central_frequencies();
    let delta = 1e13;
    let dk = phase_mismatch(ws0 + delta, wi0 + delta, &c).unwrap();
    assert!(dk.abs() < 1e-9 * 5.4e-12 * delta, "{dk}");
}

#[test]
fn phase_mismatch_rejects_frequencies_outside_validity() {
    let c = desk_crystal();
    let [_, ws0, wi0] = c.central_frequencies();
    let err = phase_mismatch(1.6 * ws0, wi0, &c).unwrap_err();
    assert!(matches!(err, Error::DispersionRange(_)));
}

#[test]
fn crystal_rejects_inconsistent_wavelengths() {
    let err = CrystalParams::new(1e-3, DESK_G, [0.4 * UM, 0.8 * UM, 0.7 * UM]).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn jsa_rejects_non_positive_frequencies() {
    let c = desk_crystal();
    let gs = FrequencyGrid::new(1e13, 4e13, 8).unwrap();
    let gi = FrequencyGrid::new(c.central_frequencies()[2], 4e13, 8).unwrap();
    let err = build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(PS, &c).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn jsa_peaks_at_central_frequencies() {
    let jsa = long_jsa(65);
    let mut best = (0, 0, 0.0);
    for k in 0..65 {
        for l in 0..65 {
            let a = jsa.values[(k, l)].norm();
            if a > best.2 {
                best = (k, l, a);
            }
        }
    }
    assert_eq!((best.0, best.1), (32, 32));
}

#[test]
fn jsa_vanishes_at_first_sinc_zero() {
    let c = long_crystal();
    let [_, ws0, wi0] = c.central_frequencies();
    // Δk L = (G_i − G_s) δ L = 2π
    let delta = 2.0 * std::f64::consts::PI / (c.length_m * (DESK_G[2] - DESK_G[1]));
    let gs = FrequencyGrid::new(ws0, 2.0 * delta, 3).unwrap();
    let gi = FrequencyGrid::new(wi0, 2.0 * delta, 3).unwrap();
    let jsa = build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(PS, &c).unwrap()).unwrap();
    let max = jsa.values[(1, 1)].norm();
    assert!(jsa.values[(2, 0)].norm() < 1e-12 * max);
    assert!(jsa.values[(0, 2)].norm() < 1e-12 * max);
}

#[test]
fn sum_frequency_envelope_has_analytic_fwhm() {
    let c = desk_crystal();
    let tau_p = 1.0 * PS;
    let fwhm = 4.0 * 2f64.ln().sqrt() / tau_p;
    assert!((fwhm - 3.33e12).abs() < 0.01e12);
    // ω_s and ω_i both move by fwhm/4, so the sum moves by half the FWHM
    let (gs, gi) = grids(&c, 0.25 * fwhm, 3);
    let jsa = build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(tau_p, &c).unwrap()).unwrap();
    let env = |k: usize| jsa.values[(k, k)].norm() / (gs.values()[k] * gi.values()[k]).sqrt();
    for k in [0, 2] {
        let ratio = env(k) / env(1);
        assert!((ratio - 0.5).abs() < 1e-12, "{ratio}");
    }
}

#[test]
fn anti_diagonals_follow_the_pump_envelope() {
    let c = long_crystal();
    let tau_p = 1.0 * PS;
    let pump = PumpParams::for_crystal(tau_p, &c).unwrap();
    let (gs, gi) = grids(&c, 4e13, 33);
    let jsa = build_jsa(&gs, &gi, &c, &pump).unwrap();
    let l = c.length_m;
    let mut checked = 0;
    for k in 0..33 {
        for m in 0..33 {
            let (ws, wi) = (gs.values()[k], gi.values()[m]);
            let half = 0.5 * phase_mismatch(ws, wi, &c).unwrap() * l;
            let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
            if sinc.abs() < 1e-3 {
                continue;
            }
            let d = ws + wi - pump.center_rad_s;
            let measured = jsa.values[(k, m)].norm() / ((ws * wi).sqrt() * l * sinc.abs());
            let expected = (-0.25 * tau_p * tau_p * d * d).exp();
            assert!((measured - expected).abs() < 1e-8 * expected.max(1e-300), "({k},{m}): {measured} vs {expected}");
            checked += 1;
        }
    }
    assert!(checked > 500);
}

#[test]
fn normalized_jsa_has_unit_norm() {
    let jsa = long_jsa(48);
    let (ws, wi) = (jsa.grid_s.weights(), jsa.grid_i.weights());
    let phi = jsa.normalized();
    let mut s = 0.0;
    for k in 0..48 {
        for l in 0..48 {
            s += ws[k] * wi[l] * phi[(k, l)].norm_sqr();
        }
    }
    assert!((s - 1.0).abs() < 1e-12);
}

fn separable_jsa(n: usize) -> JointSpectralAmplitude {
    let gs = FrequencyGrid::new(2e15, 2e13, n).unwrap();
    let gi = FrequencyGrid::new(2.1e15, 3e13, n).unwrap();
    let a: Vec<Complex64> = gs.values().iter().map(|w| Complex64::from_polar((-((w - 2e15) / 4e12).powi(2)).exp(), 1e-13 * w)).collect();
    let b: Vec<Complex64> = gi.values().iter().map(|w| Complex64::new(0.0, (-((w - 2.1e15) / 6e12).powi(2)).exp())).collect();
    let values = DMatrix::from_fn(n, n, |k, l| a[k] * b[l]);
    let (ws, wi) = (gs.weights(), gi.weights());
    let mut n2 = 0.0;
    for k in 0..n {
        for l in 0..n {
            n2 += ws[k] * wi[l] * values[(k, l)].norm_sqr();
        }
    }
    JointSpectralAmplitude { grid_s: gs, grid_i: gi, values, norm: n2.sqrt(), edge_ratio: 0.0 }
}

#[test]
fn separable_amplitude_has_a_single_mode() {
    let d = schmidt_decompose(&separable_jsa(40), 5).unwrap();
    assert!((d.singular_values[0] - 1.0).abs() < 1e-12);
    assert!(d.singular_values[1..].iter().all(|&s| s < 1e-12));
    assert!((d.schmidt_number() - 1.0).abs() < 1e-10);
}

#[test]
fn full_rank_reconstruction_matches_amplitude() {
    let jsa = long_jsa(40);
    let d = schmidt_decompose(&jsa, 40).unwrap();
    assert!(d.residual < 1e-10);
    let diff = d.reconstruct() - jsa.normalized();
    // compare in the weighted norm, where Φ̃ has unit norm
    let (ws, wi) = (jsa.grid_s.weights(), jsa.grid_i.weights());
    let mut e = 0.0;
    for k in 0..40 {
        for l in 0..40 {
            e += ws[k] * wi[l] * diff[(k, l)].norm_sqr();
        }
    }
    assert!(e.sqrt() < 1e-10, "{}", e.sqrt());
}

#[test]
fn singular_values_are_normalised_and_descending() {
    let d = schmidt_decompose(&long_jsa(48), 48).unwrap();
    assert!((d.captured_norm() - 1.0).abs() < 1e-10);
    assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn modes_are_orthonormal_under_quadrature() {
    let d = schmidt_decompose(&long_jsa(48), 10).unwrap();
    for (grid, modes) in [(&d.grid_s, &d.modes_s), (&d.grid_i, &d.modes_i)] {
        for g in 0..10 {
            for h in 0..10 {
                let a: Vec<Complex64> = modes.column(g).iter().cloned().collect();
                let b: Vec<Complex64> = modes.column(h).iter().cloned().collect();
                let ip = weighted_inner(grid, &a, &b);
                let expect = if g == h { 1.0 } else { 0.0 };
                assert!((ip - expect).norm() < 1e-8, "({g},{h}) {ip}");
            }
        }
    }
}

#[test]
fn desk_amplitude_is_captured_by_five_hundred_modes() {
    let c = desk_crystal();
    let (gs, gi) = grids(&c, 0.1316 / twinbeam_vss::units::HBAR_EV_S, 128);
    let jsa = build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(PS, &c).unwrap()).unwrap();
    let d = schmidt_decompose(&jsa, 128.min(500)).unwrap();
    assert!(d.captured_norm() >= 1.0 - 1e-6);
}

#[test]
fn leading_singular_value_is_resolution_stable() {
    let coarse = schmidt_decompose(&long_jsa(64), 1).unwrap().singular_values[0];
    let fine = schmidt_decompose(&long_jsa(128), 1).unwrap().singular_values[0];
    assert!(((coarse - fine) / fine).abs() < 1e-4, "{coarse} vs {fine}");
}

#[test]
fn transposed_amplitude_has_identical_spectrum() {
    let jsa = long_jsa(40);
    let t = JointSpectralAmplitude {
        grid_s: jsa.grid_i.clone(),
        grid_i: jsa.grid_s.clone(),
        values: jsa.values.transpose(),
        norm: jsa.norm,
        edge_ratio: jsa.edge_ratio,
    };
    let a = schmidt_decompose(&jsa, 40).unwrap();
    let b = schmidt_decompose(&t, 40).unwrap();
    for (x, y) in a.singular_values.iter().zip(&b.singular_values) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn too_many_modes_rejected() {
    let err = schmidt_decompose(&long_jsa(16), 17).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

fn single_mode() -> SchmidtDecomposition {
    schmidt_decompose(&separable_jsa(24), 1).unwrap()
}

fn two_equal_modes() -> SchmidtDecomposition {
    let d = schmidt_decompose(&long_jsa(24), 2).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    SchmidtDecomposition { singular_values: vec![s, s], ..d }
}

#[test]
fn zero_gain_is_vacuum() {
    let d = apply_gain(&schmidt_decompose(&long_jsa(24), 6).unwrap(), 0.0).unwrap();
    assert!(d.u.iter().all(|&u| u == 1.0));
    assert!(d.v.iter().all(|&v| v == 0.0));
    assert_eq!(mean_photon_number(&d), 0.0);
}

#[test]
fn gain_satisfies_hyperbolic_identity() {
    let base = schmidt_decompose(&long_jsa(24), 6).unwrap();
    for gamma in [0.1, 1.0, 5.0, 12.0] {
        let d = apply_gain(&base, gamma).unwrap();
        for (u, v) in d.u.iter().zip(&d.v) {
            let scale = u * u;
            assert!((u * u - v * v - 1.0).abs() < 1e-12 * scale.max(1.0));
        }
    }
}

#[test]
fn negative_gain_rejected() {
    assert!(apply_gain(&single_mode(), -0.1).is_err());
}

#[test]
fn single_mode_photon_numbers() {
    let d = single_mode();
    let n100 = mean_photon_number(&apply_gain(&d, 10f64.asinh()).unwrap());
    assert!((n100 - 100.0).abs() < 1e-10);
    let n1 = mean_photon_number(&apply_gain(&d, 1f64.asinh()).unwrap());
    assert!((n1 - 1.0).abs() < 1e-12);
}

#[test]
fn calibration_recovers_closed_forms() {
    let gamma = calibrate_gain(&single_mode(), 100.0).unwrap();
    assert!((gamma - 10f64.asinh()).abs() < 1e-12);
    assert!((gamma - 2.998).abs() < 1e-3);

    let g0 = 3.7;
    let target = 2.0 * (g0 * std::f64::consts::FRAC_1_SQRT_2).sinh().powi(2);
    let gamma = calibrate_gain(&two_equal_modes(), target).unwrap();
    assert!((gamma - g0).abs() < 1e-12, "{gamma}");
}

#[test]
fn calibration_rejects_zero_target() {
    assert!(matches!(calibrate_gain(&single_mode(), 0.0), Err(Error::Domain(_))));
}

#[test]
fn desk_source_calibrates_to_one_hundred_photons() {
    let c = desk_crystal();
    let (gs, gi) = grids(&c, 0.1316 / twinbeam_vss::units::HBAR_EV_S, 96);
    let jsa = build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(PS, &c).unwrap()).unwrap();
    let d = schmidt_decompose(&jsa, 96).unwrap();
    let d = apply_gain(&d, calibrate_gain(&d, 100.0).unwrap()).unwrap();
    assert!((mean_photon_number(&d) - 100.0).abs() < 0.1);
}
