mod common;

use common::*;
use num_complex::Complex64;
use twinbeam_vss::analysis::{detect_peaks, spectrum, PeakParams, Window};
use twinbeam_vss::grid::{linspace, FrequencyGrid};
use twinbeam_vss::schmidt::{apply_gain, calibrate_gain, schmidt_decompose};
use twinbeam_vss::source::{build_jsa, CrystalParams, PumpParams};
use twinbeam_vss::state::{compute_moments, transform_modes, BeamTransform};
use twinbeam_vss::tpa::*;
use twinbeam_vss::units::{FS, HBAR_EV_S, PS, UM};
use twinbeam_vss::Error;

fn one_level(energy_ev: f64, linewidth_ev: f64) -> MatterSystem {
    MatterSystem::new(0.0, 3.0996, vec![Level { energy_ev, linewidth_ev, dipole_product: 1.0 }]).unwrap()
}

#[test]
fn kernel_on_resonance_is_imaginary() {
    let (e, k) = (1.6, 2e-4);
    let m = one_level(e, k);
    let w = e / HBAR_EV_S;
    let t = transition_kernel(w, w, &m);
    let expected = 2.0 / (k / HBAR_EV_S);
    assert!(t.re.abs() < 1e-12 * t.norm());
    assert!((t.im - expected).abs() < 1e-12 * expected, "{t}");
}

#[test]
fn kernel_is_symmetric() {
    let m = MatterSystem::new(0.0, 3.0996, vec![Level::new(1.58), Level::new(1.61)]).unwrap();
    for (a, b) in [(2.3e15, 2.5e15), (1.0e15, 3.1e15), (2.41e15, 2.4e15)] {
        assert_eq!(transition_kernel(a, b, &m), transition_kernel(b, a, &m));
    }
}

#[test]
fn kernel_far_detuned_limit() {
    let (e, k) = (1.6, 1e-4);
    let m = one_level(e, k);
    let detuning = 100.0 * k / HBAR_EV_S;
    let w = e / HBAR_EV_S + detuning;
    let t = transition_kernel(w, w, &m).norm();
    let asymptote = 2.0 / detuning;
    assert!(((t - asymptote) / asymptote).abs() < 0.01);
}

#[test]
fn matter_validation() {
    assert!(MatterSystem::new(0.0, 3.0, vec![]).is_err());
    assert!(MatterSystem::new(0.0, 3.0, vec![Level::new(3.2)]).is_err());
    assert!(MatterSystem::new(0.0, 3.0, vec![Level { energy_ev: 1.5, linewidth_ev: 0.0, dipole_product: 1.0 }]).is_err());
}

#[test]
fn vacuum_absorbs_nothing() {
    let d = tiny_decomposition(8, 2, 0.0);
    let p = tpa_probability(&compute_moments(&d), &tiny_matter(&[0.5]), tiny_settings(false)).unwrap();
    assert_eq!(p, 0.0);
}

#[test]
fn non_positive_final_linewidth_rejected() {
    let d = tiny_decomposition(8, 2, 1.0);
    let s = TpaSettings { final_linewidth_ev: 0.0, pair_only: false };
    assert!(matches!(tpa_probability(&compute_moments(&d), &tiny_matter(&[0.5]), s), Err(Error::Domain(_))));
}

#[test]
fn probability_is_real_and_non_negative() {
    let d = tiny_decomposition(12, 4, 2.0);
    let m = tiny_matter(&[0.5, -0.2]);
    for (tau, xi) in [(0.0, 0.0), (1.3 / U, 0.0), (-0.6 / U, 0.9 / (U * U))] {
        let x = BeamTransform::new(tau, xi, d.grid_s.center());
        let engine = TpaEngine::new(&d.grid_s, &d.grid_i, &m, tiny_settings(false)).unwrap();
        let p = engine.probability(&compute_moments(&transform_modes(&d, &x)));
        assert!(p.pair >= 0.0 && p.exchange >= 0.0, "{p:?}");
    }
}

#[test]
fn dipole_scaling_is_quadratic() {
    let d = tiny_decomposition(12, 3, 1.5);
    let m = tiny_matter(&[0.4, -0.7]);
    let s = 3.7;
    let moments = compute_moments(&d);
    let base = tpa_probability(&moments, &m, tiny_settings(false)).unwrap();
    let scaled = tpa_probability(&moments, &m.with_dipoles_scaled(s), tiny_settings(false)).unwrap();
    assert!((scaled / base - s * s).abs() < 1e-12 * s * s);

    let delays = linspace(-2.0 / U, 2.0 / U, 17);
    let settings = TraceSettings { tpa: tiny_settings(false), nyquist_factor: 1e6 };
    let a = tpa_trace(&d, &m, 0.2 / (U * U), &delays, &settings).unwrap();
    let b = tpa_trace(&d, &m.with_dipoles_scaled(s), 0.2 / (U * U), &delays, &settings).unwrap();
    for (x, y) in a.normalized.iter().zip(&b.normalized) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn wide_acceptance_reduces_to_plain_kernel_overlap() {
    let d = tiny_decomposition(10, 3, 1.0);
    let m = tiny_matter(&[0.3]);
    let moments = compute_moments(&d);
    let settings = TpaSettings { final_linewidth_ev: 1e6 * energy(U), pair_only: true };
    let p = tpa_probability(&moments, &m, settings).unwrap();
    let (ws, wi) = (d.grid_s.weights(), d.grid_i.weights());
    let mut amp = Complex64::new(0.0, 0.0);
    for (k, &a) in d.grid_s.values().iter().enumerate() {
        for (l, &b) in d.grid_i.values().iter().enumerate() {
            amp += transition_kernel(a, b, &m) * moments.pair[(k, l)] * (ws[k] * wi[l] * (a * b).sqrt());
        }
    }
    let direct = amp.norm_sqr();
    assert!((p / direct - 1.0).abs() < 1e-8, "{p} vs {direct}");
}

#[test]
fn pair_only_drops_the_exchange_term() {
    let d = tiny_decomposition(10, 3, 2.0);
    let m = tiny_matter(&[0.3]);
    let moments = compute_moments(&d);
    let full = TpaEngine::new(&d.grid_s, &d.grid_i, &m, tiny_settings(false)).unwrap().probability(&moments);
    let pair = TpaEngine::new(&d.grid_s, &d.grid_i, &m, tiny_settings(true)).unwrap().probability(&moments);
    assert_eq!(pair.exchange, 0.0);
    assert_eq!(pair.pair, full.pair);
    assert!(full.exchange > 0.0);
}

#[test]
fn delay_grid_must_resolve_the_fastest_beat() {
    let m = one_level(1.6, 1e-4);
    let limit = max_delay_step(&m, 4.0);
    assert!((limit / FS - 2.6685).abs() < 1e-3);
    let err = check_delay_grid(&linspace(0.0, 300.0 * FS, 100), &m, 4.0).unwrap_err();
    match err {
        Error::Config(msg) => assert!(msg.contains("required Δτ < 2.6685 fs"), "{msg}"),
        e => panic!("{e}"),
    }
    assert!(check_delay_grid(&linspace(0.0, 100.0 * FS, 100), &m, 4.0).is_ok());
}

#[test]
fn trace_is_normalised_to_unit_maximum() {
    let d = tiny_decomposition(10, 3, 1.2);
    let settings = TraceSettings { tpa: tiny_settings(false), nyquist_factor: 1e6 };
    let t = tpa_trace(&d, &tiny_matter(&[0.5]), 0.0, &linspace(-3.0 / U, 3.0 / U, 41), &settings).unwrap();
    assert!(t.normalized.iter().all(|&x| (0.0..=1.0).contains(&x)));
    assert_eq!(t.normalized.iter().cloned().fold(0.0, f64::max), 1.0);
    assert_eq!(t.normalization, t.raw.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn trace_agrees_with_pointwise_transforms() {
    let d = tiny_decomposition(10, 3, 1.2);
    let m = tiny_matter(&[0.5, -0.1]);
    let xi = 0.3 / (U * U);
    let delays = linspace(-3.0 / U, 3.0 / U, 9);
    let settings = TraceSettings { tpa: tiny_settings(false), nyquist_factor: 1e6 };
    let t = tpa_trace(&d, &m, xi, &delays, &settings).unwrap();
    for (tau, raw) in delays.iter().zip(&t.raw) {
        let x = BeamTransform::new(*tau, xi, d.grid_s.center());
        let p = tpa_probability(&compute_moments(&transform_modes(&d, &x)), &m, settings.tpa).unwrap();
        assert!((p - raw).abs() < 1e-10 * p, "{p} vs {raw}");
    }
}

/// Degenerate source with the desk walk-off over a 0.8 m crystal, so that
/// signal and idler arrive up to 0.32 ps apart.
fn walk_off_source(n: usize, half_span_ev: f64) -> twinbeam_vss::schmidt::SchmidtDecomposition {
    let c = CrystalParams::degenerate(0.8, [5.4 * PS, 5.2 * PS, 5.6 * PS], 0.4 * UM).unwrap();
    let [_, ws0, wi0] = c.central_frequencies();
    let span = 2.0 * half_span_ev / HBAR_EV_S;
    let gs = FrequencyGrid::new(ws0, span, n).unwrap();
    let gi = FrequencyGrid::new(wi0, span, n).unwrap();
    let jsa = build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(PS, &c).unwrap()).unwrap();
    let d = schmidt_decompose(&jsa, n).unwrap();
    apply_gain(&d, calibrate_gain(&d, 10.0).unwrap()).unwrap()
}

#[test]
fn unequal_group_velocities_break_delay_symmetry() {
    let d = walk_off_source(32, 0.02);
    let m = MatterSystem::new(0.0, 3.0996, vec![Level::new(1.56)]).unwrap();
    let delays = [-0.15 * PS, 0.15 * PS];
    let settings = TraceSettings { tpa: TpaSettings { final_linewidth_ev: 2e-3, pair_only: false }, nyquist_factor: 1e3 };
    let t = tpa_trace(&d, &m, 0.0, &delays, &settings).unwrap();
    let (a, b) = (t.raw[0], t.raw[1]);
    assert!((a - b).abs() > 0.1 * a.max(b), "{a} vs {b}");
}

#[test]
fn single_level_trace_beats_at_doubled_detuning() {
    let c = CrystalParams::degenerate(0.8e-3, [5.4 * PS, 5.2 * PS, 5.6 * PS], 0.4 * UM).unwrap();
    let [_, ws0, wi0] = c.central_frequencies();
    let span = 2.0 * 0.2 / HBAR_EV_S;
    let (gs, gi) = (FrequencyGrid::new(ws0, span, 96).unwrap(), FrequencyGrid::new(wi0, span, 96).unwrap());
    let jsa = build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(PS, &c).unwrap()).unwrap();
    let d = schmidt_decompose(&jsa, 96).unwrap();
    let d = apply_gain(&d, calibrate_gain(&d, 100.0).unwrap()).unwrap();
    let level = 1.63;
    let m = MatterSystem::new(0.0, 3.0996, vec![Level::new(level)]).unwrap();
    let delays = linspace(-1.0 * PS, 1.0 * PS, 1024);
    let t = tpa_trace(&d, &m, 0.0, &delays, &TraceSettings::default()).unwrap();
    let spec = spectrum(&t, Window::Hann).unwrap();
    let peaks = detect_peaks(&spec, PeakParams::default());
    let top = peaks.peaks.iter().max_by(|a, b| a.magnitude.total_cmp(&b.magnitude)).unwrap();
    let line = (2.0 * level - 3.0996f64).abs();
    assert!((top.energy_ev - line).abs() <= spec.bin_width_ev() + 1e-12, "{} vs {line}", top.energy_ev);
}
