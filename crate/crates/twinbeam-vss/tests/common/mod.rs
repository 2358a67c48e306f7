#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use twinbeam_vss::grid::FrequencyGrid;
use twinbeam_vss::schmidt::{apply_gain, schmidt_decompose, SchmidtDecomposition};
use twinbeam_vss::source::JointSpectralAmplitude;
use twinbeam_vss::tpa::{Level, MatterSystem, TpaSettings};
use twinbeam_vss::units::HBAR_EV_S;

/// Frequency unit of the tiny fixtures, rad/s.
pub const U: f64 = 1e13;

pub fn energy(w: f64) -> f64 {
    w * HBAR_EV_S
}

/// Smooth correlated amplitude with a chirp-like phase, sampled directly.
pub fn tiny_jsa(n: usize, center: f64, half_span: f64, skew: f64) -> JointSpectralAmplitude {
    let gs = FrequencyGrid::new(center, 2.0 * half_span, n).unwrap();
    let gi = FrequencyGrid::new(center * (1.0 + skew), 2.0 * half_span, n).unwrap();
    let values = DMatrix::from_fn(n, n, |k, l| {
        let (ws, wi) = (gs.values()[k], gi.values()[l]);
        let sum = (ws + wi - gs.center() - gi.center()) / (0.25 * U);
        let diff = (ws - wi - gs.center() + gi.center()) / (0.5 * U);
        let phase = 0.7 * (ws - gs.center()) / U - 0.4 * sum * diff;
        Complex64::from_polar((-sum * sum - 0.5 * diff * diff).exp(), phase)
    });
    let (ws, wi) = (gs.weights(), gi.weights());
    let mut n2 = 0.0;
    for k in 0..n {
        for l in 0..n {
            n2 += ws[k] * wi[l] * values[(k, l)].norm_sqr();
        }
    }
    JointSpectralAmplitude { grid_s: gs, grid_i: gi, values, norm: n2.sqrt(), edge_ratio: 0.0 }
}

pub fn tiny_decomposition(n: usize, modes: usize, gamma: f64) -> SchmidtDecomposition {
    let jsa = tiny_jsa(n, 2.0 * U, 0.3 * U, 0.0);
    apply_gain(&schmidt_decompose(&jsa, modes).unwrap(), gamma).unwrap()
}

/// Ladder system tuned to the tiny fixtures: final state at twice the grid
/// centre, levels detuned by fractions of U with linewidth U.
pub fn tiny_matter(detunings: &[f64]) -> MatterSystem {
    let levels = detunings
        .iter()
        .map(|d| Level { energy_ev: energy((2.0 + d) * U), linewidth_ev: energy(U), dipole_product: 1.0 })
        .collect();
    MatterSystem::new(0.0, energy(4.0 * U), levels).unwrap()
}

pub fn tiny_settings(pair_only: bool) -> TpaSettings {
    TpaSettings { final_linewidth_ev: energy(1.5 * U), pair_only }
}

pub fn oracle_times(n: usize) -> Vec<f64> {
    twinbeam_vss::grid::linspace(-20.0 / U, 4.0 / U, n)
}
