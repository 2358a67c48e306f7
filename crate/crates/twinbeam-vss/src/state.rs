//! The Gaussian twin-beam state after the crystal: delay and chirp transforms
//! and the second-order moments from which all field correlations follow.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::FrequencyGrid;
use crate::schmidt::SchmidtDecomposition;

/// Delay and quadratic chirp applied to the signal beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamTransform {
    pub delay_s: f64,
    pub chirp_s2: f64,
    pub chirp_center_rad_s: f64,
}

impl BeamTransform {
    pub fn identity(chirp_center_rad_s: f64) -> Self {
        BeamTransform { delay_s: 0.0, chirp_s2: 0.0, chirp_center_rad_s }
    }

    pub fn new(delay_s: f64, chirp_s2: f64, chirp_center_rad_s: f64) -> Self {
        BeamTransform { delay_s, chirp_s2, chirp_center_rad_s }
    }

    /// Phase θ(ω) multiplying the signal mode functions, f_s → e^{iθ} f_s.
    ///
    /// The operator picks up e^{-iθ}: â_s → e^{iξ(ω-ω_0)²} e^{-iωτ} â_s, which
    /// is the chirp of the source model together with Ê_s(t) → Ê_s(t + τ).
    pub fn signal_phase(&self, w: f64) -> f64 {
        let d = w - self.chirp_center_rad_s;
        w * self.delay_s - self.chirp_s2 * d * d
    }

    pub fn signal_phases(&self, grid: &FrequencyGrid) -> Vec<f64> {
        grid.values().iter().map(|&w| self.signal_phase(w)).collect()
    }
}

pub fn transform_modes(decomp: &SchmidtDecomposition, xform: &BeamTransform) -> SchmidtDecomposition {
    let mut d = decomp.clone();
    for (k, &w) in decomp.grid_s.values().iter().enumerate() {
        let theta = xform.signal_phase(w);
        if theta == 0.0 {
            continue;
        }
        let p = Complex64::cis(theta);
        for g in 0..d.n_modes() {
            d.modes_s[(k, g)] *= p;
        }
    }
    d
}

/// Second moments of the twin beam on the signal and idler grids.
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub grid_s: FrequencyGrid,
    pub grid_i: FrequencyGrid,
    /// Ψ(ω_s, ω_i) = ⟨â_s(ω_s) â_i(ω_i)⟩.
    pub pair: DMatrix<Complex64>,
    /// n_s(ω, ω') = ⟨â_s†(ω) â_s(ω')⟩.
    pub occ_s: DMatrix<Complex64>,
    /// n_i(ω, ω') = ⟨â_i†(ω) â_i(ω')⟩.
    pub occ_i: DMatrix<Complex64>,
}

fn occupation(modes: &DMatrix<Complex64>, v2: &[f64]) -> DMatrix<Complex64> {
    let n = modes.nrows();
    let mut occ = DMatrix::<Complex64>::zeros(n, n);
    for c in 0..n {
        for r in 0..=c {
            let mut acc = Complex64::new(0.0, 0.0);
            for (g, &w) in v2.iter().enumerate() {
                acc += modes[(r, g)] * modes[(c, g)].conj() * w;
            }
            occ[(r, c)] = acc;
            occ[(c, r)] = acc.conj();
        }
        occ[(c, c)].im = 0.0;
    }
    occ
}

pub fn compute_moments(decomp: &SchmidtDecomposition) -> MomentSet {
    let (ns, ni) = (decomp.grid_s.len(), decomp.grid_i.len());
    let uv: Vec<f64> = decomp.u.iter().zip(&decomp.v).map(|(u, v)| u * v).collect();
    let v2: Vec<f64> = decomp.v.iter().map(|v| v * v).collect();
    let mut pair = DMatrix::<Complex64>::zeros(ns, ni);
    for l in 0..ni {
        for k in 0..ns {
            let mut acc = Complex64::new(0.0, 0.0);
            for (g, &c) in uv.iter().enumerate() {
                acc += (decomp.modes_s[(k, g)] * decomp.modes_i[(l, g)]).conj() * c;
            }
            pair[(k, l)] = acc;
        }
    }
    MomentSet {
        grid_s: decomp.grid_s.clone(),
        grid_i: decomp.grid_i.clone(),
        pair,
        occ_s: occupation(&decomp.modes_s, &v2),
        occ_i: occupation(&decomp.modes_i, &v2),
    }
}

impl MomentSet {
    /// Moments after a signal phase θ_k, equivalent to transforming the
    /// modes first: Ψ → e^{-iθ_k} Ψ, n_s → e^{iθ_k} n_s e^{-iθ_k'}.
    pub fn with_signal_phase(&self, theta: &[f64]) -> MomentSet {
        let p: Vec<Complex64> = theta.iter().map(|&t| Complex64::cis(t)).collect();
        let mut m = self.clone();
        for l in 0..m.pair.ncols() {
            for k in 0..m.pair.nrows() {
                m.pair[(k, l)] *= p[k].conj();
            }
        }
        for c in 0..m.occ_s.ncols() {
            for r in 0..m.occ_s.nrows() {
                if r != c {
                    m.occ_s[(r, c)] *= p[r] * p[c].conj();
                }
            }
        }
        m
    }

    pub fn transformed(&self, xform: &BeamTransform) -> MomentSet {
        self.with_signal_phase(&xform.signal_phases(&self.grid_s))
    }

    /// Quadrature-weighted traces of n_s and n_i.
    pub fn photon_numbers(&self) -> (f64, f64) {
        let tr = |occ: &DMatrix<Complex64>, g: &FrequencyGrid| -> f64 {
            g.weights().iter().enumerate().map(|(k, w)| w * occ[(k, k)].re).sum()
        };
        (tr(&self.occ_s, &self.grid_s), tr(&self.occ_i, &self.grid_i))
    }

    /// Field correlation tables on a time grid. Entry (a, b) of the first
    /// matrix is ⟨E⁺(t_a)E⁺(t_b)⟩, of the second ⟨E⁻(t_a)E⁺(t_b)⟩, for the
    /// total field E_s(t + signal_shift) + E_i(t).
    pub fn correlation_tables(&self, times: &[f64], signal_shift: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let synth = |grid: &FrequencyGrid, shift: f64| {
            let w = grid.weights();
            DMatrix::from_fn(times.len(), grid.len(), |a, k| {
                let om = grid.values()[k];
                Complex64::from_polar(w[k] * om.sqrt(), -om * (times[a] + shift))
            })
        };
        let es = synth(&self.grid_s, signal_shift);
        let ei = synth(&self.grid_i, 0.0);
        let si = &es * &self.pair * ei.transpose();
        let anomalous = &si + si.transpose();
        let normal = es.map(|z| z.conj()) * &self.occ_s * es.transpose()
            + ei.map(|z| z.conj()) * &self.occ_i * ei.transpose();
        (anomalous, normal)
    }
}

/// ⟨E⁻(t2)E⁻(t1)E⁺(t2')E⁺(t1')⟩ for the total field by Gaussian factorisation.
pub fn g2_value(moments: &MomentSet, t2: f64, t1: f64, t2p: f64, t1p: f64) -> Complex64 {
    let times = [t2, t1, t2p, t1p];
    let (a, n) = moments.correlation_tables(&times, 0.0);
    g2_from_tables(&a, &n, (0, 1), (2, 3), true)
}

/// Wick sum for table indices: unprimed pair (2, 1), primed pair (2', 1').
pub(crate) fn g2_from_tables(
    a: &DMatrix<Complex64>,
    n: &DMatrix<Complex64>,
    (i2, i1): (usize, usize),
    (j2, j1): (usize, usize),
    exchange: bool,
) -> Complex64 {
    let pair = a[(i2, i1)].conj() * a[(j2, j1)];
    if !exchange {
        return pair;
    }
    pair + n[(i2, j2)] * n[(i1, j1)] + n[(i2, j1)] * n[(i1, j2)]
}
