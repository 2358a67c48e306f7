//! Two-photon absorption of the twin beam by a ladder system: frequency-domain
//! evaluation, a literal time-domain oracle, and delay traces.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::grid::{trapezoid_weights, uniform_step, FrequencyGrid};
use crate::quadrature::gregory_weights;
use crate::schmidt::SchmidtDecomposition;
use crate::state::{compute_moments, transform_modes, BeamTransform, MomentSet};
use crate::units::HBAR_EV_S;

pub const DEFAULT_LINEWIDTH_EV: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy_ev: f64,
    #[serde(default = "default_linewidth")]
    pub linewidth_ev: f64,
    /// μ_fj μ_jg / ħ².
    #[serde(default = "default_dipole")]
    pub dipole_product: f64,
}

fn default_linewidth() -> f64 {
    DEFAULT_LINEWIDTH_EV
}

fn default_dipole() -> f64 {
    1.0
}

impl Level {
    pub fn new(energy_ev: f64) -> Self {
        Level { energy_ev, linewidth_ev: DEFAULT_LINEWIDTH_EV, dipole_product: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatterSystem {
    pub ground_ev: f64,
    pub final_ev: f64,
    pub levels: Vec<Level>,
}

impl MatterSystem {
    pub fn new(ground_ev: f64, final_ev: f64, levels: Vec<Level>) -> Result<Self> {
        let m = MatterSystem { ground_ev, final_ev, levels };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Domain("matter system needs at least one intermediate level".into()));
        }
        for (j, l) in self.levels.iter().enumerate() {
            if !(self.ground_ev < l.energy_ev && l.energy_ev < self.final_ev) {
                return Err(Error::Domain(format!(
                    "level {j} at {} eV is outside ({}, {}) eV",
                    l.energy_ev, self.ground_ev, self.final_ev
                )));
            }
            if !(l.linewidth_ev > 0.0) {
                return Err(Error::Domain(format!("level {j} linewidth must be positive, got {}", l.linewidth_ev)));
            }
            if !l.dipole_product.is_finite() {
                return Err(Error::Domain(format!("level {j} dipole product is not finite")));
            }
        }
        Ok(())
    }

    /// Final-state energy above ground as an angular frequency.
    pub fn final_rad_s(&self) -> f64 {
        (self.final_ev - self.ground_ev) / HBAR_EV_S
    }

    /// Energies |2ε̃_j − ε_f| (measured from the ground state) at which the
    /// level beats appear in a delay spectrum.
    pub fn level_lines_ev(&self) -> Vec<f64> {
        let f = self.final_ev - self.ground_ev;
        self.levels.iter().map(|l| (2.0 * (l.energy_ev - self.ground_ev) - f).abs()).collect()
    }

    /// Energies |ε̃_j + ε̃_k − ε_f| for j < k.
    pub fn cross_lines_ev(&self) -> Vec<f64> {
        let f = self.final_ev - self.ground_ev;
        let mut out = Vec::new();
        for (j, a) in self.levels.iter().enumerate() {
            for b in &self.levels[j + 1..] {
                out.push(((a.energy_ev - self.ground_ev) + (b.energy_ev - self.ground_ev) - f).abs());
            }
        }
        out
    }

    pub fn with_dipoles_scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        for l in &mut m.levels {
            l.dipole_product *= s;
        }
        m
    }
}

/// T(ω_a, ω_b) = Σ_j c_j [1/(Ω_j − ω_a − iγ_j) + 1/(Ω_j − ω_b − iγ_j)] with
/// Ω_j = (ε̃_j − ε_g)/ħ and γ_j = κ_j/ħ.
pub fn transition_kernel(wa: f64, wb: f64, matter: &MatterSystem) -> Complex64 {
    let mut t = Complex64::new(0.0, 0.0);
    for l in &matter.levels {
        let om = (l.energy_ev - matter.ground_ev) / HBAR_EV_S;
        let g = l.linewidth_ev / HBAR_EV_S;
        t += l.dipole_product * (Complex64::new(om - wa, -g).inv() + Complex64::new(om - wb, -g).inv());
    }
    t
}

/// Final-state acceptance exp[−(ħ(ω_a+ω_b) − ε_f)² / 2κ_f²].
fn acceptance(w_sum: f64, wf: f64, sigma: f64) -> f64 {
    let x = (w_sum - wf) / sigma;
    (-0.5 * x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpaSettings {
    pub final_linewidth_ev: f64,
    pub pair_only: bool,
}

impl Default for TpaSettings {
    fn default() -> Self {
        TpaSettings { final_linewidth_ev: DEFAULT_LINEWIDTH_EV, pair_only: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpaProbability {
    pub pair: f64,
    pub exchange: f64,
}

impl TpaProbability {
    pub fn total(&self) -> f64 {
        self.pair + self.exchange
    }
}

/// Non-negligible entries of one block of the symmetrised absorption kernel.
#[derive(Debug, Clone, Default)]
struct Band {
    a: Vec<usize>,
    b: Vec<usize>,
    k: Vec<Complex64>,
}

impl Band {
    fn len(&self) -> usize {
        self.k.len()
    }

    fn dense(&self, rows: usize, cols: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(rows, cols);
        for e in 0..self.len() {
            m[(self.a[e], self.b[e])] = self.k[e];
        }
        m
    }
}

/// Above this band size the exchange contraction switches from gathered
/// quadratic forms to dense matrix products.
const GATHER_LIMIT: usize = 4096;
const BAND_CUTOFF: f64 = 1e-15;

/// Frequency-domain evaluator of the absorption probability for a fixed pair
/// of grids, matter system and acceptance window.
#[derive(Debug, Clone)]
pub struct TpaEngine {
    settings: TpaSettings,
    n_s: usize,
    n_i: usize,
    /// w_k w_l √(ω_k ω_l) D_f T on signal × idler; the pair amplitude is Σ K Ψ.
    pair: Band,
    /// Symmetrised kernel K/(2i) on signal×signal, idler×idler, signal×idler.
    ss: Band,
    ii: Band,
    si: Band,
}

/// Moments gathered onto the kernel bands.
#[derive(Debug, Clone)]
pub struct PreparedMoments {
    psi: Vec<Complex64>,
    exchange: Option<Exchange>,
}

#[derive(Debug, Clone)]
enum Exchange {
    Gathered { ss: DMatrix<Complex64>, ii: DMatrix<Complex64>, si: DMatrix<Complex64> },
    Dense(Box<MomentSet>),
}

impl TpaEngine {
    pub fn new(grid_s: &FrequencyGrid, grid_i: &FrequencyGrid, matter: &MatterSystem, settings: TpaSettings) -> Result<Self> {
        matter.validate()?;
        if !(settings.final_linewidth_ev > 0.0) {
            return Err(Error::Domain(format!(
                "final-state linewidth must be positive, got {}",
                settings.final_linewidth_ev
            )));
        }
        let wf = matter.final_rad_s();
        let sigma = settings.final_linewidth_ev / HBAR_EV_S;
        let amp = |g: &FrequencyGrid| -> Vec<f64> {
            g.weights().iter().zip(g.values()).map(|(w, om)| w * om.sqrt()).collect()
        };
        let (amp_s, amp_i) = (amp(grid_s), amp(grid_i));
        let block = |ga: &FrequencyGrid, aa: &[f64], gb: &FrequencyGrid, ab: &[f64]| -> Vec<(usize, usize, Complex64)> {
            let mut out = Vec::new();
            for (k, &wk) in ga.values().iter().enumerate() {
                for (l, &wl) in gb.values().iter().enumerate() {
                    let d = acceptance(wk + wl, wf, sigma);
                    if d < 1e-40 {
                        continue;
                    }
                    out.push((k, l, transition_kernel(wk, wl, matter) * (aa[k] * ab[l] * d)));
                }
            }
            out
        };
        let raw_si = block(grid_s, &amp_s, grid_i, &amp_i);
        let raw_ss = block(grid_s, &amp_s, grid_s, &amp_s);
        let raw_ii = block(grid_i, &amp_i, grid_i, &amp_i);
        let max = raw_si.iter().chain(&raw_ss).chain(&raw_ii).fold(0.0f64, |m, e| m.max(e.2.norm()));
        let keep = |raw: &[(usize, usize, Complex64)], scale: Complex64| -> Band {
            let mut band = Band::default();
            for &(a, b, k) in raw {
                if k.norm() > BAND_CUTOFF * max {
                    band.a.push(a);
                    band.b.push(b);
                    band.k.push(k * scale);
                }
            }
            band
        };
        let half_over_i = Complex64::new(0.0, -0.5);
        Ok(TpaEngine {
            settings,
            n_s: grid_s.len(),
            n_i: grid_i.len(),
            pair: keep(&raw_si, Complex64::new(1.0, 0.0)),
            ss: keep(&raw_ss, half_over_i),
            ii: keep(&raw_ii, half_over_i),
            si: keep(&raw_si, half_over_i),
        })
    }

    pub fn settings(&self) -> TpaSettings {
        self.settings
    }

    /// Number of kernel entries kept in the signal×idler block.
    pub fn band_len(&self) -> usize {
        self.pair.len()
    }

    pub fn prepare(&self, m: &MomentSet) -> PreparedMoments {
        let psi = (0..self.pair.len()).map(|e| m.pair[(self.pair.a[e], self.pair.b[e])]).collect();
        let exchange = if self.settings.pair_only {
            None
        } else if self.ss.len().max(self.ii.len()).max(self.si.len()) <= GATHER_LIMIT {
            let gather = |band: &Band, na: &DMatrix<Complex64>, nb: &DMatrix<Complex64>| {
                let n = band.len();
                DMatrix::from_fn(n, n, |e, f| na[(band.a[e], band.a[f])] * nb[(band.b[e], band.b[f])])
            };
            Some(Exchange::Gathered {
                ss: gather(&self.ss, &m.occ_s, &m.occ_s),
                ii: gather(&self.ii, &m.occ_i, &m.occ_i),
                si: gather(&self.si, &m.occ_s, &m.occ_i),
            })
        } else {
            Some(Exchange::Dense(Box::new(m.clone())))
        };
        PreparedMoments { psi, exchange }
    }

    pub fn probability(&self, m: &MomentSet) -> TpaProbability {
        self.evaluate(&self.prepare(m), None)
    }

    /// Probability for prepared moments with an optional signal phase θ_k
    /// (see [`MomentSet::with_signal_phase`]) folded in on the fly.
    pub fn evaluate(&self, p: &PreparedMoments, theta: Option<&[f64]>) -> TpaProbability {
        let phase: Option<Vec<Complex64>> = theta.map(|t| t.iter().map(|&x| Complex64::cis(-x)).collect());
        let ph = |k: usize| phase.as_ref().map_or(Complex64::new(1.0, 0.0), |v| v[k]);

        let mut amp = Complex64::new(0.0, 0.0);
        for e in 0..self.pair.len() {
            amp += self.pair.k[e] * p.psi[e] * ph(self.pair.a[e]);
        }
        let pair = amp.norm_sqr();

        let exchange = match &p.exchange {
            None => 0.0,
            Some(Exchange::Gathered { ss, ii, si }) => {
                let x_ss: Vec<Complex64> =
                    (0..self.ss.len()).map(|e| self.ss.k[e] * ph(self.ss.a[e]) * ph(self.ss.b[e])).collect();
                let x_si: Vec<Complex64> = (0..self.si.len()).map(|e| self.si.k[e] * ph(self.si.a[e])).collect();
                let e_ss = quadratic_form(ss, &x_ss);
                let e_ii = quadratic_form(ii, &self.ii.k);
                let e_si = quadratic_form(si, &x_si);
                2.0 * (e_ss + e_ii + 2.0 * e_si)
            }
            Some(Exchange::Dense(m)) => {
                let m = match theta {
                    Some(t) => m.with_signal_phase(t),
                    None => (**m).clone(),
                };
                let (ks, ki, kx) = (
                    self.ss.dense(self.n_s, self.n_s),
                    self.ii.dense(self.n_i, self.n_i),
                    self.si.dense(self.n_s, self.n_i),
                );
                let contract = |k: &DMatrix<Complex64>, na: &DMatrix<Complex64>, nb: &DMatrix<Complex64>| -> f64 {
                    let inner = na * k * nb.transpose();
                    k.iter().zip(inner.iter()).map(|(a, b)| (a.conj() * b).re).sum()
                };
                2.0 * (contract(&ks, &m.occ_s, &m.occ_s) + contract(&ki, &m.occ_i, &m.occ_i) + 2.0 * contract(&kx, &m.occ_s, &m.occ_i))
            }
        };
        TpaProbability { pair, exchange }
    }
}

/// Re(x^H H x) for Hermitian H.
fn quadratic_form(h: &DMatrix<Complex64>, x: &[Complex64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for f in 0..n {
        let col = h.column(f);
        let mut acc = Complex64::new(0.0, 0.0);
        for e in 0..n {
            acc += x[e].conj() * col[e];
        }
        s += (acc * x[f]).re;
    }
    s
}

/// Absorption probability for moments that already carry the delay and chirp.
pub fn tpa_probability(moments: &MomentSet, matter: &MatterSystem, settings: TpaSettings) -> Result<f64> {
    let engine = TpaEngine::new(&moments.grid_s, &moments.grid_i, matter, settings)?;
    Ok(engine.probability(moments).total())
}

pub const ORACLE_MAX_POINTS: usize = 64;
const ORACLE_ORDER: usize = 12;

/// Literal evaluation of the nested time integrals with Wick-factorised field
/// correlations. The delay is applied as a shift of the signal time argument,
/// independently of the spectral-phase route used by [`TpaEngine`]. The final
/// state is given a Gaussian temporal window whose Fourier transform is the
/// acceptance D_f of the frequency-domain path.
pub fn tpa_probability_oracle(
    decomp: &SchmidtDecomposition,
    matter: &MatterSystem,
    xform: &BeamTransform,
    settings: TpaSettings,
    times: &[f64],
) -> Result<f64> {
    if times.len() > ORACLE_MAX_POINTS {
        return Err(Error::Config(format!(
            "oracle time grid has {} points; at most {ORACLE_MAX_POINTS} allowed",
            times.len()
        )));
    }
    matter.validate()?;
    if !(settings.final_linewidth_ev > 0.0) {
        return Err(Error::Domain("final-state linewidth must be positive".into()));
    }
    let h = uniform_step(times)?;
    let n = times.len();
    let chirp_only = BeamTransform { delay_s: 0.0, ..*xform };
    let moments = compute_moments(&transform_modes(decomp, &chirp_only));
    let (a, nn) = moments.correlation_tables(times, xform.delay_s);

    let wf = matter.final_rad_s();
    let sigma = settings.final_linewidth_ev / HBAR_EV_S;
    let outer = trapezoid_weights(n, h);
    let mut nodes: Vec<(usize, usize, Complex64)> = Vec::with_capacity(n * (n + 1) / 2);
    for i2 in 0..n {
        let t2 = times[i2];
        let window = sigma / (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * sigma * sigma * t2 * t2).exp();
        let inner = gregory_weights(i2 + 1, h, ORACLE_ORDER);
        for i1 in 0..=i2 {
            let dt = t2 - times[i1];
            let mut m = Complex64::new(0.0, 0.0);
            for l in &matter.levels {
                let om = (l.energy_ev - matter.ground_ev) / HBAR_EV_S;
                let g = l.linewidth_ev / HBAR_EV_S;
                m += l.dipole_product * Complex64::from_polar((-g * dt).exp(), -om * dt);
            }
            m *= Complex64::cis(wf * t2) * (window * outer[i2] * inner[i1]);
            nodes.push((i2, i1, m));
        }
    }

    let mut amp = Complex64::new(0.0, 0.0);
    for &(i2, i1, m) in &nodes {
        amp += m * a[(i2, i1)];
    }
    let mut p = amp.norm_sqr();
    if !settings.pair_only {
        let mut ex = Complex64::new(0.0, 0.0);
        for &(i2, i1, m) in &nodes {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(j2, j1, mp) in &nodes {
                acc += (nn[(i2, j2)] * nn[(i1, j1)] + nn[(i2, j1)] * nn[(i1, j2)]) * mp;
            }
            ex += m.conj() * acc;
        }
        p += ex.re;
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSettings {
    pub tpa: TpaSettings,
    /// Multiplier on the basic limit πħ/(ε_f − ε_g) for the delay step.
    pub nyquist_factor: f64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        TraceSettings { tpa: TpaSettings::default(), nyquist_factor: 4.0 }
    }
}

/// Largest delay step accepted for a matter system.
pub fn max_delay_step(matter: &MatterSystem, nyquist_factor: f64) -> f64 {
    nyquist_factor * std::f64::consts::PI * HBAR_EV_S / (matter.final_ev - matter.ground_ev)
}

pub fn check_delay_grid(delays: &[f64], matter: &MatterSystem, nyquist_factor: f64) -> Result<f64> {
    let step = uniform_step(delays).map_err(|e| Error::Config(format!("delay grid: {e}")))?;
    let limit = max_delay_step(matter, nyquist_factor);
    if step >= limit {
        return Err(Error::Config(format!(
            "delay step {:.4} fs violates the sampling rule; required Δτ < {:.4} fs",
            step / crate::units::FS,
            limit / crate::units::FS
        )));
    }
    Ok(step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpaTrace {
    pub delays_s: Vec<f64>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub normalization: f64,
    pub chirp_s2: f64,
    pub fingerprint: String,
}

impl TpaTrace {
    pub fn from_raw(delays_s: Vec<f64>, raw: Vec<f64>, chirp_s2: f64, fingerprint: String) -> Result<Self> {
        let normalization = raw.iter().cloned().fold(0.0f64, f64::max);
        if !(normalization > 0.0) || !normalization.is_finite() {
            return Err(Error::Numerical(format!("cannot normalise a trace with maximum {normalization}")));
        }
        let normalized = raw.iter().map(|p| p / normalization).collect();
        Ok(TpaTrace { delays_s, raw, normalized, normalization, chirp_s2, fingerprint })
    }
}

pub(crate) fn trace_fingerprint(
    decomp: &SchmidtDecomposition,
    matter: &MatterSystem,
    chirp_s2: f64,
    delays: &[f64],
    settings: &TraceSettings,
) -> String {
    let mut f = Fingerprint::new("tpa-trace");
    f.f64s(decomp.grid_s.values()).f64s(decomp.grid_i.values());
    f.f64s(&decomp.singular_values).f64s(&decomp.u).f64s(&decomp.v);
    f.matrix(&decomp.modes_s).matrix(&decomp.modes_i);
    f.f64(matter.ground_ev).f64(matter.final_ev);
    for l in &matter.levels {
        f.f64(l.energy_ev).f64(l.linewidth_ev).f64(l.dipole_product);
    }
    f.f64(chirp_s2).f64s(delays);
    f.f64(settings.tpa.final_linewidth_ev).u64(settings.tpa.pair_only as u64).f64(settings.nyquist_factor);
    f.finish()
}

/// Raw probabilities over a delay grid for one chirp. Moments are assembled
/// once; each delay enters as the diagonal signal phase ω_k τ.
pub fn raw_trace(
    engine: &TpaEngine,
    decomp: &SchmidtDecomposition,
    chirp_s2: f64,
    delays: &[f64],
) -> Vec<f64> {
    let center = decomp.grid_s.center();
    let chirped = transform_modes(decomp, &BeamTransform::new(0.0, chirp_s2, center));
    let prepared = engine.prepare(&compute_moments(&chirped));
    let omegas = decomp.grid_s.values();
    delays
        .par_iter()
        .map(|&tau| {
            let theta: Vec<f64> = omegas.iter().map(|&w| w * tau).collect();
            engine.evaluate(&prepared, Some(&theta)).total()
        })
        .collect()
}

pub fn tpa_trace(
    decomp: &SchmidtDecomposition,
    matter: &MatterSystem,
    chirp_s2: f64,
    delays: &[f64],
    settings: &TraceSettings,
) -> Result<TpaTrace> {
    check_delay_grid(delays, matter, settings.nyquist_factor)?;
    let engine = TpaEngine::new(&decomp.grid_s, &decomp.grid_i, matter, settings.tpa)?;
    let raw = raw_trace(&engine, decomp, chirp_s2, delays);
    let fp = trace_fingerprint(decomp, matter, chirp_s2, delays, settings);
    TpaTrace::from_raw(delays.to_vec(), raw, chirp_s2, fp)
}
