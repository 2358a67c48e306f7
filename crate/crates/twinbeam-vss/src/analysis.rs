//! Delay spectra, peak detection, chirp-ensemble relative variances, level
//! identification and the crystal-length-average baseline.

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::grid::uniform_step;
use crate::schmidt::SchmidtDecomposition;
use crate::source::SourceModel;
use crate::tpa::{check_delay_grid, raw_trace, tpa_trace, trace_fingerprint, MatterSystem, TpaEngine, TpaTrace, TraceSettings};
use crate::units::HBAR_EV_S;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    None,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann if n < 2 => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
                .collect(),
        }
    }
}

/// One-sided magnitude spectrum of a delay trace; energies are ħ times the
/// angular frequency conjugate to τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub energies_ev: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fingerprint: String,
}

impl Spectrum {
    pub fn bin_width_ev(&self) -> f64 {
        self.energies_ev[1] - self.energies_ev[0]
    }

    /// Index of the bin closest to `energy_ev`.
    pub fn bin_of(&self, energy_ev: f64) -> usize {
        let b = (energy_ev / self.bin_width_ev()).round();
        (b.max(0.0) as usize).min(self.energies_ev.len() - 1)
    }

    pub fn scaled(&self, s: f64) -> Spectrum {
        Spectrum { magnitudes: self.magnitudes.iter().map(|m| m * s).collect(), ..self.clone() }
    }
}

/// Spectrum of arbitrary samples on a uniform delay grid.
pub fn spectrum_of(delays_s: &[f64], values: &[f64], window: Window, fingerprint: String) -> Result<Spectrum> {
    let h = uniform_step(delays_s)?;
    if values.len() != delays_s.len() {
        return Err(Error::Domain("trace values and delays differ in length".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let taper = window.coefficients(n);
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = values
        .iter()
        .zip(&taper)
        .map(|(v, w)| rustfft::num_complex::Complex::new((v - mean) * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let d_e = HBAR_EV_S * 2.0 * std::f64::consts::PI / (n as f64 * h);
    Ok(Spectrum {
        energies_ev: (0..bins).map(|k| d_e * k as f64).collect(),
        magnitudes: buf[..bins].iter().map(|z| z.norm()).collect(),
        fingerprint,
    })
}

/// Spectrum of the unnormalised trace values.
pub fn spectrum(trace: &TpaTrace, window: Window) -> Result<Spectrum> {
    let mut f = Fingerprint::new("spectrum");
    f.str(&trace.fingerprint).str(&format!("{window:?}"));
    spectrum_of(&trace.delays_s, &trace.raw, window, f.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    /// Minimum topographic prominence as a fraction of the largest magnitude
    /// above the cutoff.
    pub prominence: f64,
    pub min_separation_ev: f64,
    /// Bins below this energy are ignored.
    pub cutoff_ev: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams { prominence: 1e-3, min_separation_ev: 0.0, cutoff_ev: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub energy_ev: f64,
    pub magnitude: f64,
    pub bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    pub params: PeakParams,
}

fn prominence(m: &[f64], lo: usize, i: usize) -> f64 {
    let h = m[i];
    let mut left = h;
    let mut j = i;
    while j > lo {
        j -= 1;
        if m[j] > h {
            break;
        }
        left = left.min(m[j]);
    }
    let mut right = h;
    let mut j = i;
    while j + 1 < m.len() {
        j += 1;
        if m[j] > h {
            break;
        }
        right = right.min(m[j]);
    }
    h - left.max(right)
}

pub fn detect_peaks(spec: &Spectrum, params: PeakParams) -> PeakSet {
    let m = &spec.magnitudes;
    let lo = spec.energies_ev.iter().position(|&e| e >= params.cutoff_ev).unwrap_or(m.len());
    let top = m[lo.min(m.len())..].iter().cloned().fold(0.0f64, f64::max);
    let mut found: Vec<Peak> = Vec::new();
    for i in lo.max(1)..m.len().saturating_sub(1) {
        if m[i] > m[i - 1] && m[i] > m[i + 1] && prominence(m, lo, i) >= params.prominence * top {
            found.push(Peak { energy_ev: spec.energies_ev[i], magnitude: m[i], bin: i });
        }
    }
    found.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.bin.cmp(&b.bin)));
    let mut kept: Vec<Peak> = Vec::new();
    for p in found {
        if kept.iter().all(|q| (q.energy_ev - p.energy_ev).abs() >= params.min_separation_ev) {
            kept.push(p);
        }
    }
    kept.sort_by_key(|p| p.bin);
    PeakSet { peaks: kept, params }
}

/// Traces for every chirp of an ensemble, evaluated in parallel.
pub fn chirp_ensemble_traces(
    decomp: &SchmidtDecomposition,
    matter: &MatterSystem,
    chirps_s2: &[f64],
    delays: &[f64],
    settings: &TraceSettings,
) -> Result<Vec<TpaTrace>> {
    if chirps_s2.len() < 2 {
        return Err(Error::Domain(format!("a chirp ensemble needs at least 2 members, got {}", chirps_s2.len())));
    }
    check_delay_grid(delays, matter, settings.nyquist_factor)?;
    let engine = TpaEngine::new(&decomp.grid_s, &decomp.grid_i, matter, settings.tpa)?;
    chirps_s2
        .par_iter()
        .enumerate()
        .map(|(index, &xi)| {
            let raw = raw_trace(&engine, decomp, xi, delays);
            let fp = trace_fingerprint(decomp, matter, xi, delays, settings);
            TpaTrace::from_raw(delays.to_vec(), raw, xi, fp).map_err(|e| Error::Member { index, source: Box::new(e) })
        })
        .collect()
}

pub fn chirp_ensemble(
    decomp: &SchmidtDecomposition,
    matter: &MatterSystem,
    chirps_s2: &[f64],
    delays: &[f64],
    settings: &TraceSettings,
    window: Window,
) -> Result<Vec<Spectrum>> {
    chirp_ensemble_traces(decomp, matter, chirps_s2, delays, settings)?
        .iter()
        .enumerate()
        .map(|(index, t)| spectrum(t, window).map_err(|e| Error::Member { index, source: Box::new(e) }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPolicy {
    pub peaks: PeakParams,
    /// Half-width of the matching window around a mean-spectrum peak, in bins.
    pub match_bins: usize,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy { peaks: PeakParams::default(), match_bins: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakStatistic {
    pub energy_ev: f64,
    pub bin: usize,
    pub relative_variance: f64,
    pub mean_magnitude: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPeak {
    pub energy_ev: f64,
    pub bin: usize,
    pub missing_members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub schema_version: u32,
    pub peaks: Vec<PeakStatistic>,
    pub excluded: Vec<ExcludedPeak>,
    pub ensemble_size: usize,
    pub chirps_s2: Vec<f64>,
    pub policy: MatchPolicy,
    pub bin_width_ev: f64,
}

impl VarianceReport {
    /// Peaks ordered by relative variance, ties broken by energy.
    pub fn ranked(&self) -> Vec<&PeakStatistic> {
        let mut v: Vec<&PeakStatistic> = self.peaks.iter().collect();
        v.sort_by(|a, b| a.relative_variance.total_cmp(&b.relative_variance).then(a.energy_ev.total_cmp(&b.energy_ev)));
        v
    }
}

/// Population variance over squared mean, two-pass.
pub fn relative_variance_of(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    var / (mean * mean)
}

pub fn mean_spectrum(spectra: &[Spectrum]) -> Spectrum {
    let n = spectra.len() as f64;
    let mut mags = vec![0.0; spectra[0].magnitudes.len()];
    for s in spectra {
        for (a, b) in mags.iter_mut().zip(&s.magnitudes) {
            *a += b;
        }
    }
    let mut f = Fingerprint::new("mean-spectrum");
    for s in spectra {
        f.str(&s.fingerprint);
    }
    Spectrum { energies_ev: spectra[0].energies_ev.clone(), magnitudes: mags.iter().map(|m| m / n).collect(), fingerprint: f.finish() }
}

pub fn relative_variance(spectra: &[Spectrum], policy: MatchPolicy, chirps_s2: &[f64]) -> Result<VarianceReport> {
    if spectra.len() < 2 {
        return Err(Error::Domain(format!("relative variance needs at least 2 spectra, got {}", spectra.len())));
    }
    let axis = &spectra[0].energies_ev;
    if spectra.iter().any(|s| &s.energies_ev != axis || s.magnitudes.len() != axis.len()) {
        return Err(Error::Domain("spectra do not share an energy axis".into()));
    }
    let mean = mean_spectrum(spectra);
    let detected = detect_peaks(&mean, policy.peaks);
    let nbins = axis.len();
    let mut peaks = Vec::new();
    let mut excluded = Vec::new();
    for p in &detected.peaks {
        let lo = p.bin.saturating_sub(policy.match_bins);
        let hi = (p.bin + policy.match_bins).min(nbins - 1);
        let mut samples = Vec::with_capacity(spectra.len());
        let mut missing = Vec::new();
        for (idx, s) in spectra.iter().enumerate() {
            let m = &s.magnitudes;
            let is_max = (lo..=hi).any(|i| i > 0 && i + 1 < nbins && m[i] > m[i - 1] && m[i] > m[i + 1]);
            if is_max {
                samples.push(m[lo..=hi].iter().cloned().fold(f64::MIN, f64::max));
            } else {
                missing.push(idx);
            }
        }
        if missing.is_empty() {
            let n = samples.len() as f64;
            peaks.push(PeakStatistic {
                energy_ev: p.energy_ev,
                bin: p.bin,
                relative_variance: relative_variance_of(&samples),
                mean_magnitude: samples.iter().sum::<f64>() / n,
                samples: samples.len(),
            });
        } else {
            log::warn!(
                "peak at {:.5} eV missing in {} of {} members; excluded",
                p.energy_ev,
                missing.len(),
                spectra.len()
            );
            excluded.push(ExcludedPeak { energy_ev: p.energy_ev, bin: p.bin, missing_members: missing });
        }
    }
    Ok(VarianceReport {
        schema_version: SCHEMA_VERSION,
        peaks,
        excluded,
        ensemble_size: spectra.len(),
        chirps_s2: chirps_s2.to_vec(),
        policy,
        bin_width_ev: spectra[0].bin_width_ev(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCandidate {
    pub peak_energy_ev: f64,
    pub relative_variance: f64,
    /// (ε_f + Ω)/2, in (ε_f/2, ε_f).
    pub upper_ev: f64,
    /// (ε_f − Ω)/2, in (0, ε_f/2); absent when Ω = 0.
    pub lower_ev: Option<f64>,
}

impl LevelCandidate {
    pub fn branches(&self) -> Vec<f64> {
        std::iter::once(self.upper_ev).chain(self.lower_ev).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedLevels {
    pub schema_version: u32,
    pub final_ev: f64,
    pub requested: usize,
    pub truncated: bool,
    pub candidates: Vec<LevelCandidate>,
}

/// Picks the `k` lowest-variance peaks and inverts Ω = |2ε̃ − ε_f|. Energies
/// are measured from the ground state.
pub fn identify_levels(report: &VarianceReport, final_ev: f64, k: usize) -> Result<IdentifiedLevels> {
    if report.peaks.is_empty() {
        return Err(Error::Domain("variance report has no peaks".into()));
    }
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let ranked = report.ranked();
    let truncated = k > ranked.len();
    if truncated {
        log::warn!("requested {k} levels but only {} peaks are available", ranked.len());
    }
    let candidates = ranked
        .iter()
        .take(k)
        .map(|p| {
            let om = p.energy_ev;
            LevelCandidate {
                peak_energy_ev: om,
                relative_variance: p.relative_variance,
                upper_ev: 0.5 * (final_ev + om),
                lower_ev: (om != 0.0).then(|| 0.5 * (final_ev - om)),
            }
        })
        .collect();
    Ok(IdentifiedLevels { schema_version: SCHEMA_VERSION, final_ev, requested: k, truncated, candidates })
}

/// Original virtual-state spectroscopy: the trace is averaged over crystals
/// of different lengths (each with its own decomposition and gain calibrated
/// to the same photon number) before the Fourier transform.
pub fn crystal_length_average(
    lengths_m: &[f64],
    source: &SourceModel,
    matter: &MatterSystem,
    delays: &[f64],
    settings: &TraceSettings,
    window: Window,
) -> Result<Spectrum> {
    if lengths_m.len() < 2 {
        return Err(Error::Domain(format!("length average needs at least 2 lengths, got {}", lengths_m.len())));
    }
    check_delay_grid(delays, matter, settings.nyquist_factor)?;
    let traces: Vec<TpaTrace> = lengths_m
        .par_iter()
        .map(|&l| {
            let run = || -> Result<TpaTrace> {
                let d = source.with_length(l)?.decomposition()?;
                tpa_trace(&d, matter, 0.0, delays, settings)
            };
            run().map_err(|e| Error::Length { length_m: l, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let n = traces.len() as f64;
    let mut avg = vec![0.0; delays.len()];
    let mut f = Fingerprint::new("length-average");
    for t in &traces {
        f.str(&t.fingerprint);
        for (a, p) in avg.iter_mut().zip(&t.raw) {
            *a += p;
        }
    }
    for a in &mut avg {
        *a /= n;
    }
    f.str(&format!("{window:?}"));
    spectrum_of(delays, &avg, window, f.finish())
}
