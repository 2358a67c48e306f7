//! Pulsed parametric down-conversion: crystal and pump models and the joint
//! spectral amplitude on a discrete frequency grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::units::wavelength_to_rad_per_s;

/// Nonlinear crystal with first-order (group velocity) dispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalParams {
    pub length_m: f64,
    /// Inverse group velocities G_p, G_s, G_i in s/m.
    pub inv_group_velocity: [f64; 3],
    /// Central wavelengths of pump, signal and idler in metres.
    pub wavelengths_m: [f64; 3],
    /// Allowed relative excursion from the central frequencies before the
    /// linear dispersion model is considered invalid.
    pub validity_fraction: f64,
}

impl CrystalParams {
    pub fn new(length_m: f64, inv_group_velocity: [f64; 3], wavelengths_m: [f64; 3]) -> Result<Self> {
        let c = CrystalParams { length_m, inv_group_velocity, wavelengths_m, validity_fraction: 0.5 };
        c.validate()?;
        Ok(c)
    }

    /// Degenerate crystal with λ_s = λ_i = 2λ_p.
    pub fn degenerate(length_m: f64, inv_group_velocity: [f64; 3], pump_wavelength_m: f64) -> Result<Self> {
        let l = pump_wavelength_m;
        Self::new(length_m, inv_group_velocity, [l, 2.0 * l, 2.0 * l])
    }

    pub fn with_length(&self, length_m: f64) -> Result<Self> {
        let mut c = self.clone();
        c.length_m = length_m;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0) || !self.length_m.is_finite() {
            return Err(Error::Domain(format!("crystal length must be positive, got {}", self.length_m)));
        }
        if self.inv_group_velocity.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::Domain(format!(
                "inverse group velocities must be positive, got {:?}",
                self.inv_group_velocity
            )));
        }
        let [lp, ls, li] = self.wavelengths_m;
        if [lp, ls, li].iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Domain(format!("wavelengths must be positive, got {:?}", self.wavelengths_m)));
        }
        let lhs = 1.0 / lp;
        let rhs = 1.0 / ls + 1.0 / li;
        if ((lhs - rhs) / lhs).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "wavelengths violate energy conservation: 1/{lp} != 1/{ls} + 1/{li}"
            )));
        }
        if !(self.validity_fraction > 0.0) {
            return Err(Error::Domain("validity fraction must be positive".into()));
        }
        Ok(())
    }

    /// Central angular frequencies (ω_p0, ω_s0, ω_i0).
    pub fn central_frequencies(&self) -> [f64; 3] {
        let ws = wavelength_to_rad_per_s(self.wavelengths_m[1]);
        let wi = wavelength_to_rad_per_s(self.wavelengths_m[2]);
        // ω_p0 is tied to ω_s0 + ω_i0 so that central phase matching is exact
        [ws + wi, ws, wi]
    }

    /// Time walk-off between signal and idler across the crystal, L·|G_s − G_i|.
    pub fn entanglement_time(&self) -> f64 {
        self.length_m * (self.inv_group_velocity[1] - self.inv_group_velocity[2]).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpParams {
    pub duration_s: f64,
    pub center_rad_s: f64,
}

impl PumpParams {
    pub fn new(duration_s: f64, center_rad_s: f64) -> Result<Self> {
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(Error::Domain(format!("pump duration must be positive, got {duration_s}")));
        }
        if !(center_rad_s > 0.0) {
            return Err(Error::Domain(format!("pump frequency must be positive, got {center_rad_s}")));
        }
        Ok(PumpParams { duration_s, center_rad_s })
    }

    /// Pump matched to the crystal's central pump frequency.
    pub fn for_crystal(duration_s: f64, crystal: &CrystalParams) -> Result<Self> {
        Self::new(duration_s, crystal.central_frequencies()[0])
    }
}

/// Linearised phase mismatch Δk in 1/m.
pub fn phase_mismatch(ws: f64, wi: f64, crystal: &CrystalParams) -> Result<f64> {
    let [wp0, ws0, wi0] = crystal.central_frequencies();
    let f = crystal.validity_fraction;
    if (ws - ws0).abs() > f * ws0 || (wi - wi0).abs() > f * wi0 {
        return Err(Error::DispersionRange(format!(
            "(ω_s, ω_i) = ({ws:e}, {wi:e}) rad/s lies outside ±{:.0}% of ({ws0:e}, {wi0:e})",
            100.0 * f
        )));
    }
    let [gp, gs, gi] = crystal.inv_group_velocity;
    Ok(gp * (ws + wi - wp0) - gs * (ws - ws0) - gi * (wi - wi0))
}

#[derive(Debug, Clone)]
pub struct JointSpectralAmplitude {
    pub grid_s: FrequencyGrid,
    pub grid_i: FrequencyGrid,
    /// Unnormalised Φ(ω_s, ω_i), rows signal, columns idler.
    pub values: DMatrix<Complex64>,
    /// 𝒩 with 𝒩² = Σ w_s w_i |Φ|².
    pub norm: f64,
    /// Largest |Φ| on the grid boundary relative to the global maximum.
    pub edge_ratio: f64,
}

impl JointSpectralAmplitude {
    pub fn normalized(&self) -> DMatrix<Complex64> {
        self.values.map(|z| z / self.norm)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

pub fn build_jsa(
    grid_s: &FrequencyGrid,
    grid_i: &FrequencyGrid,
    crystal: &CrystalParams,
    pump: &PumpParams,
) -> Result<JointSpectralAmplitude> {
    crystal.validate()?;
    if grid_s.min() <= 0.0 || grid_i.min() <= 0.0 {
        return Err(Error::Domain("frequency grids must be strictly positive".into()));
    }
    let (ns, ni) = (grid_s.len(), grid_i.len());
    let l = crystal.length_m;
    let tp2 = pump.duration_s * pump.duration_s;
    let mut values = DMatrix::<Complex64>::zeros(ns, ni);
    for (m, &ws) in grid_s.values().iter().enumerate() {
        for (n, &wi) in grid_i.values().iter().enumerate() {
            let dk = phase_mismatch(ws, wi, crystal)?;
            let d = ws + wi - pump.center_rad_s;
            let env = (ws * wi).sqrt() * (-0.25 * tp2 * d * d).exp();
            let half = 0.5 * dk * l;
            values[(m, n)] = Complex64::from_polar(env * l * sinc(half), -half);
        }
    }
    let (w_s, w_i) = (grid_s.weights(), grid_i.weights());
    let mut norm2 = 0.0;
    for n in 0..ni {
        for m in 0..ns {
            norm2 += w_s[m] * w_i[n] * values[(m, n)].norm_sqr();
        }
    }
    let max = values.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let mut edge = 0.0f64;
    for m in 0..ns {
        edge = edge.max(values[(m, 0)].norm()).max(values[(m, ni - 1)].norm());
    }
    for n in 0..ni {
        edge = edge.max(values[(0, n)].norm()).max(values[(ns - 1, n)].norm());
    }
    let edge_ratio = if max > 0.0 { edge / max } else { 0.0 };
    if edge_ratio > 1e-3 {
        log::warn!("joint spectral amplitude at the grid edge is {edge_ratio:.2e} of its maximum; widen the grid");
    }
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::Numerical(format!("joint spectral amplitude has norm² {norm2}")));
    }
    Ok(JointSpectralAmplitude { grid_s: grid_s.clone(), grid_i: grid_i.clone(), values, norm: norm2.sqrt(), edge_ratio })
}

/// Everything needed to produce a gained Schmidt decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub crystal: CrystalParams,
    pub pump: PumpParams,
    pub grid_s: FrequencyGrid,
    pub grid_i: FrequencyGrid,
    pub n_modes: usize,
    pub target_photons: f64,
}

impl SourceModel {
    pub fn jsa(&self) -> Result<JointSpectralAmplitude> {
        build_jsa(&self.grid_s, &self.grid_i, &self.crystal, &self.pump)
    }

    /// JSA → Schmidt modes → gain calibrated to the target photon number.
    pub fn decomposition(&self) -> Result<crate::schmidt::SchmidtDecomposition> {
        use crate::schmidt::{apply_gain, calibrate_gain, schmidt_decompose};
        let d = schmidt_decompose(&self.jsa()?, self.n_modes)?;
        let gamma = calibrate_gain(&d, self.target_photons)?;
        apply_gain(&d, gamma)
    }

    pub fn with_length(&self, length_m: f64) -> Result<Self> {
        Ok(SourceModel { crystal: self.crystal.with_length(length_m)?, ..self.clone() })
    }
}
