//! Physical constants and unit conversions. Internally everything is SI
//! (seconds, metres, rad/s) except energies, which stay in eV.

use std::f64::consts::PI;

/// Reduced Planck constant in eV·s.
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const FS: f64 = 1e-15;
pub const PS: f64 = 1e-12;
pub const FS2: f64 = 1e-30;
pub const MM: f64 = 1e-3;
pub const UM: f64 = 1e-6;

pub fn ev_to_rad_per_s(e: f64) -> f64 {
    e / HBAR_EV_S
}

pub fn rad_per_s_to_ev(w: f64) -> f64 {
    w * HBAR_EV_S
}

pub fn wavelength_to_rad_per_s(lambda_m: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / lambda_m
}

pub fn rad_per_s_to_wavelength(w: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / w
}
