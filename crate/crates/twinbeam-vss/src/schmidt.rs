//! Schmidt decomposition of the joint spectral amplitude and the Bogoliubov
//! gain that turns it into an intense twin beam.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::source::JointSpectralAmplitude;

#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub grid_s: FrequencyGrid,
    pub grid_i: FrequencyGrid,
    /// λ_g, descending.
    pub singular_values: Vec<f64>,
    /// Column g holds f_{s,g} sampled on `grid_s`.
    pub modes_s: DMatrix<Complex64>,
    /// Column g holds f_{i,g} sampled on `grid_i`.
    pub modes_i: DMatrix<Complex64>,
    pub gain: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Frobenius norm of Φ̃ minus its truncated reconstruction.
    pub residual: f64,
}

impl SchmidtDecomposition {
    pub fn n_modes(&self) -> usize {
        self.singular_values.len()
    }

    /// Σ λ_g² over the retained modes.
    pub fn captured_norm(&self) -> f64 {
        self.singular_values.iter().map(|l| l * l).sum()
    }

    /// Schmidt number K = 1 / Σ λ_g⁴ (with λ renormalised over retained modes).
    pub fn schmidt_number(&self) -> f64 {
        let s2 = self.captured_norm();
        let s4: f64 = self.singular_values.iter().map(|l| (l * l / s2).powi(2)).sum();
        1.0 / s4
    }

    /// Builds a decomposition directly from mode data. Modes must be
    /// orthonormal under the trapezoid weights of their grids.
    pub fn from_modes(
        grid_s: FrequencyGrid,
        grid_i: FrequencyGrid,
        singular_values: Vec<f64>,
        modes_s: DMatrix<Complex64>,
        modes_i: DMatrix<Complex64>,
    ) -> Result<Self> {
        let g = singular_values.len();
        if modes_s.shape() != (grid_s.len(), g) || modes_i.shape() != (grid_i.len(), g) {
            return Err(Error::Domain("mode matrices do not match grids and singular values".into()));
        }
        Ok(SchmidtDecomposition {
            grid_s,
            grid_i,
            singular_values,
            modes_s,
            modes_i,
            gain: 0.0,
            u: vec![1.0; g],
            v: vec![0.0; g],
            residual: 0.0,
        })
    }

    /// Reconstructs Σ_g λ_g f*_{s,g}(ω_s) f*_{i,g}(ω_i) on the grids.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let scaled = DMatrix::from_fn(self.modes_s.nrows(), self.n_modes(), |k, g| {
            self.modes_s[(k, g)].conj() * self.singular_values[g]
        });
        scaled * self.modes_i.map(|z| z.conj()).transpose()
    }
}

fn weighted(jsa: &JointSpectralAmplitude) -> DMatrix<Complex64> {
    let sw_s: Vec<f64> = jsa.grid_s.weights().iter().map(|w| w.sqrt()).collect();
    let sw_i: Vec<f64> = jsa.grid_i.weights().iter().map(|w| w.sqrt()).collect();
    let inv = 1.0 / jsa.norm;
    DMatrix::from_fn(jsa.values.nrows(), jsa.values.ncols(), |k, l| jsa.values[(k, l)] * (sw_s[k] * sw_i[l] * inv))
}

pub fn schmidt_decompose(jsa: &JointSpectralAmplitude, n_modes: usize) -> Result<SchmidtDecomposition> {
    let (ns, ni) = jsa.shape();
    if n_modes == 0 || n_modes > ns.min(ni) {
        return Err(Error::Domain(format!("n_modes must lie in 1..={}, got {n_modes}", ns.min(ni))));
    }
    let a = weighted(jsa);
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 10_000).ok_or_else(|| {
        let fro = a.norm();
        let max = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let bad = a.iter().filter(|z| !z.re.is_finite() || !z.im.is_finite()).count();
        Error::Numerical(format!(
            "SVD did not converge on {ns}×{ni} matrix (Frobenius norm {fro:e}, max entry {max:e}, {bad} non-finite entries)"
        ))
    })?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));
    order.truncate(n_modes);

    let inv_sw_s: Vec<f64> = jsa.grid_s.weights().iter().map(|w| 1.0 / w.sqrt()).collect();
    let inv_sw_i: Vec<f64> = jsa.grid_i.weights().iter().map(|w| 1.0 / w.sqrt()).collect();
    // A = U Σ V^H = Σ_g σ_g U_{kg} conj(V_{lg}); with f*_s = U/√w and f*_i = conj(V)/√w
    let modes_s = DMatrix::from_fn(ns, n_modes, |k, g| u[(k, order[g])].conj() * inv_sw_s[k]);
    let modes_i = DMatrix::from_fn(ni, n_modes, |l, g| v_t[(order[g], l)].conj() * inv_sw_i[l]);
    let singular_values: Vec<f64> = order.iter().map(|&g| sigma[g]).collect();

    let mut rebuilt = DMatrix::<Complex64>::zeros(ns, ni);
    for &g in &order {
        let s = sigma[g];
        for l in 0..ni {
            let right = v_t[(g, l)] * s;
            for k in 0..ns {
                rebuilt[(k, l)] += u[(k, g)] * right;
            }
        }
    }
    let residual = (a - rebuilt).norm();

    let mut d = SchmidtDecomposition::from_modes(jsa.grid_s.clone(), jsa.grid_i.clone(), singular_values, modes_s, modes_i)?;
    d.residual = residual;
    Ok(d)
}

pub fn apply_gain(decomp: &SchmidtDecomposition, gamma: f64) -> Result<SchmidtDecomposition> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("gain must be non-negative and finite, got {gamma}")));
    }
    let mut d = decomp.clone();
    d.gain = gamma;
    d.u = d.singular_values.iter().map(|l| (gamma * l).cosh()).collect();
    d.v = d.singular_values.iter().map(|l| (gamma * l).sinh()).collect();
    Ok(d)
}

pub fn mean_photon_number(decomp: &SchmidtDecomposition) -> f64 {
    decomp.v.iter().map(|v| v * v).sum()
}

fn photons_at(lambdas: &[f64], gamma: f64) -> f64 {
    lambdas.iter().map(|l| (gamma * l).sinh().powi(2)).sum()
}

/// Finds γ with Σ sinh²(γλ_g) = target by safeguarded Newton iteration.
pub fn calibrate_gain(decomp: &SchmidtDecomposition, target: f64) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Domain(format!("target photon number must be positive, got {target}")));
    }
    let lambdas = &decomp.singular_values;
    if lambdas.iter().all(|&l| l == 0.0) {
        return Err(Error::Calibration("all singular values vanish".into()));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut iterations = 0;
    while photons_at(lambdas, hi) < target {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations > 200 || !hi.is_finite() {
            return Err(Error::Calibration(format!("could not bracket target N = {target}")));
        }
    }
    let mut gamma = 0.5 * (lo + hi);
    for _ in 0..200 {
        let n = photons_at(lambdas, gamma);
        let err = n - target;
        if err.abs() <= 1e-14 * target {
            return Ok(gamma);
        }
        if err > 0.0 {
            hi = gamma;
        } else {
            lo = gamma;
        }
        let slope: f64 = lambdas.iter().map(|l| l * (2.0 * gamma * l).sinh()).sum();
        let newton = gamma - err / slope;
        gamma = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let n = photons_at(lambdas, gamma);
    if ((n - target) / target).abs() < 1e-3 {
        Ok(gamma)
    } else {
        Err(Error::Calibration(format!("no convergence in 200 iterations (N = {n}, target {target})")))
    }
}
