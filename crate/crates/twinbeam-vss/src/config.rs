//! Experiment configuration. Every dimensioned key carries its unit in the
//! name; values are converted to SI when the pipeline objects are built.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{MatchPolicy, PeakParams, Window};
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::grid::{linspace, FrequencyGrid};
use crate::source::{CrystalParams, PumpParams, SourceModel};
use crate::tpa::{Level, MatterSystem, TpaSettings, TraceSettings, DEFAULT_LINEWIDTH_EV};
use crate::units::{ev_to_rad_per_s, FS2, MM, PS, UM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    pub length_mm: f64,
    pub g_pump_ps_per_m: f64,
    pub g_signal_ps_per_m: f64,
    pub g_idler_ps_per_m: f64,
    pub pump_wavelength_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_wavelength_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler_wavelength_um: Option<f64>,
    #[serde(default = "half")]
    pub validity_fraction: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    pub duration_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    /// Half-width of each frequency grid expressed as ħΔω.
    pub half_span_ev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    pub target_photons: f64,
    /// Retained Schmidt modes; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomLevels {
    pub count: usize,
    pub window_ev: [f64; 2],
    pub min_spacing_ev: f64,
    #[serde(default = "default_linewidth")]
    pub linewidth_ev: f64,
    #[serde(default = "one")]
    pub dipole_product: f64,
}

fn default_linewidth() -> f64 {
    DEFAULT_LINEWIDTH_EV
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatterConfig {
    #[serde(default)]
    pub ground_ev: f64,
    pub final_ev: f64,
    #[serde(default = "default_linewidth")]
    pub final_linewidth_ev: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomLevels>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    pub start_ps: f64,
    pub stop_ps: f64,
    pub points: usize,
    #[serde(default = "four")]
    pub nyquist_factor: f64,
}

fn four() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpConfig {
    pub start_fs2: f64,
    pub stop_fs2: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub window: Window,
    #[serde(default = "default_prominence")]
    pub prominence: f64,
    #[serde(default)]
    pub min_separation_ev: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff_ev: f64,
    #[serde(default = "one_bin")]
    pub match_bins: usize,
    #[serde(default = "three")]
    pub levels: usize,
}

fn default_prominence() -> f64 {
    1e-3
}

fn default_cutoff() -> f64 {
    0.01
}

fn one_bin() -> usize {
    1
}

fn three() -> usize {
    3
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window: Window::Hann,
            prominence: default_prominence(),
            min_separation_ev: 0.0,
            cutoff_ev: default_cutoff(),
            match_bins: 1,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub start_mm: f64,
    pub stop_mm: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub pair_only: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub crystal: CrystalConfig,
    pub pump: PumpConfig,
    pub grid: GridConfig,
    pub gain: GainConfig,
    pub matter: MatterConfig,
    pub delay: DelayConfig,
    pub chirp: ChirpConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical (key-sorted) JSON form.
    pub fn fingerprint(&self) -> String {
        hash_json(self)
    }

    pub fn crystal_params(&self) -> Result<CrystalParams> {
        let c = &self.crystal;
        let g = [c.g_pump_ps_per_m, c.g_signal_ps_per_m, c.g_idler_ps_per_m].map(|x| x * PS);
        let lp = c.pump_wavelength_um * UM;
        let ls = c.signal_wavelength_um.map_or(2.0 * lp, |x| x * UM);
        let li = c.idler_wavelength_um.map_or(2.0 * lp, |x| x * UM);
        let mut p = CrystalParams { length_m: c.length_mm * MM, inv_group_velocity: g, wavelengths_m: [lp, ls, li], validity_fraction: c.validity_fraction };
        p.validate().map_err(|e| Error::Config(format!("crystal: {e}")))?;
        p.validity_fraction = c.validity_fraction;
        Ok(p)
    }

    pub fn source_model(&self) -> Result<SourceModel> {
        let crystal = self.crystal_params()?;
        let pump = PumpParams::for_crystal(self.pump.duration_ps * PS, &crystal).map_err(|e| Error::Config(format!("pump: {e}")))?;
        let [_, ws0, wi0] = crystal.central_frequencies();
        let span = 2.0 * ev_to_rad_per_s(self.grid.half_span_ev);
        let n = self.grid.points;
        let grid_s = FrequencyGrid::new(ws0, span, n).map_err(|e| Error::Config(format!("grid: {e}")))?;
        let grid_i = FrequencyGrid::new(wi0, span, n).map_err(|e| Error::Config(format!("grid: {e}")))?;
        let n_modes = self.gain.modes.unwrap_or(n);
        if n_modes == 0 || n_modes > n {
            return Err(Error::Config(format!("gain.modes must lie in 1..={n}, got {n_modes}")));
        }
        if !(self.gain.target_photons > 0.0) {
            return Err(Error::Config(format!("gain.target_photons must be positive, got {}", self.gain.target_photons)));
        }
        Ok(SourceModel { crystal, pump, grid_s, grid_i, n_modes, target_photons: self.gain.target_photons })
    }

    pub fn matter_system(&self) -> Result<MatterSystem> {
        let m = &self.matter;
        let sys = match (&m.random, m.levels.is_empty()) {
            (Some(_), false) => return Err(Error::Config("matter: give either `levels` or `random`, not both".into())),
            (Some(r), true) => crate::pipeline::generate_demo_system(self.run.seed, m.ground_ev, m.final_ev, r)?,
            (None, _) => MatterSystem::new(m.ground_ev, m.final_ev, m.levels.clone())?,
        };
        Ok(sys)
    }

    pub fn delays(&self) -> Result<Vec<f64>> {
        let d = &self.delay;
        if d.points < 2 || !(d.stop_ps > d.start_ps) {
            return Err(Error::Config(format!("delay grid [{}, {}] ps with {} points is empty", d.start_ps, d.stop_ps, d.points)));
        }
        Ok(linspace(d.start_ps * PS, d.stop_ps * PS, d.points))
    }

    pub fn chirps(&self) -> Result<Vec<f64>> {
        let c = &self.chirp;
        if c.count < 2 {
            return Err(Error::Config(format!("chirp ensemble needs at least 2 values, got {}", c.count)));
        }
        Ok(linspace(c.start_fs2 * FS2, c.stop_fs2 * FS2, c.count))
    }

    pub fn baseline_lengths(&self) -> Result<Option<Vec<f64>>> {
        match &self.baseline {
            None => Ok(None),
            Some(b) if b.count < 2 => Err(Error::Config(format!("baseline needs at least 2 lengths, got {}", b.count))),
            Some(b) => Ok(Some(linspace(b.start_mm * MM, b.stop_mm * MM, b.count))),
        }
    }

    pub fn trace_settings(&self) -> TraceSettings {
        TraceSettings {
            tpa: TpaSettings { final_linewidth_ev: self.matter.final_linewidth_ev, pair_only: self.run.pair_only },
            nyquist_factor: self.delay.nyquist_factor,
        }
    }

    pub fn match_policy(&self) -> MatchPolicy {
        let a = &self.analysis;
        MatchPolicy {
            peaks: PeakParams { prominence: a.prominence, min_separation_ev: a.min_separation_ev, cutoff_ev: a.cutoff_ev },
            match_bins: a.match_bins,
        }
    }

    /// Checks every stage's preconditions without computing anything.
    pub fn validate(&self) -> Result<()> {
        self.source_model()?;
        let matter = self.matter_system()?;
        if !(self.matter.final_linewidth_ev > 0.0) {
            return Err(Error::Config("matter.final_linewidth_ev must be positive".into()));
        }
        crate::tpa::check_delay_grid(&self.delays()?, &matter, self.delay.nyquist_factor)?;
        self.chirps()?;
        self.baseline_lengths()?;
        if self.analysis.levels == 0 {
            return Err(Error::Config("analysis.levels must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn hash_json<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value).expect("config serialises").to_string();
    let mut f = Fingerprint::new("json");
    f.str(&canonical);
    f.finish()
}
