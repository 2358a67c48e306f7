//! Chirp ensemble, relative variances and level identification.
//!
//!     cargo run --example chirp_variance [config.toml]

use twinbeam_vss::analysis::{chirp_ensemble, identify_levels, relative_variance};
use twinbeam_vss::config::ExperimentConfig;

fn main() -> twinbeam_vss::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper-fig2.toml").into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let d = cfg.source_model()?.decomposition()?;
    let matter = cfg.matter_system()?;
    let chirps = cfg.chirps()?;
    let spectra = chirp_ensemble(&d, &matter, &chirps, &cfg.delays()?, &cfg.trace_settings(), cfg.analysis.window)?;
    let report = relative_variance(&spectra, cfg.match_policy(), &chirps)?;

    println!("level lines {:.4?} eV", matter.level_lines_ev());
    for p in report.ranked().iter().take(8) {
        println!("  {:.5} eV  R = {:.3e}", p.energy_ev, p.relative_variance);
    }
    let ids = identify_levels(&report, matter.final_ev - matter.ground_ev, cfg.analysis.levels)?;
    for c in &ids.candidates {
        println!("peak {:.4} eV -> levels {:.4?}", c.peak_energy_ev, c.branches());
    }
    Ok(())
}
