//! Crystal-length-average spectrum next to the single-crystal spectrum.
//!
//!     cargo run --example length_baseline

use twinbeam_vss::analysis::{crystal_length_average, detect_peaks, spectrum};
use twinbeam_vss::config::ExperimentConfig;
use twinbeam_vss::tpa::tpa_trace;

fn main() -> twinbeam_vss::Result<()> {
    let cfg = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper-fig2d-baseline.toml").as_ref())?;
    let (model, matter, delays, settings) = (cfg.source_model()?, cfg.matter_system()?, cfg.delays()?, cfg.trace_settings());
    let lengths = cfg.baseline_lengths()?.expect("config has a [baseline] section");
    let avg = crystal_length_average(&lengths, &model, &matter, &delays, &settings, cfg.analysis.window)?;
    let single = spectrum(&tpa_trace(&model.decomposition()?, &matter, 0.0, &delays, &settings)?, cfg.analysis.window)?;

    for (name, s) in [("length average", &avg), ("single crystal", &single)] {
        let mut peaks = detect_peaks(s, cfg.match_policy().peaks).peaks;
        peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        let top: Vec<String> = peaks.iter().take(5).map(|p| format!("{:.4}", p.energy_ev)).collect();
        println!("{name}: {}", top.join(" "));
    }
    println!("level lines {:.4?}", matter.level_lines_ev());
    Ok(())
}
