//! Builds the three-level source, decomposes it and calibrates the gain.
//!
//!     cargo run --example jsa_schmidt [config.toml]

use twinbeam_vss::config::ExperimentConfig;
use twinbeam_vss::schmidt::{apply_gain, calibrate_gain, mean_photon_number, schmidt_decompose};

fn main() -> twinbeam_vss::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper-fig2.toml").into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let model = cfg.source_model()?;
    let jsa = model.jsa()?;
    println!("grid {} x {}, edge ratio {:.3}", jsa.grid_s.len(), jsa.grid_i.len(), jsa.edge_ratio);
    println!("entanglement time {:.3} fs", cfg.crystal_params()?.entanglement_time() * 1e15);

    let d = schmidt_decompose(&jsa, model.n_modes)?;
    println!("Schmidt number K = {:.2}, captured norm {:.12}", d.schmidt_number(), d.captured_norm());
    for (g, l) in d.singular_values.iter().take(5).enumerate() {
        println!("  lambda_{g} = {l:.5}");
    }
    let gamma = calibrate_gain(&d, model.target_photons)?;
    let d = apply_gain(&d, gamma)?;
    println!("gain {gamma:.4} -> N = {:.6}", mean_photon_number(&d));
    Ok(())
}
