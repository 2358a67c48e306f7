//! TPA probability versus delay for the three-level system, printed as CSV.
//!
//!     cargo run --example tpa_trace > trace.csv

use twinbeam_vss::config::ExperimentConfig;
use twinbeam_vss::tpa::tpa_trace;

fn main() -> twinbeam_vss::Result<()> {
    let cfg = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper-fig2.toml").as_ref())?;
    let d = cfg.source_model()?.decomposition()?;
    let trace = tpa_trace(&d, &cfg.matter_system()?, 0.0, &cfg.delays()?, &cfg.trace_settings())?;
    println!("tau_fs,p");
    for (t, p) in trace.delays_s.iter().zip(&trace.normalized) {
        println!("{:.3},{p:.6}", t * 1e15);
    }
    Ok(())
}
