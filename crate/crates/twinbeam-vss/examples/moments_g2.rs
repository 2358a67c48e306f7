//! Second-order moments of a chirped, delayed twin beam and a few g2 samples.
//!
//!     cargo run --example moments_g2

use twinbeam_vss::config::ExperimentConfig;
use twinbeam_vss::schmidt::{apply_gain, calibrate_gain, schmidt_decompose};
use twinbeam_vss::state::{compute_moments, g2_value, transform_modes, BeamTransform};
use twinbeam_vss::units::{FS, FS2};

fn main() -> twinbeam_vss::Result<()> {
    let mut cfg = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper-fig2.toml").as_ref())?;
    cfg.grid.points = 96;
    let model = cfg.source_model()?;
    let d = schmidt_decompose(&model.jsa()?, 96)?;
    let d = apply_gain(&d, calibrate_gain(&d, 100.0)?)?;

    for (tau_fs, xi_fs2) in [(0.0, 0.0), (40.0, 0.0), (0.0, 9.5), (40.0, 9.5)] {
        let x = BeamTransform::new(tau_fs * FS, xi_fs2 * FS2, d.grid_s.center());
        let m = compute_moments(&transform_modes(&d, &x));
        let (ns, ni) = m.photon_numbers();
        let g = g2_value(&m, 0.0, 0.0, 0.0, 0.0);
        println!("tau {tau_fs:5.1} fs  xi {xi_fs2:4.1} fs^2  N_s {ns:.4}  N_i {ni:.4}  G2(0) {:.4e}", g.re);
    }
    Ok(())
}
