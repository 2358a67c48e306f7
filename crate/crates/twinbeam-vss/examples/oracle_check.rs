//! Compares the frequency-domain TPA probability with the direct time-domain
//! quadrature on a small source.
//!
//!     cargo run --example oracle_check

use twinbeam_vss::grid::{linspace, FrequencyGrid};
use twinbeam_vss::schmidt::{apply_gain, schmidt_decompose};
use twinbeam_vss::source::{build_jsa, CrystalParams, PumpParams};
use twinbeam_vss::state::{compute_moments, transform_modes, BeamTransform};
use twinbeam_vss::tpa::{tpa_probability, tpa_probability_oracle, Level, MatterSystem, TpaSettings};
use twinbeam_vss::units::{FS, FS2, HBAR_EV_S, PS, UM};

fn main() -> twinbeam_vss::Result<()> {
    // long crystal so that the JSA fits on a small grid
    let c = CrystalParams::degenerate(0.8, [5.4 * PS, 5.2 * PS, 5.6 * PS], 0.4 * UM)?;
    let [_, ws0, wi0] = c.central_frequencies();
    // frequencies in units of u; the time window must outlast the level decay
    let u = 1e13;
    let span = 0.6 * u;
    let (gs, gi) = (FrequencyGrid::new(ws0, span, 12)?, FrequencyGrid::new(wi0, span, 12)?);
    let jsa = build_jsa(&gs, &gi, &c, &PumpParams::for_crystal(PS, &c)?)?;
    let d = apply_gain(&schmidt_decompose(&jsa, 6)?, 1.5)?;

    let ev = |w: f64| w * HBAR_EV_S;
    let mid = 0.5 * (ws0 + wi0);
    let levels = vec![
        Level { energy_ev: ev(mid + 0.5 * u), linewidth_ev: ev(u), dipole_product: 1.0 },
        Level { energy_ev: ev(mid - 0.3 * u), linewidth_ev: ev(u), dipole_product: 0.7 },
    ];
    let m = MatterSystem::new(0.0, ev(ws0 + wi0), levels)?;
    let s = TpaSettings { final_linewidth_ev: ev(1.5 * u), pair_only: false };
    let times = linspace(-20.0 / u, 4.0 / u, 63);
    for (tau, xi) in [(0.0, 0.0), (60.0 * FS, 0.0), (-110.0 * FS, 3000.0 * FS2)] {
        let x = BeamTransform::new(tau, xi, d.grid_s.center());
        let fast = tpa_probability(&compute_moments(&transform_modes(&d, &x)), &m, s)?;
        let slow = tpa_probability_oracle(&d, &m, &x, s, &times)?;
        println!("tau {:6.1} fs  xi {:5.0} fs^2  fast {fast:.6e}  oracle {slow:.6e}  rel {:.2e}", tau / FS, xi / FS2, (fast - slow).abs() / fast);
    }
    Ok(())
}
