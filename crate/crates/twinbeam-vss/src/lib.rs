//! Virtual-state spectroscopy with phase-chirped intense twin beams.
//!
//! The pipeline runs from the joint spectral amplitude of a type-II source
//! ([`source`]) through its Schmidt decomposition and gain ([`schmidt`]), the
//! chirped and delayed second-order moments ([`state`]) and the two-photon
//! absorption probability of a ladder system ([`tpa`]) to the delay spectra,
//! chirp-ensemble variances and level identification ([`analysis`]).
//! [`pipeline`] ties the stages together with a content-addressed cache and
//! writes the output files; the `vss` binary is a thin wrapper around it.
//!
//! Runnable examples:
//!
//! ```text
//! cargo run --example jsa_schmidt      # source, Schmidt modes, gain calibration
//! cargo run --example moments_g2       # moments and g2 under delay and chirp
//! cargo run --example tpa_trace        # TPA probability versus delay
//! cargo run --example oracle_check     # fast path against time-domain quadrature
//! cargo run --example chirp_variance   # relative variances and level candidates
//! cargo run --example length_baseline  # crystal-length-average spectrum
//! cargo run --example pipeline         # every stage, cached, with outputs
//! ```

pub mod analysis;
pub mod config;
pub mod error;
pub mod fingerprint;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod quadrature;
pub mod schmidt;
pub mod source;
pub mod state;
pub mod tpa;
pub mod units;

pub use error::{Error, Result};
