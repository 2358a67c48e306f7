//! Runs every stage with caching and lists the outputs.
//!
//!     cargo run --example pipeline [config.toml] [out-dir]

use std::path::PathBuf;

use twinbeam_vss::config::ExperimentConfig;
use twinbeam_vss::pipeline::{run_pipeline, RunOptions, Target};

fn main() -> twinbeam_vss::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper-fig2.toml").into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/pipeline-example".into()));
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let opts = RunOptions { out_dir: out.clone(), cache_dir: Some(out.join(".cache")), emit_gnuplot: true };
    let m = run_pipeline(&cfg, Target::All, &opts)?;
    for s in &m.stages {
        println!("{:<16} {:>8.2} s {}", s.name, s.seconds, if s.cache_hit { "(cached)" } else { "" });
    }
    for f in &m.files {
        println!("{:>10} B  {}", f.bytes, out.join(&f.path).display());
    }
    Ok(())
}
