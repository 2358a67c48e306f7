use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twinbeam_vss::config::ExperimentConfig;
use twinbeam_vss::pipeline::{default_cache_dir, run_pipeline, RunOptions, Target};

#[derive(Parser)]
#[command(name = "vss", version, about = "Chirped twin-beam virtual-state spectroscopy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Joint spectral amplitude, Schmidt modes and gain calibration
    Jsa(Common),
    /// TPA probability versus delay at the first chirp value
    Trace(Common),
    /// Delay spectrum of the single trace
    Spectrum(Common),
    /// Chirp ensemble, spectra and relative variances
    SweepChirp(Common),
    /// Crystal-length-average baseline
    BaselineLengths(Common),
    /// Level candidates from the lowest-variance peaks
    Identify(Common),
    /// Every stage
    All(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    pair_only: bool,
    #[arg(long)]
    emit_gnuplot: bool,
    /// Cache directory (default: $TWINBEAM_VSS_CACHE, caching off if unset)
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (target, args) = match cli.command {
        Command::Jsa(a) => (Target::Jsa, a),
        Command::Trace(a) => (Target::Trace, a),
        Command::Spectrum(a) => (Target::Spectrum, a),
        Command::SweepChirp(a) => (Target::SweepChirp, a),
        Command::BaselineLengths(a) => (Target::BaselineLengths, a),
        Command::Identify(a) => (Target::Identify, a),
        Command::All(a) => (Target::All, a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = ExperimentConfig::load(&args.config).and_then(|mut cfg| {
        if args.pair_only {
            cfg.run.pair_only = true;
        }
        if let Some(s) = args.seed {
            cfg.run.seed = s;
        }
        let out = args
            .out
            .clone()
            .or_else(|| cfg.run.output_dir.clone().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let opts = RunOptions { out_dir: out, cache_dir: args.cache.clone().or_else(default_cache_dir), emit_gnuplot: args.emit_gnuplot };
        run_pipeline(&cfg, target, &opts)
    });
    match result {
        Ok(m) => {
            let hits = m.stages.iter().filter(|s| s.cache_hit).count();
            eprintln!("done: {} stages ({hits} cached), {} files", m.stages.len(), m.files.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
