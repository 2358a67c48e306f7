//! End-to-end runs: staged computation with a content-addressed cache and
//! the on-disk output set (CSV, JSON, binary containers, manifest).

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    crystal_length_average, identify_levels, mean_spectrum, relative_variance, spectrum, chirp_ensemble_traces,
    IdentifiedLevels, Spectrum, VarianceReport, SCHEMA_VERSION,
};
use crate::config::{hash_json, ExperimentConfig, RandomLevels};
use crate::error::{Error, Result};
use crate::io;
use crate::schmidt::{mean_photon_number, SchmidtDecomposition};
use crate::source::JointSpectralAmplitude;
use crate::tpa::{tpa_trace, Level, MatterSystem, TpaTrace};
use crate::units::FS2;

pub const CACHE_ENV: &str = "TWINBEAM_VSS_CACHE";

/// Draws `count` level energies uniformly from the window, rejecting draws
/// that violate the minimum spacing. Deterministic for a given seed.
pub fn generate_demo_system(seed: u64, ground_ev: f64, final_ev: f64, bounds: &RandomLevels) -> Result<MatterSystem> {
    let n = bounds.count;
    let [lo, hi] = bounds.window_ev;
    if n == 0 {
        return Err(Error::Config("random matter system needs at least one level".into()));
    }
    if !(ground_ev < lo && lo < hi && hi < final_ev) {
        return Err(Error::Config(format!("level window [{lo}, {hi}] eV must lie inside ({ground_ev}, {final_ev}) eV")));
    }
    if bounds.min_spacing_ev < 0.0 || (hi - lo) < bounds.min_spacing_ev * (n - 1) as f64 {
        return Err(Error::Config(format!(
            "{n} levels with spacing ≥ {} eV do not fit in [{lo}, {hi}] eV",
            bounds.min_spacing_ev
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100_000 {
        let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        e.sort_by(f64::total_cmp);
        if e.windows(2).all(|w| w[1] - w[0] >= bounds.min_spacing_ev) {
            let levels = e
                .into_iter()
                .map(|energy_ev| Level { energy_ev, linewidth_ev: bounds.linewidth_ev, dipole_product: bounds.dipole_product })
                .collect();
            return MatterSystem::new(ground_ev, final_ev, levels);
        }
    }
    Err(Error::Config(format!("could not place {n} levels with the requested spacing after 100000 draws")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Jsa,
    Trace,
    Spectrum,
    SweepChirp,
    BaselineLengths,
    Identify,
    All,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Cache root; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    pub emit_gnuplot: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions { out_dir: out_dir.into(), cache_dir: default_cache_dir(), emit_gnuplot: false }
    }
}

pub fn default_cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub cache_hit: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_fingerprint: String,
    pub target: Target,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
}

struct Cache {
    root: Option<PathBuf>,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl Cache {
    fn lock(dir: &Path, key: &str) -> Result<LockGuard> {
        let path = dir.join(format!("{key}.lock"));
        for _ in 0..12_000 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(LockGuard(path)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => std::thread::sleep(Duration::from_millis(50)),
                Err(e) => return Err(Error::io(&path, e)),
            }
        }
        Err(Error::io(&path, std::io::Error::new(std::io::ErrorKind::TimedOut, "cache lock held for 10 minutes")))
    }

    /// Loads the artifact for `key` or computes and stores it.
    fn get<T>(
        &self,
        stage: &str,
        key: &str,
        load: impl Fn(&Path) -> Result<T>,
        save: impl Fn(&Path, &T) -> Result<()>,
        compute: impl FnOnce() -> Result<T>,
    ) -> Result<(T, bool)> {
        let Some(root) = &self.root else {
            return Ok((compute()?, false));
        };
        let dir = root.join(stage);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let _guard = Self::lock(&dir, key)?;
        let done = dir.join(key);
        if done.is_dir() {
            match load(&done) {
                Ok(v) => return Ok((v, true)),
                Err(e) => {
                    log::warn!("discarding unreadable cache entry {}: {e}", done.display());
                    let _ = fs::remove_dir_all(&done);
                }
            }
        }
        let value = compute()?;
        let tmp = dir.join(format!("{key}.tmp-{}", std::process::id()));
        let _ = fs::remove_dir_all(&tmp);
        fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        save(&tmp, &value)?;
        fs::rename(&tmp, &done).map_err(|e| Error::io(&done, e))?;
        Ok((value, false))
    }

    fn get_json<T: Serialize + DeserializeOwned>(&self, stage: &str, key: &str, compute: impl FnOnce() -> Result<T>) -> Result<(T, bool)> {
        self.get(
            stage,
            key,
            |dir| {
                let p = dir.join("value.json");
                let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
            },
            |dir, v| write_bytes(&dir.join("value.json"), &json_bytes(v)?),
            compute,
        )
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Output files written so far; removed again if the run fails.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_bytes(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn put_with(&mut self, name: &str, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        f(&path)?;
        self.written.push(path);
        Ok(())
    }

    fn discard(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }

    fn inventory(&self) -> Result<Vec<FileRecord>> {
        let mut files = Vec::new();
        for p in &self.written {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            files.push(FileRecord {
                path: p.file_name().unwrap().to_string_lossy().into_owned(),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        files.dedup_by(|a, b| a.path == b.path);
        Ok(files)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SourceSummary {
    schema_version: u32,
    grid_points: usize,
    modes: usize,
    schmidt_number: f64,
    captured_norm: f64,
    reconstruction_residual: f64,
    gain: f64,
    mean_photon_number: f64,
    entanglement_time_s: f64,
    jsa_edge_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TraceSidecar {
    schema_version: u32,
    config_fingerprint: String,
    trace_fingerprint: String,
    chirp_fs2: f64,
    normalization: f64,
    points: usize,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    cache: Cache,
    stages: Vec<StageRecord>,
    out: Outputs,
    matter: MatterSystem,
}

impl Run<'_> {
    fn stage<T>(&mut self, name: &'static str, key: &str, f: impl FnOnce(&Cache) -> Result<(T, bool)>) -> Result<T> {
        let t0 = Instant::now();
        let (v, hit) = f(&self.cache).map_err(|e| Error::Stage { stage: name, source: Box::new(e) })?;
        let seconds = t0.elapsed().as_secs_f64();
        log::info!("{name}: {} in {seconds:.2} s", if hit { "cache hit" } else { "computed" });
        self.stages.push(StageRecord { name: name.into(), key: key.into(), cache_hit: hit, seconds });
        Ok(v)
    }

    fn source_key(&self) -> String {
        let c = self.cfg;
        hash_json(&("source", &c.crystal, &c.pump, &c.grid, &c.gain))
    }

    fn physics_key(&self, tag: &str) -> String {
        let c = self.cfg;
        hash_json(&(tag, self.source_key(), &self.matter, &c.delay, c.matter.final_linewidth_ev, c.run.pair_only))
    }

    fn source(&mut self) -> Result<(JointSpectralAmplitude, SchmidtDecomposition)> {
        let key = self.source_key();
        let model = self.cfg.source_model()?;
        self.stage("source", &key.clone(), |cache| {
            cache.get(
                "source",
                &key,
                |dir| Ok((io::load_jsa(&dir.join("jsa.bin"))?, io::load_schmidt(&dir.join("schmidt.bin"))?)),
                |dir, (jsa, d)| {
                    io::save_jsa(&dir.join("jsa.bin"), jsa)?;
                    io::save_schmidt(&dir.join("schmidt.bin"), d)
                },
                || {
                    let jsa = model.jsa()?;
                    let d = crate::schmidt::schmidt_decompose(&jsa, model.n_modes)?;
                    let gamma = crate::schmidt::calibrate_gain(&d, model.target_photons)?;
                    Ok((jsa, crate::schmidt::apply_gain(&d, gamma)?))
                },
            )
        })
    }

    fn write_source(&mut self, jsa: &JointSpectralAmplitude, d: &SchmidtDecomposition) -> Result<()> {
        self.out.put_with("jsa.bin", |p| io::save_jsa(p, jsa))?;
        self.out.put_with("schmidt.bin", |p| io::save_schmidt(p, d))?;
        let rows = (0..d.n_modes()).map(|g| vec![g.to_string(), num(d.singular_values[g]), num(d.u[g]), num(d.v[g])]);
        self.out.put("schmidt.csv", &csv_bytes(&strings(&["mode", "lambda", "u", "v"]), rows)?)?;
        let summary = SourceSummary {
            schema_version: SCHEMA_VERSION,
            grid_points: d.grid_s.len(),
            modes: d.n_modes(),
            schmidt_number: d.schmidt_number(),
            captured_norm: d.captured_norm(),
            reconstruction_residual: d.residual,
            gain: d.gain,
            mean_photon_number: mean_photon_number(d),
            entanglement_time_s: self.cfg.crystal_params()?.entanglement_time(),
            jsa_edge_ratio: jsa.edge_ratio,
        };
        self.out.put("source.json", &json_bytes(&summary)?)?;
        self.out.put("matter.json", &json_bytes(&self.matter)?)
    }

    fn trace(&mut self, d: &SchmidtDecomposition) -> Result<TpaTrace> {
        let key = hash_json(&("trace", self.physics_key("physics"), self.cfg.chirp.start_fs2));
        let (matter, delays, settings) = (self.matter.clone(), self.cfg.delays()?, self.cfg.trace_settings());
        let xi = self.cfg.chirp.start_fs2 * FS2;
        self.stage("trace", &key.clone(), |cache| {
            cache.get_json("trace", &key, || tpa_trace(d, &matter, xi, &delays, &settings))
        })
    }

    fn write_trace(&mut self, t: &TpaTrace) -> Result<()> {
        let rows = (0..t.delays_s.len()).map(|k| vec![num(t.delays_s[k]), num(t.normalized[k]), num(t.raw[k])]);
        self.out.put("trace.csv", &csv_bytes(&strings(&["tau_s", "P_normalized", "P_raw"]), rows)?)?;
        let side = TraceSidecar {
            schema_version: SCHEMA_VERSION,
            config_fingerprint: self.cfg.fingerprint(),
            trace_fingerprint: t.fingerprint.clone(),
            chirp_fs2: t.chirp_s2 / FS2,
            normalization: t.normalization,
            points: t.delays_s.len(),
        };
        self.out.put("trace.json", &json_bytes(&side)?)
    }

    fn single_spectrum(&mut self, t: &TpaTrace) -> Result<Spectrum> {
        let window = self.cfg.analysis.window;
        let key = hash_json(&("spectrum", &t.fingerprint, window));
        self.stage("spectrum", &key.clone(), |cache| cache.get_json("spectrum", &key, || spectrum(t, window)))
    }

    fn write_spectrum(&mut self, s: &Spectrum) -> Result<()> {
        let rows = (0..s.energies_ev.len()).map(|k| vec![num(s.energies_ev[k]), num(s.magnitudes[k])]);
        self.out.put("spectrum.csv", &csv_bytes(&strings(&["energy_ev", "magnitude"]), rows)?)
    }

    fn ensemble(&mut self, d: &SchmidtDecomposition) -> Result<(Vec<TpaTrace>, Vec<Spectrum>, String)> {
        let ens_key = hash_json(&("ensemble", self.physics_key("physics"), &self.cfg.chirp));
        let (matter, delays, settings, chirps) =
            (self.matter.clone(), self.cfg.delays()?, self.cfg.trace_settings(), self.cfg.chirps()?);
        let traces = self.stage("sweep-chirp", &ens_key.clone(), |cache| {
            cache.get_json("ensemble", &ens_key, || chirp_ensemble_traces(d, &matter, &chirps, &delays, &settings))
        })?;
        let window = self.cfg.analysis.window;
        let spec_key = hash_json(&("spectra", &ens_key, window));
        let spectra = self.stage("spectra", &spec_key.clone(), |cache| {
            cache.get_json("spectra", &spec_key, || traces.iter().map(|t| spectrum(t, window)).collect())
        })?;
        Ok((traces, spectra, spec_key))
    }

    fn write_ensemble(&mut self, traces: &[TpaTrace], spectra: &[Spectrum]) -> Result<()> {
        let mut header = strings(&["tau_s"]);
        header.extend(traces.iter().map(|t| format!("P_raw_xi_{:.6}_fs2", t.chirp_s2 / FS2)));
        let rows = (0..traces[0].delays_s.len())
            .map(|k| std::iter::once(num(traces[0].delays_s[k])).chain(traces.iter().map(|t| num(t.raw[k]))).collect());
        self.out.put("traces.csv", &csv_bytes(&header, rows)?)?;

        let mean = mean_spectrum(spectra);
        let mut header = strings(&["energy_ev", "mean"]);
        header.extend(traces.iter().map(|t| format!("xi_{:.6}_fs2", t.chirp_s2 / FS2)));
        let rows = (0..mean.energies_ev.len()).map(|k| {
            [num(mean.energies_ev[k]), num(mean.magnitudes[k])]
                .into_iter()
                .chain(spectra.iter().map(|s| num(s.magnitudes[k])))
                .collect()
        });
        self.out.put("spectra.csv", &csv_bytes(&header, rows)?)
    }

    fn variance(&mut self, spectra: &[Spectrum], spec_key: &str) -> Result<(VarianceReport, String)> {
        let policy = self.cfg.match_policy();
        let chirps = self.cfg.chirps()?;
        let key = hash_json(&("variance", spec_key, policy));
        let report = self.stage("variance", &key.clone(), |cache| {
            cache.get_json("variance", &key, || relative_variance(spectra, policy, &chirps))
        })?;
        Ok((report, key))
    }

    fn write_variance(&mut self, r: &VarianceReport) -> Result<()> {
        self.out.put("variance_report.json", &json_bytes(r)?)?;
        let rows = r.peaks.iter().map(|p| vec![num(p.energy_ev), num(p.relative_variance), num(p.mean_magnitude)]);
        self.out.put("variance.csv", &csv_bytes(&strings(&["energy_ev", "relative_variance", "mean_magnitude"]), rows)?)
    }

    fn identify(&mut self, r: &VarianceReport, var_key: &str) -> Result<IdentifiedLevels> {
        let (fe, ge, k) = (self.matter.final_ev, self.matter.ground_ev, self.cfg.analysis.levels);
        let key = hash_json(&("identify", var_key, fe, ge, k));
        self.stage("identify", &key.clone(), |cache| {
            cache.get_json("identify", &key, || {
                let mut ids = identify_levels(r, fe - ge, k)?;
                for c in &mut ids.candidates {
                    c.upper_ev += ge;
                    c.lower_ev = c.lower_ev.map(|x| x + ge);
                }
                ids.final_ev = fe;
                Ok(ids)
            })
        })
    }

    fn baseline(&mut self) -> Result<Option<Spectrum>> {
        let Some(lengths) = self.cfg.baseline_lengths()? else {
            return Ok(None);
        };
        let window = self.cfg.analysis.window;
        let key = hash_json(&("baseline", self.physics_key("physics"), &self.cfg.baseline, window));
        let (model, matter, delays, settings) =
            (self.cfg.source_model()?, self.matter.clone(), self.cfg.delays()?, self.cfg.trace_settings());
        self.stage("baseline-lengths", &key.clone(), |cache| {
            cache.get_json("baseline", &key, || crystal_length_average(&lengths, &model, &matter, &delays, &settings, window))
        })
        .map(Some)
    }

    fn write_baseline(&mut self, b: &Spectrum, single: &Spectrum) -> Result<()> {
        let rows = (0..b.energies_ev.len()).map(|k| vec![num(b.energies_ev[k]), num(b.magnitudes[k]), num(single.magnitudes[k])]);
        self.out.put("baseline_spectrum.csv", &csv_bytes(&strings(&["energy_ev", "length_average", "single_crystal"]), rows)?)
    }

    fn write_gnuplot(&mut self) -> Result<()> {
        let present = |n: &str| self.out.written.iter().any(|p| p.file_name().is_some_and(|f| f == n));
        let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 1000,800\n");
        let lines: Vec<f64> = self.matter.level_lines_ev();
        let arrows: String = lines.iter().map(|e| format!("set arrow from {e},graph 0 to {e},graph 1 nohead dt 2 lc rgb 'gray'\n")).collect();
        if present("trace.csv") {
            s += "set output 'fig_a_trace.png'\nset xlabel 'tau [s]'\nset ylabel 'P (normalized)'\nplot 'trace.csv' using 1:2 with lines\n";
        }
        if present("spectra.csv") {
            s += &format!("set output 'fig_b_spectrum.png'\nunset arrow\n{arrows}set xlabel 'energy [eV]'\nset ylabel '|FT|'\nset xrange [0:0.3]\nplot 'spectra.csv' using 1:2 with lines title 'ensemble mean'\n");
        }
        if present("variance.csv") {
            s += &format!("set output 'fig_c_variance.png'\nunset arrow\n{arrows}set logscale y\nset ylabel 'R_n'\nplot 'variance.csv' using 1:2 with impulses lw 2\nunset logscale y\n");
        }
        if present("baseline_spectrum.csv") {
            s += &format!("set output 'fig_d_baseline.png'\nunset arrow\n{arrows}set ylabel '|FT|'\nplot 'baseline_spectrum.csv' using 1:2 with lines, '' using 1:3 with lines\n");
        }
        self.out.put("plot.gp", s.as_bytes())
    }
}

/// Runs the pipeline up to `target`, writing outputs into `opts.out_dir`.
pub fn run_pipeline(cfg: &ExperimentConfig, target: Target, opts: &RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let matter = cfg.matter_system()?;
    let mut run = Run {
        cfg,
        cache: Cache { root: opts.cache_dir.clone() },
        stages: Vec::new(),
        out: Outputs { dir: opts.out_dir.clone(), written: Vec::new() },
        matter,
    };
    match execute(&mut run, target, opts) {
        Ok(m) => Ok(m),
        Err(e) => {
            run.out.discard();
            Err(e)
        }
    }
}

fn execute(run: &mut Run, target: Target, opts: &RunOptions) -> Result<RunManifest> {
    use Target::*;
    let (jsa, d) = run.source()?;
    run.write_source(&jsa, &d)?;

    if matches!(target, Trace | Spectrum | BaselineLengths | All) {
        let t = run.trace(&d)?;
        run.write_trace(&t)?;
        if target != Trace {
            let single = run.single_spectrum(&t)?;
            if matches!(target, Spectrum | All) {
                run.write_spectrum(&single)?;
            }
            if matches!(target, BaselineLengths | All) {
                match run.baseline()? {
                    Some(b) => run.write_baseline(&b, &single)?,
                    None if target == BaselineLengths => {
                        return Err(Error::Config("config has no [baseline] section".into()));
                    }
                    None => {}
                }
            }
        }
    }
    if matches!(target, SweepChirp | Identify | All) {
        let (traces, spectra, spec_key) = run.ensemble(&d)?;
        run.write_ensemble(&traces, &spectra)?;
        let (report, var_key) = run.variance(&spectra, &spec_key)?;
        run.write_variance(&report)?;
        if matches!(target, Identify | All) {
            let ids = run.identify(&report, &var_key)?;
            run.out.put("identified_levels.json", &json_bytes(&ids)?)?;
        }
    }
    if opts.emit_gnuplot {
        run.write_gnuplot()?;
    }
    run.out.put("config.toml", run.cfg.to_toml_string()?.as_bytes())?;

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_fingerprint: run.cfg.fingerprint(),
        target,
        stages: run.stages.clone(),
        files: run.out.inventory()?,
    };
    let path = opts.out_dir.join("manifest.json");
    write_bytes(&path, &json_bytes(&manifest)?)?;
    Ok(manifest)
}
