//! End-to-end driver: client obfuscation and sealing, the provider boundary,
//! trusted execution, and client recovery, plus the batch experiment harness.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{attack_complexity_log2, depth_increase_factor, ComplexityParams};
use crate::backend_sim::{
    baseline_distribution, execute_job, JobOptions, JobResult, JobSettings, NoiseModel, PreparedJob, QcTeeEngine,
    SwitchModel,
};
use crate::bitmap::OutputBitmap;
use crate::circuit::{emit_qasm, parse_qasm, schedule_asap, BackendDescriptor, QuantumCircuit, Qubit};
use crate::envelope::{keygen, open_in_session, seal_with_session, Envelope, Role};
use crate::error::Error;
use crate::obfuscator::{obfuscate, Level, ObfuscationConfig};
use crate::recover::{
    counts_to_distribution, recover_shots, variational_distance, write_counts_csv, write_vd_csv, VdRecord,
};

pub const DEFAULT_SUITE: &str = crate::envelope::TEST_NULLKEM;

/// Every random stream of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub obfuscator: u64,
    pub trng: u64,
    pub noise: u64,
    pub keys: u64,
}

impl Seeds {
    /// Four independent seeds expanded from one.
    pub fn from_base(base: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(base);
        Seeds { obfuscator: rng.gen(), trng: rng.gen(), noise: rng.gen(), keys: rng.gen() }
    }

    pub fn from_entropy() -> Self {
        Seeds::from_base(rand::random())
    }
}

/// Everything that shapes one run apart from its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub obfuscation: ObfuscationConfig,
    pub shots: usize,
    pub switch: SwitchModel,
    pub noise: NoiseModel,
    pub seeds: Seeds,
    pub suite: String,
}

impl RunSettings {
    pub fn new(level: Level, shots: usize, seeds: Seeds) -> Self {
        RunSettings {
            obfuscation: ObfuscationConfig::new(level),
            shots,
            switch: SwitchModel::ideal(),
            noise: NoiseModel::noiseless(),
            seeds,
            suite: DEFAULT_SUITE.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub backend: PathBuf,
    pub circuit: PathBuf,
    pub settings: RunSettings,
    pub out: PathBuf,
}

/// Raw shots as the provider stores them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawShots {
    pub n_qubits: usize,
    pub measured: Vec<Qubit>,
    pub shots: Vec<String>,
}

/// What crosses the untrusted zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderView {
    pub obfuscated_qasm: String,
    pub input_envelope: Vec<u8>,
    pub output_envelope: Option<Vec<u8>>,
    pub raw_shots: RawShots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub benchmark: String,
    pub backend: String,
    pub suite: String,
    pub level: Level,
    pub randomize_output: bool,
    pub padding_slots: usize,
    pub identity_conversion: bool,
    pub shots: usize,
    pub switch: String,
    pub epsilon: f64,
    pub noise: NoiseModel,
    pub seeds: Seeds,
    pub n_qubits: usize,
    pub sub_slots: usize,
    pub attenuated_bits: usize,
    pub base_duration: u64,
    pub obfuscated_duration: u64,
    /// Absent when the baseline has zero duration.
    pub depth_factor: Option<f64>,
    pub complexity: ComplexityParams,
    pub complexity_log2: f64,
    /// `vd_exact` when available, else `vd_sampled`.
    pub vd: f64,
    pub vd_method: String,
    /// Recovered distribution given the drawn masks, computed without
    /// sampling. Only for noiseless runs.
    pub vd_exact: Option<f64>,
    pub vd_sampled: f64,
    pub recovered: BTreeMap<String, f64>,
    pub baseline: BTreeMap<String, f64>,
}

impl PipelineReport {
    pub fn vd_record(&self) -> VdRecord {
        VdRecord {
            benchmark: self.benchmark.clone(),
            level: self.level.to_string(),
            randomize_output: self.randomize_output,
            epsilon: self.epsilon,
            vd: self.vd,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub provider: ProviderView,
    pub job: JobResult,
    /// Per-shot outcomes after undoing the output mask.
    pub recovered: Vec<u64>,
}

pub fn load_backend(path: &Path) -> Result<BackendDescriptor, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(BackendDescriptor::from_json(&text)?)
}

pub fn load_circuit(path: &Path) -> Result<QuantumCircuit, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_qasm(&text)?)
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Runs the whole workflow in memory. The provider side only ever sees the
/// emitted QASM and sealed bytes; it parses the circuit back from text.
pub fn run_in_memory(
    name: &str,
    circuit: &QuantumCircuit,
    backend: &BackendDescriptor,
    settings: &RunSettings,
) -> Result<PipelineRun, Error> {
    settings.validate()?;
    backend.validate(circuit)?;
    let seeds = settings.seeds;

    // client
    let cfg = settings.obfuscation.clone().with_seed(seeds.obfuscator);
    let obf = obfuscate(circuit, backend, &cfg)?;
    let mut key_rng = ChaCha20Rng::seed_from_u64(seeds.keys);
    let user = keygen(&settings.suite, Role::User, &mut key_rng)?;
    let trusted = keygen(&settings.suite, Role::Backend, &mut key_rng)?;
    let (input_env, session) = seal_with_session(&obf.bitmap.to_bytes(), &trusted.public, &user.private, &mut key_rng)?;
    let obfuscated_qasm = emit_qasm(&obf.circuit);
    let input_envelope = input_env.to_bytes();

    // provider and trusted zone
    let provider_circuit = parse_qasm(&obfuscated_qasm)?;
    let mut engine = QcTeeEngine::new(backend, trusted.private, user.public.clone())?;
    engine.load_input_bitmap(&Envelope::from_bytes(&input_envelope)?)?;
    let opts = JobOptions {
        shots: settings.shots,
        switch: settings.switch,
        noise: settings.noise,
        trng_seed: seeds.trng,
        noise_seed: seeds.noise,
    };
    let job = execute_job(&provider_circuit, backend, &mut engine, &opts)?;
    let output_env = job.envelope()?;

    // client
    let width = job.n_qubits;
    let output = match &output_env {
        Some(env) => OutputBitmap::from_bytes(&open_in_session(env, &session, &trusted.public)?)?,
        None => OutputBitmap::zeros(settings.shots, width),
    };
    let raw = job.raw_outcomes()?;
    let recovered = recover_shots(&raw, &output)?;
    let sampled = counts_to_distribution(&recovered, width)?;
    let baseline = baseline_distribution(&circuit.widened(width)?)?;
    let vd_sampled = variational_distance(&sampled, &baseline)?;
    let vd_exact = if settings.noise.is_noiseless() {
        let js = JobSettings::from_bitmap(&obf.bitmap, backend.n_qubits());
        let prepared = PreparedJob::new(&obf.circuit, backend, &js, &settings.switch, &settings.noise)?;
        Some(variational_distance(&prepared.exact_recovered_distribution(&output), &baseline)?)
    } else {
        None
    };

    let base = schedule_asap(circuit, backend)?;
    let obf_sched = schedule_asap(&obf.circuit, backend)?;
    let complexity = ComplexityParams::from_obfuscated(&obf, cfg.randomize_output);
    let report = PipelineReport {
        benchmark: name.to_string(),
        backend: backend.name().to_string(),
        suite: settings.suite.clone(),
        level: cfg.level,
        randomize_output: cfg.randomize_output,
        padding_slots: cfg.padding_slots,
        identity_conversion: cfg.identity_conversion,
        shots: settings.shots,
        switch: settings.switch.to_string(),
        epsilon: settings.switch.epsilon(),
        noise: settings.noise,
        seeds,
        n_qubits: width,
        sub_slots: obf.sub_slots(),
        attenuated_bits: obf.bitmap.popcount(),
        base_duration: base.duration,
        obfuscated_duration: obf_sched.duration,
        depth_factor: depth_increase_factor(&base, &obf_sched).ok(),
        complexity,
        complexity_log2: attack_complexity_log2(&complexity)?,
        vd: vd_exact.unwrap_or(vd_sampled),
        vd_method: if vd_exact.is_some() { "exact" } else { "sampled" }.to_string(),
        vd_exact,
        vd_sampled,
        recovered: sampled.to_strings(),
        baseline: baseline.to_strings(),
    };
    let provider = ProviderView {
        obfuscated_qasm,
        input_envelope,
        output_envelope: output_env.map(|e| e.to_bytes()),
        raw_shots: RawShots { n_qubits: job.n_qubits, measured: job.measured.clone(), shots: job.shots.clone() },
    };
    Ok(PipelineRun { report, provider, job, recovered })
}

/// Reads the input files, runs the workflow and writes:
///
/// - `provider/`: obfuscated QASM, sealed bitmaps, raw shots
/// - `report.json`, `vd.csv`, `counts.csv`: the client's results
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun, Error> {
    let backend = load_backend(&cfg.backend)?;
    let circuit = load_circuit(&cfg.circuit)?;
    let name = cfg.circuit.file_stem().map_or("circuit".into(), |s| s.to_string_lossy().into_owned());
    let run = run_in_memory(&name, &circuit, &backend, &cfg.settings)?;
    write_provider_view(&run.provider, &cfg.out.join("provider"))?;
    write_report(&run, &cfg.out)?;
    Ok(run)
}

pub fn write_provider_view(view: &ProviderView, dir: &Path) -> Result<(), Error> {
    write_file(&dir.join("obfuscated.qasm"), &view.obfuscated_qasm)?;
    write_file(&dir.join("input_bitmap.qcte"), &view.input_envelope)?;
    if let Some(bytes) = &view.output_envelope {
        write_file(&dir.join("output_bitmap.qcte"), bytes)?;
    }
    let shots = serde_json::to_string_pretty(&view.raw_shots).expect("plain data");
    write_file(&dir.join("raw_shots.json"), shots + "\n")
}

pub fn write_report(run: &PipelineRun, dir: &Path) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(&run.report).expect("plain data");
    write_file(&dir.join("report.json"), json + "\n")?;
    let mut vd = Vec::new();
    write_vd_csv(&[run.report.vd_record()], &mut vd)?;
    write_file(&dir.join("vd.csv"), vd)?;
    let mut counts = Vec::new();
    write_counts_csv(&run.recovered, run.report.n_qubits, &mut counts)?;
    write_file(&dir.join("counts.csv"), counts)
}

/// Grid of a batch experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub levels: Vec<Level>,
    pub randomize_output: Vec<bool>,
    pub switches: Vec<SwitchModel>,
    pub identity_conversion: bool,
    pub padding_slots: usize,
    pub noise: NoiseModel,
    pub shots: usize,
    /// Seeds per (circuit, configuration) cell.
    pub repetitions: usize,
    pub base_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            levels: Level::ALL.to_vec(),
            randomize_output: vec![false, true],
            switches: vec![SwitchModel::ideal()],
            identity_conversion: false,
            padding_slots: 0,
            noise: NoiseModel::noiseless(),
            shots: 1024,
            repetitions: 10,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub benchmark: String,
    pub level: Level,
    pub randomize_output: bool,
    pub switch: String,
    pub epsilon: f64,
    pub repetition: usize,
    pub vd: f64,
    pub depth_factor: Option<f64>,
    pub complexity_log2: f64,
}

/// Mean over repetitions (and over circuits for the `all` rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub benchmark: String,
    pub level: Level,
    pub randomize_output: bool,
    pub epsilon: f64,
    pub n: usize,
    pub mean_vd: f64,
    pub std_err: f64,
    pub mean_depth_factor: Option<f64>,
}

/// Seeds for repetition `r`, shared by every configuration so that
/// configurations are compared on common random numbers.
pub fn bench_seeds(base_seed: u64, benchmark: usize, repetition: usize) -> Seeds {
    Seeds::from_base(base_seed ^ ((benchmark as u64) << 32 | repetition as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn run_bench(
    corpus: &[(String, QuantumCircuit)],
    backend: &BackendDescriptor,
    cfg: &BenchConfig,
) -> Result<Vec<BenchCell>, Error> {
    let mut jobs = Vec::new();
    for (b, (name, circuit)) in corpus.iter().enumerate() {
        for &level in &cfg.levels {
            for &rand_out in &cfg.randomize_output {
                for &switch in &cfg.switches {
                    for r in 0..cfg.repetitions {
                        jobs.push((b, name, circuit, level, rand_out, switch, r));
                    }
                }
            }
        }
    }
    jobs.into_par_iter()
        .map(|(b, name, circuit, level, rand_out, switch, r)| {
            let mut s = RunSettings::new(level, cfg.shots, bench_seeds(cfg.base_seed, b, r));
            s.obfuscation = s
                .obfuscation
                .with_randomize_output(rand_out)
                .with_identity_conversion(cfg.identity_conversion)
                .with_padding_slots(cfg.padding_slots);
            s.switch = switch;
            s.noise = cfg.noise;
            let run = run_in_memory(name, circuit, backend, &s)?;
            Ok(BenchCell {
                benchmark: name.clone(),
                level,
                randomize_output: rand_out,
                switch: switch.to_string(),
                epsilon: switch.epsilon(),
                repetition: r,
                vd: run.report.vd,
                depth_factor: run.report.depth_factor,
                complexity_log2: run.report.complexity_log2,
            })
        })
        .collect()
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-circuit rows followed by `all` rows pooling every circuit.
pub fn summarize_bench(cells: &[BenchCell]) -> Vec<BenchRow> {
    type Key = (String, Level, bool, String);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for c in cells {
        for bench in [c.benchmark.clone(), "all".to_string()] {
            let g = groups.entry((bench, c.level, c.randomize_output, c.switch.clone())).or_insert((
                c.epsilon,
                Vec::new(),
                Vec::new(),
            ));
            g.1.push(c.vd);
            g.2.extend(c.depth_factor);
        }
    }
    let mut rows: Vec<BenchRow> = groups
        .into_iter()
        .map(|((benchmark, level, randomize_output, _), (epsilon, vds, depths))| {
            let (mean_vd, std_err) = mean_and_stderr(&vds);
            BenchRow {
                benchmark,
                level,
                randomize_output,
                epsilon,
                n: vds.len(),
                mean_vd,
                std_err,
                mean_depth_factor: (!depths.is_empty()).then(|| mean_and_stderr(&depths).0),
            }
        })
        .collect();
    // pooled rows last
    rows.sort_by_key(|r| r.benchmark == "all");
    rows
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    write_file(path, bytes)
}

/// Loads every `.qasm` file in `dir`, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, QuantumCircuit)>, Error> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "qasm"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().expect("has extension").to_string_lossy().into_owned();
            Ok((name, load_circuit(&p)?))
        })
        .collect()
}
