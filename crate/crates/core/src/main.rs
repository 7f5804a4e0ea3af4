use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use qctee::analysis::{
    attack_complexity_log2, depth_increase_factor, overhead_markdown, overhead_table, reference_machines,
    ComplexityParams, MachineRow, OverheadParams,
};
use qctee::backend_sim::{
    baseline_distribution, execute_job, JobOptions, JobResult, NoiseModel, QcTeeEngine, SwitchModel,
};
use qctee::bitmap::OutputBitmap;
use qctee::circuit::{emit_qasm, schedule_asap, BackendDescriptor, QuantumCircuit};
use qctee::envelope::{keygen, open_in_session, seal_with_session, Envelope, PrivateKey, PublicKey, Role, SessionKey};
use qctee::obfuscator::{obfuscate, Level, ObfuscationConfig};
use qctee::pipeline::{
    load_backend, load_circuit, load_corpus, read_file, run_bench, run_pipeline, summarize_bench, write_csv,
    write_file, BenchConfig, PipelineConfig, RunSettings, Seeds, DEFAULT_SUITE,
};
use qctee::recover::{
    counts_to_distribution, recover_shots, variational_distance, write_counts_csv, write_vd_csv, Distribution, VdRecord,
};
use qctee::Error;

#[derive(Parser)]
#[command(name = "qctee", version, about = "Decoy-pulse circuit obfuscation with a simulated trusted backend")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair for the user or the trusted backend.
    Keygen(KeygenArgs),
    /// Obfuscate a circuit and seal its input bitmap for the backend.
    Obfuscate(ObfuscateArgs),
    /// Run an obfuscated circuit on the simulated trusted backend.
    Execute(ExecuteArgs),
    /// Undo the output mask of a finished job.
    Recover(RecoverArgs),
    /// Variational distance between recovered counts and the exact baseline.
    Vd(VdArgs),
    /// Power, volume, complexity and depth models.
    Analyze(AnalyzeArgs),
    /// Run the full workflow for one circuit.
    Pipeline(PipelineArgs),
    /// Run a circuit corpus across levels, randomize-output and switch models.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Backend,
    User,
}

#[derive(Args)]
struct BackendArg {
    /// Backend descriptor JSON; the built-in ibm_perth when omitted.
    #[arg(long)]
    backend: Option<PathBuf>,
}

impl BackendArg {
    fn load(&self) -> Result<BackendDescriptor, Error> {
        match &self.backend {
            Some(p) => load_backend(p),
            None => Ok(BackendDescriptor::ibm_perth()),
        }
    }
}

#[derive(Args)]
struct ObfuscationArgs {
    #[arg(long, default_value = "max")]
    level: Level,
    #[arg(long)]
    randomize_output: bool,
    #[arg(long, default_value_t = 0)]
    padding_slots: usize,
    /// Turn adjacent decoy XX and SX^4 runs into executed identities.
    #[arg(long)]
    identity_conversion: bool,
}

impl ObfuscationArgs {
    fn config(&self) -> ObfuscationConfig {
        ObfuscationConfig::new(self.level)
            .with_randomize_output(self.randomize_output)
            .with_padding_slots(self.padding_slots)
            .with_identity_conversion(self.identity_conversion)
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 8192)]
    shots: usize,
    /// Switch off-state isolation in dB, or `ideal`.
    #[arg(long, default_value = "ideal")]
    isolation_db: SwitchModel,
    /// Scale passed pulses by this insertion loss instead of assuming recalibration.
    #[arg(long)]
    insertion_loss_db: Option<f64>,
    /// `p1,p2,pidle` or `none`.
    #[arg(long, default_value = "none")]
    noise: NoiseModel,
}

impl ModelArgs {
    fn switch(&self) -> SwitchModel {
        match self.insertion_loss_db {
            Some(db) => self.isolation_db.with_insertion_loss(db, true),
            None => self.isolation_db,
        }
    }
}

#[derive(Args)]
struct SeedArgs {
    /// Base seed for every stream not given explicitly.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seed_obfuscator: Option<u64>,
    #[arg(long)]
    seed_trng: Option<u64>,
    #[arg(long)]
    seed_noise: Option<u64>,
    #[arg(long)]
    seed_keys: Option<u64>,
}

impl SeedArgs {
    /// Explicit seeds win; the rest come from `--seed` or, failing that,
    /// from entropy, in which case they are printed.
    fn resolve(&self) -> Seeds {
        let explicit = [self.seed_obfuscator, self.seed_trng, self.seed_noise, self.seed_keys];
        let base = match self.seed {
            Some(s) => Seeds::from_base(s),
            None => Seeds::from_entropy(),
        };
        let seeds = Seeds {
            obfuscator: self.seed_obfuscator.unwrap_or(base.obfuscator),
            trng: self.seed_trng.unwrap_or(base.trng),
            noise: self.seed_noise.unwrap_or(base.noise),
            keys: self.seed_keys.unwrap_or(base.keys),
        };
        if self.seed.is_none() && explicit.iter().any(Option::is_none) {
            eprintln!(
                "seeds: --seed-obfuscator {} --seed-trng {} --seed-noise {} --seed-keys {}",
                seeds.obfuscator, seeds.trng, seeds.noise, seeds.keys
            );
        }
        seeds
    }
}

#[derive(Args)]
struct KeygenArgs {
    #[arg(long, value_enum)]
    role: RoleArg,
    #[arg(long, default_value = DEFAULT_SUITE)]
    suite: String,
    #[command(flatten)]
    seeds: SeedArgs,
    /// Writes `<role>.pub` and `<role>.key` here.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ObfuscateArgs {
    #[command(flatten)]
    backend: BackendArg,
    #[arg(long)]
    circuit: PathBuf,
    #[command(flatten)]
    obfuscation: ObfuscationArgs,
    /// The user's private key, which signs the bitmap envelope.
    #[arg(long)]
    user_key: PathBuf,
    /// The trusted backend's public key.
    #[arg(long)]
    backend_pub: PathBuf,
    #[command(flatten)]
    seeds: SeedArgs,
    /// Writes `obfuscated.qasm` and `input_bitmap.qcte` for the provider and
    /// the client-only `session.key`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExecuteArgs {
    #[command(flatten)]
    backend: BackendArg,
    /// Obfuscated circuit.
    #[arg(long)]
    circuit: PathBuf,
    /// Sealed input bitmap.
    #[arg(long)]
    bitmap: PathBuf,
    #[arg(long)]
    backend_key: PathBuf,
    #[arg(long)]
    user_pub: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    /// Writes `job.json` here.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    job: PathBuf,
    /// Session file written by `obfuscate`.
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    backend_pub: PathBuf,
    /// Writes `counts.csv` and `recovered.json` here.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VdArgs {
    /// Recovered distribution written by `recover`.
    #[arg(long)]
    recovered: PathBuf,
    /// Original, un-obfuscated circuit; its exact output is the reference.
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long, default_value = "max")]
    level: Level,
    #[arg(long)]
    randomize_output: bool,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Writes `vd.csv` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Machines as `qubits:couplings` pairs; the six reference machines when omitted.
    #[arg(long, value_delimiter = ',')]
    machines: Vec<String>,
    /// Use the derived Condor switch count (2307) instead of the printed 2242.
    #[arg(long)]
    derived_switches: bool,
    #[arg(long, default_value_t = 6.5)]
    per_switch_mm3: f64,
    #[arg(long, default_value_t = 0.0)]
    logic_mm3: f64,
    #[command(flatten)]
    backend: BackendArg,
    /// Also report complexity and depth factors per level for this circuit.
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    randomize_output: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    backend: BackendArg,
    #[arg(long)]
    circuit: PathBuf,
    #[command(flatten)]
    obfuscation: ObfuscationArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long, default_value = DEFAULT_SUITE)]
    suite: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
    Both,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    backend: BackendArg,
    /// Directory of `.qasm` files.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "quarter,half,max")]
    levels: Vec<Level>,
    #[arg(long, value_enum, default_value = "both")]
    randomize_output: OnOff,
    /// Comma-separated isolations in dB, or `ideal`.
    #[arg(long, value_delimiter = ',', default_value = "ideal")]
    isolation_db: Vec<SwitchModel>,
    #[arg(long)]
    identity_conversion: bool,
    #[arg(long, default_value_t = 0)]
    padding_slots: usize,
    #[arg(long, default_value = "none")]
    noise: NoiseModel,
    #[arg(long, default_value_t = 1024)]
    shots: usize,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Writes `cells.csv`, `summary.csv` and `summary.json` here.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Keygen(a) => cmd_keygen(a),
        Command::Obfuscate(a) => cmd_obfuscate(a),
        Command::Execute(a) => cmd_execute(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Vd(a) => cmd_vd(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn read_public(path: &Path, role: Role) -> Result<PublicKey, Error> {
    Ok(PublicKey::from_file_bytes(&read_file(path)?)?.expect_role(role)?)
}

fn read_private(path: &Path, role: Role) -> Result<PrivateKey, Error> {
    let bytes = zeroize::Zeroizing::new(read_file(path)?);
    Ok(PrivateKey::from_file_bytes(&bytes)?.expect_role(role)?)
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data") + "\n"
}

fn cmd_keygen(a: KeygenArgs) -> Result<(), Error> {
    let role = match a.role {
        RoleArg::Backend => Role::Backend,
        RoleArg::User => Role::User,
    };
    let seeds = a.seeds.resolve();
    let pair = keygen(&a.suite, role, &mut ChaCha20Rng::seed_from_u64(seeds.keys))?;
    write_file(&a.out.join(format!("{role}.pub")), pair.public.to_file_bytes())?;
    write_file(&a.out.join(format!("{role}.key")), pair.private.to_file_bytes())?;
    println!("wrote {role}.pub and {role}.key to {}", a.out.display());
    Ok(())
}

fn cmd_obfuscate(a: ObfuscateArgs) -> Result<(), Error> {
    let backend = a.backend.load()?;
    let circuit = load_circuit(&a.circuit)?;
    let user = read_private(&a.user_key, Role::User)?;
    let trusted = read_public(&a.backend_pub, Role::Backend)?;
    let seeds = a.seeds.resolve();
    let cfg = a.obfuscation.config().with_seed(seeds.obfuscator);
    let obf = obfuscate(&circuit, &backend, &cfg)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seeds.keys);
    // keygen draws from stream 0 of the same seed
    rng.set_stream(1);
    let (env, session) = seal_with_session(&obf.bitmap.to_bytes(), &trusted, &user, &mut rng)?;
    write_file(&a.out.join("obfuscated.qasm"), emit_qasm(&obf.circuit))?;
    write_file(&a.out.join("input_bitmap.qcte"), env.to_bytes())?;
    write_file(&a.out.join("session.key"), session.to_file_bytes())?;
    println!(
        "{} gates -> {} gates, {} sub-slots, {} attenuated bits",
        circuit.len(),
        obf.circuit.len(),
        obf.sub_slots(),
        obf.bitmap.popcount()
    );
    Ok(())
}

fn cmd_execute(a: ExecuteArgs) -> Result<(), Error> {
    let backend = a.backend.load()?;
    let circuit = load_circuit(&a.circuit)?;
    let env = Envelope::from_bytes(&read_file(&a.bitmap)?)?;
    let mut engine = QcTeeEngine::new(
        &backend,
        read_private(&a.backend_key, Role::Backend)?,
        read_public(&a.user_pub, Role::User)?,
    )?;
    engine.load_input_bitmap(&env)?;
    let seeds = a.seeds.resolve();
    let opts = JobOptions {
        shots: a.model.shots,
        switch: a.model.switch(),
        noise: a.model.noise,
        trng_seed: seeds.trng,
        noise_seed: seeds.noise,
    };
    let job = execute_job(&circuit, &backend, &mut engine, &opts)?;
    write_file(&a.out.join("job.json"), job.to_json() + "\n")?;
    println!("{} shots written to {}", job.shots.len(), a.out.join("job.json").display());
    Ok(())
}

fn cmd_recover(a: RecoverArgs) -> Result<(), Error> {
    let text = String::from_utf8_lossy(&read_file(&a.job)?).into_owned();
    let job = JobResult::from_json(&text)?;
    let raw = job.raw_outcomes()?;
    let output = match job.envelope()? {
        Some(env) => {
            let session = SessionKey::from_file_bytes(&zeroize::Zeroizing::new(read_file(&a.session)?))?;
            let signer = read_public(&a.backend_pub, Role::Backend)?;
            OutputBitmap::from_bytes(&open_in_session(&env, &session, &signer)?)?
        }
        None => OutputBitmap::zeros(raw.len(), job.n_qubits),
    };
    let recovered = recover_shots(&raw, &output)?;
    let mut counts = Vec::new();
    write_counts_csv(&recovered, job.n_qubits, &mut counts)?;
    write_file(&a.out.join("counts.csv"), counts)?;
    let dist = counts_to_distribution(&recovered, job.n_qubits)?;
    write_file(&a.out.join("recovered.json"), json(&dist))?;
    println!("recovered {} shots into {}", recovered.len(), a.out.display());
    Ok(())
}

fn cmd_vd(a: VdArgs) -> Result<(), Error> {
    let text = String::from_utf8_lossy(&read_file(&a.recovered)?).into_owned();
    let recovered: Distribution =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", a.recovered.display())))?;
    let circuit = load_circuit(&a.circuit)?.widened(recovered.width())?;
    let baseline = baseline_distribution(&circuit)?;
    let vd = variational_distance(&recovered, &baseline)?;
    let record = VdRecord {
        benchmark: a.benchmark.unwrap_or_else(|| stem(&a.circuit)),
        level: a.level.to_string(),
        randomize_output: a.randomize_output,
        epsilon: a.epsilon,
        vd,
    };
    if let Some(out) = a.out {
        let mut buf = Vec::new();
        write_vd_csv(&[record], &mut buf)?;
        write_file(&out.join("vd.csv"), buf)?;
    }
    println!("vd {vd}");
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or("circuit".into(), |s| s.to_string_lossy().into_owned())
}

fn parse_machine(s: &str) -> Result<MachineRow, Error> {
    let bad = || Error::Config(format!("machine `{s}` is not qubits:couplings"));
    let (q, c) = s.split_once(':').ok_or_else(bad)?;
    let q: u64 = q.trim().parse().map_err(|_| bad())?;
    let c: u64 = c.trim().parse().map_err(|_| bad())?;
    Ok(MachineRow::new(&format!("{q}q"), q, c))
}

#[derive(serde::Serialize)]
struct LevelRow {
    circuit: String,
    level: Level,
    randomize_output: bool,
    base_duration: u64,
    obfuscated_duration: u64,
    depth_factor: Option<f64>,
    complexity_log2: f64,
    n_qubits: u64,
    n_slot_cx: u64,
    n_slot_sq: u64,
    n_subslots: u64,
    n_subcx_in_slotcx: u64,
    n_subslots_in_slotcx: u64,
}

fn level_rows(
    name: &str,
    circuit: &QuantumCircuit,
    backend: &BackendDescriptor,
    rand_out: bool,
    seed: u64,
) -> Result<Vec<LevelRow>, Error> {
    let base = schedule_asap(circuit, backend)?;
    Level::ALL
        .iter()
        .map(|&level| {
            let cfg = ObfuscationConfig::new(level).with_randomize_output(rand_out).with_seed(seed);
            let obf = obfuscate(circuit, backend, &cfg)?;
            let sched = schedule_asap(&obf.circuit, backend)?;
            let params = ComplexityParams::from_obfuscated(&obf, rand_out);
            Ok(LevelRow {
                circuit: name.to_string(),
                level,
                randomize_output: rand_out,
                base_duration: base.duration,
                obfuscated_duration: sched.duration,
                depth_factor: depth_increase_factor(&base, &sched).ok(),
                complexity_log2: attack_complexity_log2(&params)?,
                n_qubits: params.n_qubits,
                n_slot_cx: params.n_slot_cx,
                n_slot_sq: params.n_slot_sq,
                n_subslots: params.n_subslots,
                n_subcx_in_slotcx: params.n_subcx_in_slotcx,
                n_subslots_in_slotcx: params.n_subslots_in_slotcx,
            })
        })
        .collect()
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), Error> {
    let params =
        OverheadParams { per_switch_mm3: a.per_switch_mm3, logic_mm3: a.logic_mm3, ..OverheadParams::default() };
    let machines = if a.machines.is_empty() {
        reference_machines()
    } else {
        a.machines.iter().map(|s| parse_machine(s)).collect::<Result<_, _>>()?
    };
    let table = overhead_table(&machines, &params, !a.derived_switches)?;
    let md = overhead_markdown(&table);
    print!("{md}");
    if let Some(out) = &a.out {
        write_csv(&table, &out.join("overhead.csv"))?;
        write_file(&out.join("overhead.md"), &md)?;
    }
    if let Some(path) = &a.circuit {
        let backend = a.backend.load()?;
        let rows = level_rows(&stem(path), &load_circuit(path)?, &backend, a.randomize_output, a.seed)?;
        println!();
        for r in &rows {
            let depth = r.depth_factor.map_or("n/a".to_string(), |f| format!("{f:.4}"));
            println!("{:<8} depth factor {depth}  complexity 2^{:.2}", r.level.as_str(), r.complexity_log2);
        }
        if let Some(out) = &a.out {
            write_csv(&rows, &out.join("levels.csv"))?;
        }
    }
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> Result<(), Error> {
    let seeds = a.seeds.resolve();
    let settings = RunSettings {
        obfuscation: a.obfuscation.config(),
        shots: a.model.shots,
        switch: a.model.switch(),
        noise: a.model.noise,
        seeds,
        suite: a.suite,
    };
    let backend = match a.backend.backend {
        Some(p) => p,
        None => {
            // the driver reads its backend from disk; materialize the default
            let p = a.out.join("backend.json");
            write_file(&p, BackendDescriptor::ibm_perth().to_json())?;
            p
        }
    };
    let cfg = PipelineConfig { backend, circuit: a.circuit, settings, out: a.out };
    let run = run_pipeline(&cfg)?;
    let r = &run.report;
    println!("benchmark      {}", r.benchmark);
    println!("level          {}{}", r.level, if r.randomize_output { " + randomize-output" } else { "" });
    println!("switch         {} (epsilon {:e})", r.switch, r.epsilon);
    println!("vd             {:e} ({})", r.vd, r.vd_method);
    println!("vd sampled     {:.6}", r.vd_sampled);
    match r.depth_factor {
        Some(f) => println!("depth factor   {f:.4}"),
        None => println!("depth factor   n/a (baseline has zero duration)"),
    }
    println!("complexity     2^{:.2}", r.complexity_log2);
    let top = run.report.recovered.iter().max_by(|x, y| x.1.total_cmp(y.1));
    if let Some((k, p)) = top {
        println!("most frequent  {k} ({p:.4})");
    }
    println!("reports in     {}", cfg.out.display());
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Error> {
    let backend = a.backend.load()?;
    let corpus = load_corpus(&a.corpus)?;
    if corpus.is_empty() {
        return Err(Error::Config(format!("no .qasm files in {}", a.corpus.display())));
    }
    let base_seed = a.seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seeds: --seed {s}");
        s
    });
    let cfg = BenchConfig {
        levels: a.levels,
        randomize_output: match a.randomize_output {
            OnOff::On => vec![true],
            OnOff::Off => vec![false],
            OnOff::Both => vec![false, true],
        },
        switches: a.isolation_db,
        identity_conversion: a.identity_conversion,
        padding_slots: a.padding_slots,
        noise: a.noise,
        shots: a.shots,
        repetitions: a.repetitions,
        base_seed,
    };
    let cells = run_bench(&corpus, &backend, &cfg)?;
    let summary = summarize_bench(&cells);
    write_csv(&cells, &a.out.join("cells.csv"))?;
    write_csv(&summary, &a.out.join("summary.csv"))?;
    write_file(&a.out.join("summary.json"), json(&serde_json::json!({ "config": cfg, "rows": summary })))?;
    println!("{:<10} {:<8} {:<5} {:>10} {:>10} {:>10}", "circuit", "level", "rand", "epsilon", "mean vd", "std err");
    for r in &summary {
        println!(
            "{:<10} {:<8} {:<5} {:>10.3e} {:>10.5} {:>10.5}",
            r.benchmark,
            r.level.as_str(),
            r.randomize_output,
            r.epsilon,
            r.mean_vd,
            r.std_err
        );
    }
    Ok(())
}
