use std::collections::HashMap;

use base64::Engine as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::QcTeeEngine;
use super::model::{effective_gate, Effective, NoiseModel, Setting, SwitchModel};
use super::statevector::{Op, StateVector, MAX_QUBITS};
use super::EngineError;
use crate::bitmap::{Channel, ChannelLayout, InputBitmap, OutputBitmap};
use crate::circuit::{schedule_asap, BackendDescriptor, GateKind, QuantumCircuit, Qubit};
use crate::envelope::Envelope;
use crate::recover::{format_bitstring, parse_bitstring, Distribution};

/// Amplitudes kept in prefix checkpoints per job.
const CHECKPOINT_BUDGET: usize = 1 << 22;
/// Amplitudes kept in cached output distributions per job.
const CDF_BUDGET: usize = 1 << 24;

fn hazard(p: f64) -> f64 {
    -(1.0 - p.min(1.0 - 1e-15)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Site {
    One(usize),
    Two(usize, usize),
}

/// A place where noise may strike: after the first `after` ops.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Location {
    after: usize,
    site: Site,
}

#[derive(Debug, Clone, PartialEq)]
struct FinalGate {
    /// Full-register qubit.
    qubit: Qubit,
    pass: Op,
    leak: Option<Op>,
    p_pass: f64,
    p_attenuated: f64,
}

/// Switch settings for a whole job, derived from an input bitmap.
#[derive(Debug, Clone, PartialEq)]
pub struct JobSettings {
    /// `columns[j][c]`: setting of channel `c` during sub-slot `j`.
    pub columns: Vec<Vec<Setting>>,
    /// The randomize-output column and the qubits whose masking X it gates;
    /// their entries in `columns` are ignored, since each shot sets them.
    pub final_layer: Option<(usize, Vec<Qubit>)>,
}

impl JobSettings {
    /// Applies the engine's rule directly: attenuate where the bit is 1.
    pub fn from_bitmap(bitmap: &InputBitmap, n_qubits: usize) -> Self {
        let rand_col = bitmap.randomized_output().then(|| bitmap.n() - 1);
        let columns = (0..bitmap.n())
            .map(|j| {
                (0..bitmap.m()).map(|c| if bitmap.get(c, j) { Setting::Attenuate } else { Setting::Pass }).collect()
            })
            .collect();
        let final_layer = rand_col.map(|j| (j, (0..n_qubits).filter(|&q| !bitmap.get(q, j)).collect()));
        JobSettings { columns, final_layer }
    }
}

/// An obfuscated circuit bound to its switch settings, ready to sample.
///
/// Qubits that never receive a pulse or residue and are not measured are
/// dropped: noise on them cannot reach the measured outcome.
#[derive(Debug, Clone)]
pub struct PreparedJob {
    n_qubits: usize,
    measured_mask: u64,
    active: Vec<Qubit>,
    ops: Vec<Op>,
    locations: Vec<Location>,
    /// Inclusive running sum of location hazards.
    cumulative: Vec<f64>,
    final_gates: Vec<FinalGate>,
    stride: usize,
    checkpoints: Vec<StateVector>,
    body_state: StateVector,
}

impl PreparedJob {
    pub fn new(
        circuit: &QuantumCircuit,
        backend: &BackendDescriptor,
        settings: &JobSettings,
        switch: &SwitchModel,
        noise: &NoiseModel,
    ) -> Result<Self, EngineError> {
        let sched = schedule_asap(circuit, backend)?;
        let sq = backend.sq_dur();
        let layout = ChannelLayout::for_backend(backend);
        let n_cols = settings.columns.len();
        if sched.sub_slots() as usize != n_cols {
            return Err(EngineError::DimensionMismatch {
                what: "sub-slots",
                expected: n_cols,
                found: sched.sub_slots() as usize,
            });
        }
        if let Some(col) = settings.columns.iter().find(|c| c.len() != layout.len()) {
            return Err(EngineError::DimensionMismatch { what: "channels", expected: layout.len(), found: col.len() });
        }

        let setting = |c: usize, j: usize| settings.columns.get(j).map(|col| col[c]);
        let mut events: Vec<(Op, bool)> = Vec::new(); // (op, is pulse-noise site)
        let mut idle: Vec<(usize, Qubit, f64)> = Vec::new(); // (after, qubit, scaled hazard)
        let mut pulses: Vec<(usize, Site, f64)> = Vec::new();
        let mut final_gates = Vec::new();
        let h_idle = hazard(noise.p_idle);

        for (gate, (&t, &d)) in circuit.gates().iter().zip(sched.start_times.iter().zip(&sched.durations)) {
            let s = match gate.kind {
                GateKind::X | GateKind::Sx | GateKind::Cx => {
                    if t % sq != 0 {
                        return Err(EngineError::Desync(format!("{gate} starts off the sub-slot grid at {t}")));
                    }
                    let j = (t / sq) as usize;
                    if let Some((fj, qs)) = &settings.final_layer {
                        if j == *fj && gate.kind != GateKind::Cx && qs.contains(&gate.qubits[0]) {
                            if gate.kind != GateKind::X {
                                return Err(EngineError::Desync(format!("{gate} in the masking layer")));
                            }
                            let Effective::Pulse(pass) = effective_gate(gate, Setting::Pass, switch, d) else {
                                unreachable!()
                            };
                            let leak = match effective_gate(gate, Setting::Attenuate, switch, d) {
                                Effective::Leak { op, .. } => Some(op),
                                _ => None,
                            };
                            final_gates.push(FinalGate {
                                qubit: gate.qubits[0],
                                pass,
                                leak,
                                p_pass: noise.p1,
                                p_attenuated: 1.0 - (-h_idle * d as f64 / sq as f64).exp(),
                            });
                            continue;
                        }
                    }
                    if gate.kind == GateKind::Cx {
                        let (a, b) = (gate.qubits[0], gate.qubits[1]);
                        let ctrl = layout.channel_index(Channel::Control(a, b))?;
                        let span = d.div_ceil(sq) as usize;
                        let mut seen = Vec::new();
                        for jj in j..j + span {
                            for c in [a, b, ctrl] {
                                seen.push(
                                    setting(c, jj)
                                        .ok_or_else(|| EngineError::Desync(format!("{gate} runs past the bitmap")))?,
                                );
                            }
                        }
                        if seen.iter().all(|s| *s == Setting::Attenuate) {
                            Setting::Attenuate
                        } else if seen.iter().all(|s| *s == Setting::Pass) {
                            Setting::Pass
                        } else {
                            return Err(EngineError::Desync(format!("{gate} is partly attenuated")));
                        }
                    } else {
                        setting(gate.qubits[0], j)
                            .ok_or_else(|| EngineError::Desync(format!("{gate} outside the bitmap")))?
                    }
                }
                _ => Setting::Pass,
            };
            match effective_gate(gate, s, switch, d) {
                Effective::Pulse(op) => {
                    events.push((op, true));
                    let site = match op.qubits() {
                        (q, None) => (Site::One(q), hazard(noise.p1)),
                        (c, Some(t)) => (Site::Two(c, t), hazard(noise.p2)),
                    };
                    pulses.push((events.len(), site.0, site.1));
                }
                Effective::Virtual(op) => events.push((op, false)),
                Effective::Delay { qubits, duration } => {
                    for q in qubits {
                        idle.push((events.len(), q, h_idle * duration as f64 / sq as f64));
                    }
                }
                Effective::Leak { op, duration } => {
                    events.push((op, false));
                    let (a, b) = op.qubits();
                    for q in std::iter::once(a).chain(b) {
                        idle.push((events.len(), q, h_idle * duration as f64 / sq as f64));
                    }
                }
            }
        }

        // compact register: touched or measured qubits only
        let mut used = circuit.measured_mask();
        for (op, _) in &events {
            let (a, b) = op.qubits();
            used |= 1 << a;
            if let Some(b) = b {
                used |= 1 << b;
            }
        }
        for g in &final_gates {
            used |= 1 << g.qubit;
        }
        let active: Vec<Qubit> = (0..circuit.n_qubits()).filter(|q| used >> q & 1 == 1).collect();
        if active.len() > MAX_QUBITS {
            return Err(EngineError::TooManyQubits { n: active.len(), max: MAX_QUBITS });
        }
        let mut index = vec![usize::MAX; circuit.n_qubits()];
        for (i, &q) in active.iter().enumerate() {
            index[q] = i;
        }
        let ops: Vec<Op> = events.into_iter().map(|(op, _)| op.remap(|q| index[q])).collect();

        let mut located: Vec<(usize, Site, f64)> = pulses
            .into_iter()
            .map(|(after, site, h)| {
                let site = match site {
                    Site::One(q) => Site::One(index[q]),
                    Site::Two(a, b) => Site::Two(index[a], index[b]),
                };
                (after, site, h)
            })
            .chain(
                idle.into_iter()
                    .filter(|&(_, q, _)| index[q] != usize::MAX)
                    .map(|(after, q, h)| (after, Site::One(index[q]), h)),
            )
            .filter(|&(_, _, h)| h > 0.0)
            .collect();
        located.sort_by_key(|&(after, _, _)| after);
        let mut total = 0.0;
        let mut locations = Vec::with_capacity(located.len());
        let mut cumulative = Vec::with_capacity(located.len());
        for (after, site, h) in located {
            total += h;
            locations.push(Location { after, site });
            cumulative.push(total);
        }
        let final_gates = final_gates
            .into_iter()
            .map(|g| FinalGate { pass: g.pass.remap(|q| index[q]), leak: g.leak.map(|o| o.remap(|q| index[q])), ..g })
            .collect();

        let dim = 1usize << active.len();
        let stride = ((ops.len() + 1) * dim).div_ceil(CHECKPOINT_BUDGET).max(1);
        let mut state = StateVector::zero(active.len());
        let mut checkpoints = Vec::new();
        for (k, op) in ops.iter().enumerate() {
            if k % stride == 0 {
                checkpoints.push(state.clone());
            }
            state.apply(op);
        }
        if ops.len().is_multiple_of(stride) {
            checkpoints.push(state.clone());
        }

        Ok(PreparedJob {
            n_qubits: circuit.n_qubits(),
            measured_mask: circuit.measured_mask(),
            active,
            ops,
            locations,
            cumulative,
            final_gates,
            stride,
            checkpoints,
            body_state: state,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn measured_mask(&self) -> u64 {
        self.measured_mask
    }

    /// Qubits carried in the simulation.
    pub fn active_qubits(&self) -> &[Qubit] {
        &self.active
    }

    /// Qubits gated by the randomize-output layer.
    pub fn masking_qubits(&self) -> Vec<Qubit> {
        self.final_gates.iter().map(|g| g.qubit).collect()
    }

    /// Expected number of noise events per shot, excluding the final layer.
    pub fn mean_body_errors(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn restore(&self, after: usize, state: &mut StateVector) {
        let cp = after / self.stride;
        state.copy_from(&self.checkpoints[cp]);
        for op in &self.ops[cp * self.stride..after] {
            state.apply(op);
        }
    }

    fn apply_final(&self, mask: u64, state: &mut StateVector, rng: Option<&mut ChaCha20Rng>) {
        let mut rng = rng;
        for g in &self.final_gates {
            let passed = mask >> g.qubit & 1 == 1;
            let op = if passed { Some(g.pass) } else { g.leak };
            if let Some(op) = op {
                state.apply(&op);
            }
            if let Some(r) = rng.as_deref_mut() {
                let p = if passed { g.p_pass } else { g.p_attenuated };
                if p > 0.0 && r.gen::<f64>() < p {
                    let (q, _) = g.pass.qubits();
                    state.apply(&Op::Pauli(q, r.gen_range(1..=3)));
                }
            }
        }
    }

    fn final_clean(&self, mask: u64) -> StateVector {
        let mut s = self.body_state.clone();
        self.apply_final(mask, &mut s, None);
        s
    }

    fn to_outcome(&self, compact: usize) -> u64 {
        let mut out = 0u64;
        for (i, &q) in self.active.iter().enumerate() {
            if compact >> i & 1 == 1 {
                out |= 1 << q;
            }
        }
        out & self.measured_mask
    }

    fn cdf(state: &StateVector) -> Vec<f64> {
        let mut acc = 0.0;
        state
            .amplitudes()
            .iter()
            .map(|a| {
                acc += a.norm_sqr();
                acc
            })
            .collect()
    }

    fn sample(&self, cdf: &[f64], rng: &mut ChaCha20Rng) -> u64 {
        let total = *cdf.last().expect("non-empty state");
        let u = rng.gen::<f64>() * total;
        let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        self.to_outcome(i)
    }

    fn apply_error(&self, site: Site, state: &mut StateVector, rng: &mut ChaCha20Rng) {
        match site {
            Site::One(q) => state.apply(&Op::Pauli(q, rng.gen_range(1..=3))),
            Site::Two(a, b) => {
                let k: u8 = rng.gen_range(1..16);
                if k & 3 != 0 {
                    state.apply(&Op::Pauli(a, k & 3));
                }
                if k >> 2 != 0 {
                    state.apply(&Op::Pauli(b, k >> 2));
                }
            }
        }
    }

    /// One noisy shot with the masking layer set by `mask`.
    fn shot(&self, mask: u64, rng: &mut ChaCha20Rng, scratch: &mut StateVector, clean: Option<&[f64]>) -> u64 {
        let exp = |r: &mut ChaCha20Rng| -(1.0 - r.gen::<f64>()).ln();
        let mut threshold = exp(rng);
        let mut i = self.cumulative.partition_point(|&c| c < threshold);
        if i == self.locations.len() {
            // body ran clean; draw final-layer errors, then sample
            let final_hits = self.final_gates.iter().any(|g| {
                let p = if mask >> g.qubit & 1 == 1 { g.p_pass } else { g.p_attenuated };
                p > 0.0 && rng.gen::<f64>() < p
            });
            if !final_hits {
                return match clean {
                    Some(cdf) => self.sample(cdf, rng),
                    None => self.sample(&Self::cdf(&self.final_clean(mask)), rng),
                };
            }
            scratch.copy_from(&self.body_state);
            // re-apply the layer with one forced error on a hit gate
            self.apply_final_with_forced(mask, scratch, rng);
            return self.sample(&Self::cdf(scratch), rng);
        }
        let first = self.locations[i];
        self.restore(first.after, scratch);
        let mut pos = first.after;
        loop {
            self.apply_error(self.locations[i].site, scratch, rng);
            threshold = self.cumulative[i] + exp(rng);
            let next = self.cumulative.partition_point(|&c| c < threshold);
            let upto = self.locations.get(next).map_or(self.ops.len(), |l| l.after);
            for op in &self.ops[pos..upto] {
                scratch.apply(op);
            }
            pos = upto;
            if next == self.locations.len() {
                break;
            }
            i = next;
        }
        self.apply_final(mask, scratch, Some(rng));
        self.sample(&Self::cdf(scratch), rng)
    }

    /// Final layer after a clean body, conditioned on at least one error:
    /// draws per-gate errors afresh until one hits. The conditional law of
    /// independent Bernoulli draws given "at least one" is the same.
    fn apply_final_with_forced(&self, mask: u64, state: &mut StateVector, rng: &mut ChaCha20Rng) {
        let probs: Vec<f64> =
            self.final_gates.iter().map(|g| if mask >> g.qubit & 1 == 1 { g.p_pass } else { g.p_attenuated }).collect();
        let hits = loop {
            let h: Vec<bool> = probs.iter().map(|&p| p > 0.0 && rng.gen::<f64>() < p).collect();
            if h.iter().any(|&b| b) {
                break h;
            }
        };
        for (g, hit) in self.final_gates.iter().zip(hits) {
            let passed = mask >> g.qubit & 1 == 1;
            if let Some(op) = if passed { Some(g.pass) } else { g.leak } {
                state.apply(&op);
            }
            if hit {
                let (q, _) = g.pass.qubits();
                state.apply(&Op::Pauli(q, rng.gen_range(1..=3)));
            }
        }
    }

    /// Samples one outcome per mask; shot `i` uses random stream `i` of
    /// `seed`, so results do not depend on scheduling.
    pub fn run_shots(&self, masks: &[u64], seed: u64) -> Vec<u64> {
        let dim = 1usize << self.active.len();
        let mut distinct: Vec<u64> = masks.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let cache: HashMap<u64, Vec<f64>> = if distinct.len() * dim <= CDF_BUDGET {
            distinct.iter().map(|&m| (m, Self::cdf(&self.final_clean(m)))).collect()
        } else {
            HashMap::new()
        };
        masks
            .par_iter()
            .enumerate()
            .map_init(
                || StateVector::zero(self.active.len()),
                |scratch, (i, &mask)| {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    self.shot(mask, &mut rng, scratch, cache.get(&mask).map(Vec::as_slice))
                },
            )
            .collect()
    }

    /// Noise-free distribution of raw outcomes for one masking pattern.
    pub fn exact_raw_distribution(&self, mask: u64) -> Distribution {
        let probs = self.final_clean(mask).probabilities();
        Distribution::from_pairs(self.n_qubits, probs.iter().enumerate().map(|(i, &p)| (self.to_outcome(i), p)))
    }

    /// Noise-free distribution a client recovers, given the masks actually
    /// drawn: the shot-weighted mix of each mask's raw distribution with the
    /// mask XORed back out.
    pub fn exact_recovered_distribution(&self, output: &OutputBitmap) -> Distribution {
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for s in 0..output.shots() {
            *counts.entry(output.row_mask(s)).or_default() += 1;
        }
        let mut keys: Vec<_> = counts.into_iter().collect();
        keys.sort_unstable();
        let mut d = Distribution::new(self.n_qubits);
        let w = 1.0 / output.shots().max(1) as f64;
        for (mask, c) in keys {
            d.accumulate(&self.exact_raw_distribution(mask).xor_shift(mask), c as f64 * w);
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobOptions {
    pub shots: usize,
    pub switch: SwitchModel,
    pub noise: NoiseModel,
    pub trng_seed: u64,
    pub noise_seed: u64,
}

impl JobOptions {
    pub fn new(shots: usize) -> Self {
        JobOptions { shots, switch: SwitchModel::ideal(), noise: NoiseModel::noiseless(), trng_seed: 0, noise_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobMetadata {
    pub shots: usize,
    pub sub_slots: usize,
    pub trng_seed: u64,
    pub noise_seed: u64,
    pub switch: SwitchModel,
    pub epsilon: f64,
    pub noise: NoiseModel,
}

/// What the provider returns to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub n_qubits: usize,
    pub measured: Vec<Qubit>,
    /// Raw per-shot outcomes, qubit 0 rightmost.
    pub shots: Vec<String>,
    /// Base64 of the sealed output bitmap; absent without randomize-output.
    pub output_envelope: Option<String>,
    pub metadata: JobMetadata,
}

impl JobResult {
    pub fn raw_outcomes(&self) -> Result<Vec<u64>, EngineError> {
        self.shots.iter().map(|s| parse_bitstring(s).map_err(|e| EngineError::Desync(e.to_string()))).collect()
    }

    pub fn envelope(&self) -> Result<Option<Envelope>, EngineError> {
        let Some(text) = &self.output_envelope else { return Ok(None) };
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(text)
            .map_err(|_| EngineError::Desync("output envelope is not base64".into()))?;
        Ok(Some(Envelope::from_bytes(&bytes)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        serde_json::from_str(text).map_err(|e| EngineError::Desync(format!("job result: {e}")))
    }
}

/// Runs `circuit` on the engine's loaded bitmap.
///
/// Non-final sub-slots are ticked once: their settings depend only on the
/// bitmap. The randomize-output layer is ticked once per shot, drawing fresh
/// TRNG bits that become that shot's output-bitmap row.
pub fn execute_job(
    circuit: &QuantumCircuit,
    backend: &BackendDescriptor,
    engine: &mut QcTeeEngine,
    opts: &JobOptions,
) -> Result<JobResult, EngineError> {
    if opts.shots == 0 {
        return Err(EngineError::InvalidModel("shots must be at least 1".into()));
    }
    let bitmap = engine.bitmap()?;
    let n = bitmap.n();
    let randomized = bitmap.randomized_output();
    let body = if randomized { n - 1 } else { n };
    let masked: Vec<Qubit> =
        if randomized { (0..backend.n_qubits()).filter(|&q| !bitmap.get(q, n - 1)).collect() } else { vec![] };

    let mut trng = ChaCha20Rng::seed_from_u64(opts.trng_seed);
    let mut columns = Vec::with_capacity(n);
    for j in 0..body {
        columns.push(engine.engine_tick(j, &mut trng)?.settings);
    }
    let mut output = OutputBitmap::zeros(opts.shots, backend.n_qubits());
    let mut masks = vec![0u64; opts.shots];
    if randomized {
        for (s, mask) in masks.iter_mut().enumerate() {
            let tick = engine.engine_tick(n - 1, &mut trng)?;
            if s == 0 {
                columns.push(tick.settings);
            }
            *mask = tick.output_bits;
            output.set_row_mask(s, *mask);
        }
    }
    let settings = JobSettings { columns, final_layer: randomized.then(|| (n - 1, masked)) };
    let job = PreparedJob::new(circuit, backend, &settings, &opts.switch, &opts.noise)?;
    let raw = job.run_shots(&masks, opts.noise_seed);
    let output_envelope = if randomized {
        let env = engine.seal_output(&output)?;
        Some(base64::engine::general_purpose::STANDARD.encode(env.to_bytes()))
    } else {
        None
    };
    Ok(JobResult {
        n_qubits: circuit.n_qubits(),
        measured: circuit.measured_qubits().iter().copied().collect(),
        shots: raw.iter().map(|&x| format_bitstring(x, circuit.n_qubits())).collect(),
        output_envelope,
        metadata: JobMetadata {
            shots: opts.shots,
            sub_slots: n,
            trng_seed: opts.trng_seed,
            noise_seed: opts.noise_seed,
            switch: opts.switch,
            epsilon: opts.switch.epsilon(),
            noise: opts.noise,
        },
    })
}

/// Exact output of `circuit` with every gate executed as written, over the
/// full register (qubit `q` is bit `q`).
pub fn simulate_exact(circuit: &QuantumCircuit) -> Result<Distribution, EngineError> {
    let n = circuit.n_qubits();
    if n > MAX_QUBITS {
        return Err(EngineError::TooManyQubits { n, max: MAX_QUBITS });
    }
    let mut s = StateVector::zero(n);
    let ideal = SwitchModel::ideal();
    for g in circuit.gates() {
        if let Effective::Pulse(op) | Effective::Virtual(op) = effective_gate(g, Setting::Pass, &ideal, 0) {
            s.apply(&op);
        }
    }
    Ok(Distribution::from_pairs(n, s.probabilities().into_iter().enumerate().map(|(i, p)| (i as u64, p))))
}

/// [`simulate_exact`] marginalised onto the measured qubits; unmeasured
/// bits read as 0.
pub fn baseline_distribution(circuit: &QuantumCircuit) -> Result<Distribution, EngineError> {
    let full = simulate_exact(circuit)?;
    let mask = circuit.measured_mask();
    Ok(Distribution::from_pairs(full.width(), full.iter().map(|(k, p)| (k & mask, p))))
}
