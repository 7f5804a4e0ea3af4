//! Decoy-gate obfuscation.
//!
//! The pipeline schedules the user circuit, cuts it into fixed-length slots,
//! optionally inserts all-decoy padding slots, fills every free sub-slot with
//! a decoy gate, and records the decoys in an input bitmap. An optional final
//! layer of X gates masks the measured outcome.

mod decoys;
mod identity;
mod plan;
mod slots;

pub use decoys::{generate_input_bitmap, insert_decoys, DecoyMarks};
pub use identity::convert_decoys_to_identity;
pub use plan::{compute_slot_plan, Level, SlotPlan};
pub use slots::{
    lane_gates, lanes_are_full, slotted_to_circuit, split_into_slots, LaneEntry, Slot, SlotKind, SlottedCircuit,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmap::InputBitmap;
use crate::circuit::{schedule_asap, BackendDescriptor, CircuitError, Gate, GateKind, Origin, QuantumCircuit};
use crate::error::ValidationError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObfuscationError {
    #[error("backend has no couplings")]
    NoCouplings,
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("bitmap is {found_m}x{found_n}, circuit needs {expected_m}x{expected_n}")]
    BitmapShape { expected_m: usize, expected_n: usize, found_m: usize, found_n: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObfuscationConfig {
    pub level: Level,
    #[serde(default)]
    pub randomize_output: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub padding_slots: usize,
    /// Turn adjacent decoy XX / SX^4 runs into executed identities.
    #[serde(default)]
    pub identity_conversion: bool,
}

impl ObfuscationConfig {
    pub fn new(level: Level) -> Self {
        ObfuscationConfig { level, randomize_output: false, seed: 0, padding_slots: 0, identity_conversion: false }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_randomize_output(mut self, on: bool) -> Self {
        self.randomize_output = on;
        self
    }

    pub fn with_padding_slots(mut self, n: usize) -> Self {
        self.padding_slots = n;
        self
    }

    pub fn with_identity_conversion(mut self, on: bool) -> Self {
        self.identity_conversion = on;
        self
    }
}

/// Everything `obfuscate` produces. Only `circuit` (as QASM text) and the
/// sealed `bitmap` ever leave the user's hands.
#[derive(Debug, Clone, PartialEq)]
pub struct Obfuscated {
    pub circuit: QuantumCircuit,
    pub bitmap: InputBitmap,
    pub plan: SlotPlan,
    /// Slot structure after decoy insertion, excluding the randomize-output
    /// column.
    pub slotted: SlottedCircuit,
    pub marks: DecoyMarks,
}

impl Obfuscated {
    /// Number of sub-slot columns in the bitmap.
    pub fn sub_slots(&self) -> usize {
        self.bitmap.n()
    }
}

/// Runs the full obfuscation pass. The result spans every backend qubit.
pub fn obfuscate(
    circuit: &QuantumCircuit,
    backend: &BackendDescriptor,
    config: &ObfuscationConfig,
) -> Result<Obfuscated, ObfuscationError> {
    let plan = compute_slot_plan(backend, config.level)?;
    backend.validate(circuit)?;
    // decoys go on every backend qubit, so work on the full register
    let circuit = &circuit.widened(backend.n_qubits().max(circuit.n_qubits()))?;
    let sched = schedule_asap(circuit, backend)?;
    let mut slotted = split_into_slots(&sched, &plan);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);

    for _ in 0..config.padding_slots {
        let (kind, sub_slots) = if rng.gen::<bool>() {
            (SlotKind::Cx, plan.cx_slot_sub_slots())
        } else {
            (SlotKind::Sq, plan.sq_slot_sub_slots())
        };
        let at = rng.gen_range(0..=slotted.slots.len());
        slotted.slots.insert(at, Slot::padding(kind, sub_slots, slotted.n_qubits));
    }

    let (slotted, marks) = insert_decoys(&slotted, backend, &mut rng);
    let mut bitmap = generate_input_bitmap(&marks);
    let mut gates = slotted.to_gates();

    let measured = circuit.measured_qubits();
    if config.randomize_output && !measured.is_empty() {
        let col = bitmap.n();
        bitmap.extend_columns(1);
        bitmap.set_randomized_output(true);
        for q in 0..circuit.n_qubits() {
            if measured.contains(&q) {
                gates.push(Gate::x(q).with_origin(Origin::RandomizeOutput));
            } else {
                let g = if rng.gen::<bool>() { Gate::x(q) } else { Gate::sx(q) };
                gates.push(g.with_origin(Origin::Decoy));
                bitmap.set(q, col, true);
            }
        }
    }
    gates.extend(slotted.measures.iter().cloned());
    let out = QuantumCircuit::from_gates(circuit.n_qubits(), gates)?;

    if config.identity_conversion {
        bitmap = convert_decoys_to_identity(&out, &bitmap, backend)?;
    }
    Ok(Obfuscated { circuit: out, bitmap, plan, slotted, marks })
}

/// Puts one X on every measured qubit right before measurement, after a
/// barrier across all qubits so the new layer costs exactly one sub-slot.
pub fn append_randomize_output_layer(circuit: &QuantumCircuit) -> QuantumCircuit {
    let measured = circuit.measured_qubits();
    if measured.is_empty() {
        return circuit.clone();
    }
    let body = circuit.gates().iter().filter(|g| g.kind != GateKind::Measure).cloned();
    let all: Vec<usize> = (0..circuit.n_qubits()).collect();
    let layer = measured.iter().map(|&q| Gate::x(q).with_origin(Origin::RandomizeOutput));
    let measures = circuit.gates().iter().filter(|g| g.kind == GateKind::Measure).cloned();
    let gates = body.chain([Gate::barrier(all)]).chain(layer).chain(measures);
    QuantumCircuit::from_gates(circuit.n_qubits(), gates).expect("same qubits as the input")
}
