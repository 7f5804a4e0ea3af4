//! Gate-level circuit representation.
//!
//! Circuits are expressed over the native basis `{CX, I, RZ, SX, X}` plus the
//! non-unitary bookkeeping instructions `DELAY`, `MEASURE` and `BARRIER`.
//! Timing is measured in backend `dt` units.

mod backend;
mod qasm;
mod schedule;

pub use backend::{validate_against_backend, BackendDescriptor, BasisGate, Coupling};
pub use qasm::{emit_qasm, parse_qasm, QasmError, QasmErrorKind};
pub use schedule::{circuit_duration, schedule_asap, ScheduledCircuit};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Qubit index.
pub type Qubit = usize;

/// Duration in backend `dt` units.
pub type Dt = u64;

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    X,
    Sx,
    /// Virtual Z rotation, angle in radians.
    Rz(f64),
    /// CNOT; `qubits` is `[control, target]`.
    Cx,
    Delay(Dt),
    Measure,
    Barrier,
    /// A named gate outside the supported basis. Never produced by the
    /// parser; exists so that foreign gate lists can be rejected by
    /// validation instead of silently dropped.
    Opaque(String),
}

impl GateKind {
    pub fn name(&self) -> &str {
        match self {
            GateKind::X => "x",
            GateKind::Sx => "sx",
            GateKind::Rz(_) => "rz",
            GateKind::Cx => "cx",
            GateKind::Delay(_) => "delay",
            GateKind::Measure => "measure",
            GateKind::Barrier => "barrier",
            GateKind::Opaque(name) => name,
        }
    }
}

/// Who put a gate into the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    User,
    Decoy,
    RandomizeOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<Qubit>,
    pub origin: Origin,
}

impl Gate {
    fn user(kind: GateKind, qubits: Vec<Qubit>) -> Self {
        Gate { kind, qubits, origin: Origin::User }
    }

    pub fn x(q: Qubit) -> Self {
        Self::user(GateKind::X, vec![q])
    }

    pub fn sx(q: Qubit) -> Self {
        Self::user(GateKind::Sx, vec![q])
    }

    pub fn rz(q: Qubit, angle: f64) -> Self {
        Self::user(GateKind::Rz(angle), vec![q])
    }

    pub fn cx(control: Qubit, target: Qubit) -> Self {
        Self::user(GateKind::Cx, vec![control, target])
    }

    pub fn delay(q: Qubit, duration: Dt) -> Self {
        Self::user(GateKind::Delay(duration), vec![q])
    }

    pub fn measure(q: Qubit) -> Self {
        Self::user(GateKind::Measure, vec![q])
    }

    pub fn barrier(qubits: impl Into<Vec<Qubit>>) -> Self {
        Self::user(GateKind::Barrier, qubits.into())
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn is_decoy(&self) -> bool {
        self.origin == Origin::Decoy
    }

    /// Single-qubit X or SX: the gates that occupy exactly one sub-slot.
    pub fn is_sub_slot_gate(&self) -> bool {
        matches!(self.kind, GateKind::X | GateKind::Sx)
    }

    fn check_arity(&self) -> Result<(), CircuitError> {
        let ok = match self.kind {
            GateKind::X | GateKind::Sx | GateKind::Rz(_) | GateKind::Delay(_) | GateKind::Measure => {
                self.qubits.len() == 1
            }
            GateKind::Cx => self.qubits.len() == 2 && self.qubits[0] != self.qubits[1],
            GateKind::Barrier => {
                !self.qubits.is_empty() && self.qubits.iter().collect::<BTreeSet<_>>().len() == self.qubits.len()
            }
            GateKind::Opaque(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(CircuitError::BadArity { gate: self.kind.name().to_string(), qubits: self.qubits.clone() })
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GateKind::Rz(angle) => write!(f, "rz({angle})")?,
            GateKind::Delay(d) => write!(f, "delay({d})")?,
            other => write!(f, "{}", other.name())?,
        }
        let qs: Vec<String> = self.qubits.iter().map(|q| format!("q[{q}]")).collect();
        write!(f, " {}", qs.join(","))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit index {qubit} out of range for {n_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: Qubit, n_qubits: usize },
    #[error("gate `{gate}` has invalid operands {qubits:?}")]
    BadArity { gate: String, qubits: Vec<Qubit> },
    #[error("gate `{gate}` follows the measurement of qubit {qubit}")]
    GateAfterMeasure { gate: String, qubit: Qubit },
}

/// An ordered gate list over `n_qubits` qubits.
///
/// Measurements are terminal: once a qubit is measured, no further gate
/// except a barrier may act on it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantumCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    measured: BTreeSet<Qubit>,
}

impl QuantumCircuit {
    pub fn new(n_qubits: usize) -> Self {
        QuantumCircuit { n_qubits, gates: Vec::new(), measured: BTreeSet::new() }
    }

    pub fn from_gates(n_qubits: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self, CircuitError> {
        let mut circuit = Self::new(n_qubits);
        for gate in gates {
            circuit.push(gate)?;
        }
        Ok(circuit)
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        gate.check_arity()?;
        for &q in &gate.qubits {
            if q >= self.n_qubits {
                return Err(CircuitError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
            }
        }
        if gate.kind != GateKind::Barrier {
            if let Some(&q) = gate.qubits.iter().find(|q| self.measured.contains(q)) {
                return Err(CircuitError::GateAfterMeasure { gate: gate.kind.name().to_string(), qubit: q });
            }
        }
        if gate.kind == GateKind::Measure {
            self.measured.insert(gate.qubits[0]);
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn measured_qubits(&self) -> &BTreeSet<Qubit> {
        &self.measured
    }

    /// Bit mask with bit `q` set for every measured qubit.
    pub fn measured_mask(&self) -> u64 {
        self.measured_qubits().iter().fold(0, |m, &q| m | (1u64 << q))
    }

    /// Same gates on a wider register.
    pub fn widened(&self, n_qubits: usize) -> Result<Self, CircuitError> {
        if n_qubits < self.n_qubits {
            // shrinking may drop referenced qubits; rebuild to re-check
            return Self::from_gates(n_qubits, self.gates.iter().cloned());
        }
        Ok(QuantumCircuit { n_qubits, ..self.clone() })
    }

    /// Copy with every BARRIER removed.
    pub fn without_barriers(&self) -> Self {
        QuantumCircuit {
            gates: self.gates.iter().filter(|g| g.kind != GateKind::Barrier).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn count_by_origin(&self, origin: Origin) -> usize {
        self.gates.iter().filter(|g| g.origin == origin).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measured_qubit_is_terminal() {
        let mut c = QuantumCircuit::new(2);
        c.push(Gate::x(0)).unwrap();
        c.push(Gate::measure(0)).unwrap();
        c.push(Gate::barrier(vec![0, 1])).unwrap();
        c.push(Gate::x(1)).unwrap();
        let err = c.push(Gate::sx(0)).unwrap_err();
        assert!(matches!(err, CircuitError::GateAfterMeasure { qubit: 0, .. }));
        assert!(matches!(c.push(Gate::measure(0)), Err(CircuitError::GateAfterMeasure { .. })));
    }

    #[test]
    fn arity_and_range_checks() {
        let mut c = QuantumCircuit::new(2);
        assert!(matches!(c.push(Gate::cx(1, 1)), Err(CircuitError::BadArity { .. })));
        assert!(matches!(c.push(Gate::x(2)), Err(CircuitError::QubitOutOfRange { qubit: 2, n_qubits: 2 })));
        assert!(matches!(c.push(Gate::barrier(vec![0, 0])), Err(CircuitError::BadArity { .. })));
    }

    #[test]
    fn measured_mask_collects_bits() {
        let c = QuantumCircuit::from_gates(4, [Gate::x(1), Gate::measure(1), Gate::measure(3)]).unwrap();
        assert_eq!(c.measured_mask(), 0b1010);
    }
}
