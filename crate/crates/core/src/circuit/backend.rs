use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dt, Gate, GateKind, QuantumCircuit, Qubit};
use crate::error::ValidationError;

/// Native gate kinds a backend may advertise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BasisGate {
    #[serde(rename = "CX", alias = "cx")]
    Cx,
    #[serde(rename = "I", alias = "id", alias = "i")]
    I,
    #[serde(rename = "RZ", alias = "rz")]
    Rz,
    #[serde(rename = "SX", alias = "sx")]
    Sx,
    #[serde(rename = "X", alias = "x")]
    X,
}

/// Unordered qubit pair, stored with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coupling {
    pub lo: Qubit,
    pub hi: Qubit,
}

impl Coupling {
    pub fn new(a: Qubit, b: Qubit) -> Self {
        Coupling { lo: a.min(b), hi: a.max(b) }
    }

    pub fn contains(&self, q: Qubit) -> bool {
        self.lo == q || self.hi == q
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for Coupling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once('-').ok_or_else(|| format!("bad coupling key `{s}`"))?;
        let a: Qubit = a.trim().parse().map_err(|_| format!("bad coupling key `{s}`"))?;
        let b: Qubit = b.trim().parse().map_err(|_| format!("bad coupling key `{s}`"))?;
        Ok(Coupling::new(a, b))
    }
}

#[derive(Serialize, Deserialize)]
struct BackendJson {
    name: String,
    n_qubits: usize,
    couplings: Vec<[Qubit; 2]>,
    sq_dur: Dt,
    cx_dur: BTreeMap<String, Dt>,
    dt_ns: f64,
    basis_gates: Vec<BasisGate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
}

/// Static properties of a target device: topology, native gates and timing.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendDescriptor {
    name: String,
    n_qubits: usize,
    couplings: Vec<Coupling>,
    sq_dur: Dt,
    cx_dur: BTreeMap<Coupling, Dt>,
    dt_ns: f64,
    basis_gates: BTreeSet<BasisGate>,
    notes: Option<String>,
}

impl BackendDescriptor {
    /// Builds a descriptor, checking every structural invariant.
    pub fn new(
        name: impl Into<String>,
        n_qubits: usize,
        cx_dur: impl IntoIterator<Item = ((Qubit, Qubit), Dt)>,
        sq_dur: Dt,
        dt_ns: f64,
        basis_gates: impl IntoIterator<Item = BasisGate>,
    ) -> Result<Self, ValidationError> {
        let mut durations = BTreeMap::new();
        for ((a, b), d) in cx_dur {
            if a == b {
                return Err(ValidationError::Backend(format!("self-coupling on qubit {a}")));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(ValidationError::Backend(format!(
                    "coupling {a}-{b} references a qubit outside 0..{n_qubits}"
                )));
            }
            if d == 0 {
                return Err(ValidationError::Backend(format!("zero CX duration on {a}-{b}")));
            }
            if durations.insert(Coupling::new(a, b), d).is_some() {
                return Err(ValidationError::Backend(format!("duplicate coupling {a}-{b}")));
            }
        }
        if sq_dur == 0 {
            return Err(ValidationError::Backend("sq_dur must be positive".into()));
        }
        if !(dt_ns > 0.0 && dt_ns.is_finite()) {
            return Err(ValidationError::Backend("dt_ns must be positive".into()));
        }
        Ok(BackendDescriptor {
            name: name.into(),
            n_qubits,
            couplings: durations.keys().copied().collect(),
            sq_dur,
            cx_dur: durations,
            dt_ns,
            basis_gates: basis_gates.into_iter().collect(),
            notes: None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ValidationError> {
        let raw: BackendJson = serde_json::from_str(text).map_err(|e| ValidationError::Backend(e.to_string()))?;
        let mut listed = BTreeSet::new();
        for [a, b] in &raw.couplings {
            if a >= b {
                return Err(ValidationError::Backend(format!("coupling [{a},{b}] must be written with a < b")));
            }
            listed.insert(Coupling::new(*a, *b));
        }
        let mut durations = Vec::new();
        for (key, d) in &raw.cx_dur {
            let c: Coupling = key.parse().map_err(ValidationError::Backend)?;
            if !listed.contains(&c) {
                return Err(ValidationError::Backend(format!("cx_dur entry `{key}` has no matching coupling")));
            }
            durations.push(((c.lo, c.hi), *d));
        }
        if durations.len() != listed.len() {
            return Err(ValidationError::Backend("every coupling needs exactly one cx_dur entry".into()));
        }
        let mut backend = Self::new(raw.name, raw.n_qubits, durations, raw.sq_dur, raw.dt_ns, raw.basis_gates)?;
        backend.notes = raw.notes;
        Ok(backend)
    }

    pub fn to_json(&self) -> String {
        let raw = BackendJson {
            name: self.name.clone(),
            n_qubits: self.n_qubits,
            couplings: self.couplings.iter().map(|c| [c.lo, c.hi]).collect(),
            sq_dur: self.sq_dur,
            cx_dur: self.cx_dur.iter().map(|(c, d)| (c.to_string(), *d)).collect(),
            dt_ns: self.dt_ns,
            basis_gates: self.basis_gates.iter().copied().collect(),
            notes: self.notes.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("backend descriptor serializes")
    }

    /// The 7-qubit H-shaped reference device shipped with the crate.
    pub fn ibm_perth() -> Self {
        Self::from_json(include_str!("../../assets/backends/ibm_perth.json")).expect("bundled backend is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Couplings in lexicographic `(lo, hi)` order.
    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn sq_dur(&self) -> Dt {
        self.sq_dur
    }

    pub fn dt_ns(&self) -> f64 {
        self.dt_ns
    }

    pub fn basis_gates(&self) -> &BTreeSet<BasisGate> {
        &self.basis_gates
    }

    pub fn has_coupling(&self, a: Qubit, b: Qubit) -> bool {
        self.cx_dur.contains_key(&Coupling::new(a, b))
    }

    pub fn cx_duration(&self, a: Qubit, b: Qubit) -> Option<Dt> {
        self.cx_dur.get(&Coupling::new(a, b)).copied()
    }

    pub fn max_cx_duration(&self) -> Option<Dt> {
        self.cx_dur.values().copied().max()
    }

    /// Number of RF switches needed: one per drive channel plus one per
    /// control channel.
    pub fn switch_count(&self) -> usize {
        self.n_qubits + self.couplings.len()
    }

    /// Duration a gate occupies on its qubits.
    pub fn gate_duration(&self, gate: &Gate) -> Dt {
        match gate.kind {
            GateKind::X | GateKind::Sx => self.sq_dur,
            GateKind::Cx => self.cx_duration(gate.qubits[0], gate.qubits[1]).unwrap_or(0),
            GateKind::Delay(d) => d,
            _ => 0,
        }
    }

    /// Accepts iff every gate is in the basis, every CX sits on a coupling and
    /// every qubit exists on the device.
    pub fn validate(&self, circuit: &QuantumCircuit) -> Result<(), ValidationError> {
        if circuit.n_qubits() > self.n_qubits {
            return Err(ValidationError::QubitOutOfRange { qubit: circuit.n_qubits() - 1, n_qubits: self.n_qubits });
        }
        for (index, gate) in circuit.gates().iter().enumerate() {
            if let Some(&q) = gate.qubits.iter().find(|&&q| q >= self.n_qubits) {
                return Err(ValidationError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
            }
            let needed = match &gate.kind {
                GateKind::X => Some(BasisGate::X),
                GateKind::Sx => Some(BasisGate::Sx),
                GateKind::Rz(_) => Some(BasisGate::Rz),
                GateKind::Cx => Some(BasisGate::Cx),
                GateKind::Delay(_) | GateKind::Measure | GateKind::Barrier => None,
                GateKind::Opaque(name) => return Err(ValidationError::KindNotInBasis { gate: name.clone(), index }),
            };
            if let Some(kind) = needed {
                if !self.basis_gates.contains(&kind) {
                    return Err(ValidationError::KindNotInBasis { gate: gate.kind.name().to_string(), index });
                }
            }
            if gate.kind == GateKind::Cx && !self.has_coupling(gate.qubits[0], gate.qubits[1]) {
                return Err(ValidationError::UncoupledCx { control: gate.qubits[0], target: gate.qubits[1], index });
            }
        }
        Ok(())
    }
}

/// Free-function form of [`BackendDescriptor::validate`].
pub fn validate_against_backend(circuit: &QuantumCircuit, backend: &BackendDescriptor) -> Result<(), ValidationError> {
    backend.validate(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line3() -> BackendDescriptor {
        BackendDescriptor::new(
            "line3",
            3,
            [((0, 1), 704), ((1, 2), 640)],
            160,
            0.222,
            [BasisGate::Cx, BasisGate::I, BasisGate::Rz, BasisGate::Sx, BasisGate::X],
        )
        .unwrap()
    }

    #[test]
    fn perth_matches_published_topology() {
        let perth = BackendDescriptor::ibm_perth();
        assert_eq!(perth.n_qubits(), 7);
        assert_eq!(perth.sq_dur(), 160);
        assert!((perth.dt_ns() - 0.222).abs() < 1e-12);
        let pairs: Vec<(usize, usize)> = perth.couplings().iter().map(|c| (c.lo, c.hi)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6)]);
        assert_eq!(perth.switch_count(), 13);
    }

    #[test]
    fn json_round_trip() {
        let perth = BackendDescriptor::ibm_perth();
        let again = BackendDescriptor::from_json(&perth.to_json()).unwrap();
        assert_eq!(perth, again);
    }

    #[test]
    fn rejects_malformed_descriptors() {
        let bad_order = r#"{"name":"b","n_qubits":2,"couplings":[[1,0]],"sq_dur":160,
            "cx_dur":{"0-1":700},"dt_ns":0.222,"basis_gates":["CX","X"]}"#;
        assert!(BackendDescriptor::from_json(bad_order).is_err());
        let out_of_range = r#"{"name":"b","n_qubits":2,"couplings":[[0,2]],"sq_dur":160,
            "cx_dur":{"0-2":700},"dt_ns":0.222,"basis_gates":["CX"]}"#;
        assert!(BackendDescriptor::from_json(out_of_range).is_err());
        let missing_dur = r#"{"name":"b","n_qubits":2,"couplings":[[0,1]],"sq_dur":160,
            "cx_dur":{},"dt_ns":0.222,"basis_gates":["CX"]}"#;
        assert!(BackendDescriptor::from_json(missing_dur).is_err());
        let bad_basis = r#"{"name":"b","n_qubits":2,"couplings":[[0,1]],"sq_dur":160,
            "cx_dur":{"0-1":700},"dt_ns":0.222,"basis_gates":["H"]}"#;
        assert!(BackendDescriptor::from_json(bad_basis).is_err());
        let zero_sq = r#"{"name":"b","n_qubits":2,"couplings":[[0,1]],"sq_dur":0,
            "cx_dur":{"0-1":700},"dt_ns":0.222,"basis_gates":["CX"]}"#;
        assert!(BackendDescriptor::from_json(zero_sq).is_err());
    }

    #[test]
    fn validation_accepts_coupled_cx() {
        let c = QuantumCircuit::from_gates(3, [Gate::cx(0, 1), Gate::cx(2, 1)]).unwrap();
        line3().validate(&c).unwrap();
    }

    #[test]
    fn validation_rejects_uncoupled_cx() {
        let perth = BackendDescriptor::ibm_perth();
        let c = QuantumCircuit::from_gates(7, [Gate::cx(0, 6)]).unwrap();
        assert!(matches!(perth.validate(&c), Err(ValidationError::UncoupledCx { control: 0, target: 6, index: 0 })));
    }

    #[test]
    fn validation_rejects_non_basis_kind() {
        let h = Gate { kind: GateKind::Opaque("h".into()), qubits: vec![0], origin: super::super::Origin::User };
        let c = QuantumCircuit::from_gates(2, [h]).unwrap();
        assert!(matches!(line3().validate(&c), Err(ValidationError::KindNotInBasis { .. })));

        let no_sx = BackendDescriptor::new("b", 2, [((0, 1), 500)], 160, 0.2, [BasisGate::Cx]).unwrap();
        let c = QuantumCircuit::from_gates(2, [Gate::sx(0)]).unwrap();
        assert!(matches!(no_sx.validate(&c), Err(ValidationError::KindNotInBasis { .. })));
    }

    #[test]
    fn validation_rejects_wide_circuit() {
        let c = QuantumCircuit::from_gates(5, [Gate::x(4)]).unwrap();
        assert!(matches!(line3().validate(&c), Err(ValidationError::QubitOutOfRange { .. })));
    }
}
