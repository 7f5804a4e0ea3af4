use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::statevector::Op;
use super::EngineError;
use crate::circuit::{Dt, Gate, GateKind, Qubit};

/// RF switch in front of a drive or control line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchModel {
    /// Off-state isolation in dB; `None` is a perfect switch.
    pub isolation_db: Option<f64>,
    pub insertion_loss_db: f64,
    /// Scale passed pulses by the insertion loss instead of assuming it is
    /// calibrated away.
    pub scale_pass: bool,
}

impl Default for SwitchModel {
    fn default() -> Self {
        SwitchModel::ideal()
    }
}

impl SwitchModel {
    pub fn ideal() -> Self {
        SwitchModel { isolation_db: None, insertion_loss_db: 0.0, scale_pass: false }
    }

    pub fn with_isolation_db(db: f64) -> Result<Self, EngineError> {
        if !db.is_finite() || db < 0.0 {
            return Err(EngineError::InvalidModel(format!("isolation must be finite and >= 0 dB, got {db}")));
        }
        Ok(SwitchModel { isolation_db: Some(db), ..Self::ideal() })
    }

    /// Switch whose off-state amplitude fraction is `eps`.
    pub fn with_epsilon(eps: f64) -> Result<Self, EngineError> {
        if eps == 0.0 {
            return Ok(Self::ideal());
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(EngineError::InvalidModel(format!("epsilon must be in [0, 1], got {eps}")));
        }
        Self::with_isolation_db(-20.0 * eps.log10())
    }

    pub fn with_insertion_loss(mut self, db: f64, scale_pass: bool) -> Self {
        self.insertion_loss_db = db;
        self.scale_pass = scale_pass;
        self
    }

    /// Off-state amplitude fraction `10^(-dB/20)`, zero when ideal.
    pub fn epsilon(&self) -> f64 {
        self.isolation_db.map_or(0.0, |db| 10f64.powf(-db / 20.0))
    }

    pub fn pass_amplitude(&self) -> f64 {
        if self.scale_pass {
            10f64.powf(-self.insertion_loss_db / 20.0)
        } else {
            1.0
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.isolation_db.is_none()
    }
}

impl FromStr for SwitchModel {
    type Err = EngineError;

    /// `ideal`, or an isolation in dB.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("ideal") || s.eq_ignore_ascii_case("inf") {
            return Ok(SwitchModel::ideal());
        }
        let db: f64 = s.parse().map_err(|_| EngineError::InvalidModel(format!("bad isolation `{s}`")))?;
        SwitchModel::with_isolation_db(db)
    }
}

impl fmt::Display for SwitchModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.isolation_db {
            None => f.write_str("ideal"),
            Some(db) => write!(f, "{db}dB"),
        }
    }
}

/// Stochastic Pauli noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per executed single-qubit pulse: one of X, Y, Z.
    pub p1: f64,
    /// Per executed CX: one of the 15 non-identity two-qubit Paulis.
    pub p2: f64,
    /// Per qubit per idle or attenuated sub-slot: one of X, Y, Z.
    pub p_idle: f64,
}

impl NoiseModel {
    pub fn new(p1: f64, p2: f64, p_idle: f64) -> Result<Self, EngineError> {
        for p in [p1, p2, p_idle] {
            if !(0.0..=1.0).contains(&p) {
                return Err(EngineError::InvalidModel(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(NoiseModel { p1, p2, p_idle })
    }

    pub fn noiseless() -> Self {
        NoiseModel::default()
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.p_idle == 0.0
    }
}

impl FromStr for NoiseModel {
    type Err = EngineError;

    /// `p1,p2,pidle` or `none`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("none") {
            return Ok(NoiseModel::noiseless());
        }
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| EngineError::InvalidModel(format!("bad noise spec `{s}`")))?;
        match parts[..] {
            [p1, p2, pi] => NoiseModel::new(p1, p2, pi),
            _ => Err(EngineError::InvalidModel(format!("noise spec `{s}` needs p1,p2,pidle"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    Pass,
    Attenuate,
}

/// What a gate does to the qubits once it has passed through the switches.
#[derive(Debug, Clone, PartialEq)]
pub enum Effective {
    /// The pulse reaches the qubits.
    Pulse(Op),
    /// A frame change; no pulse is sent.
    Virtual(Op),
    /// Nothing reaches the qubits for `duration`.
    Delay { qubits: Vec<Qubit>, duration: Dt },
    /// An attenuated pulse whose residue still rotates the qubits.
    Leak { op: Op, duration: Dt },
}

/// Applies a switch setting to one gate.
///
/// Attenuated pulses keep their shape at amplitude fraction `eps`, so the
/// rotation angle scales linearly: X becomes RX(eps pi), SX becomes
/// RX(eps pi/2) and a CX becomes the cross-resonance term RZX(eps pi/2).
pub fn effective_gate(gate: &Gate, setting: Setting, switch: &SwitchModel, duration: Dt) -> Effective {
    let q = gate.qubits.first().copied().unwrap_or(0);
    match (&gate.kind, setting) {
        (GateKind::Rz(theta), _) => Effective::Virtual(Op::Rz(q, *theta)),
        (GateKind::Delay(d), _) => Effective::Delay { qubits: gate.qubits.clone(), duration: *d },
        (GateKind::X | GateKind::Sx | GateKind::Cx, Setting::Pass) => {
            let a = switch.pass_amplitude();
            let op = if a == 1.0 {
                match gate.kind {
                    GateKind::X => Op::X(q),
                    GateKind::Sx => Op::Sx(q),
                    _ => Op::Cx(q, gate.qubits[1]),
                }
            } else {
                // a X = e^{i a pi/2} RX(a pi), likewise for SX and controlled X
                match gate.kind {
                    GateKind::X => Op::PhasedRx { q, theta: a * PI, phase: a * PI / 2.0 },
                    GateKind::Sx => Op::PhasedRx { q, theta: a * PI / 2.0, phase: a * PI / 4.0 },
                    _ => Op::CRx { c: q, t: gate.qubits[1], theta: a * PI, phase: a * PI / 2.0 },
                }
            };
            Effective::Pulse(op)
        }
        (GateKind::X | GateKind::Sx | GateKind::Cx, Setting::Attenuate) => {
            let eps = switch.epsilon();
            if eps == 0.0 {
                return Effective::Delay { qubits: gate.qubits.clone(), duration };
            }
            let op = match gate.kind {
                GateKind::X => Op::Rx(q, eps * PI),
                GateKind::Sx => Op::Rx(q, eps * PI / 2.0),
                _ => Op::Rzx { c: q, t: gate.qubits[1], theta: eps * PI / 2.0 },
            };
            Effective::Leak { op, duration }
        }
        (GateKind::Measure | GateKind::Barrier | GateKind::Opaque(_), _) => {
            Effective::Delay { qubits: gate.qubits.clone(), duration: 0 }
        }
    }
}
