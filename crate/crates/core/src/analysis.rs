//! Side models: brute-force attack complexity, depth overhead, and the
//! power and volume cost of the in-fridge hardware.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::ScheduledCircuit;
use crate::obfuscator::{Obfuscated, SlotKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("baseline circuit has zero duration")]
    ZeroBaseDuration,
}

/// Counts that drive the attack-complexity estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityParams {
    pub n_qubits: u64,
    pub n_slot_cx: u64,
    pub n_slot_sq: u64,
    /// Sub-slots per single-qubit slot, i.e. gates per qubit per slot.
    pub n_subslots: u64,
    /// CX gates sharing one CX slot.
    pub n_subcx_in_slotcx: u64,
    /// Sub-slots in one CX slot.
    pub n_subslots_in_slotcx: u64,
    pub randomize_output: bool,
}

impl ComplexityParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if 2 * self.n_subcx_in_slotcx > self.n_qubits {
            return Err(AnalysisError::InvalidParams(format!(
                "{} CX gates cannot share a slot on {} qubits",
                self.n_subcx_in_slotcx, self.n_qubits
            )));
        }
        Ok(())
    }

    /// Counts read off an obfuscator result. Padding slots are excluded:
    /// they carry no user gates.
    pub fn from_obfuscated(o: &Obfuscated, randomize_output: bool) -> Self {
        let real = || o.slotted.slots.iter().filter(|s| !s.padding);
        let max_cx = real()
            .filter(|s| s.kind == SlotKind::Cx)
            .map(|s| s.cx_count(Some(crate::circuit::Origin::User)))
            .max()
            .unwrap_or(0);
        ComplexityParams {
            n_qubits: o.circuit.n_qubits() as u64,
            n_slot_cx: real().filter(|s| s.kind == SlotKind::Cx).count() as u64,
            n_slot_sq: real().filter(|s| s.kind == SlotKind::Sq).count() as u64,
            n_subslots: o.plan.sq_slot_sub_slots() as u64,
            n_subcx_in_slotcx: max_cx as u64,
            n_subslots_in_slotcx: o.plan.cx_slot_sub_slots() as u64,
            randomize_output,
        }
    }
}

/// `log2(a * 2^b)` without forming `2^b`.
fn log2_scaled(a: f64, b: u64) -> f64 {
    a.log2() + b as f64
}

/// log2 of the number of circuits an attacker must try:
///
/// ```text
/// (n_qubits * 2^n_subslots * n_slot_sq)
///   * (2 n_subcx + (n_qubits - 2 n_subcx) * 2^n_subslots_in_slotcx) * n_slot_cx
///   * 2^n_qubits
/// ```
///
/// A factor whose slot count is zero stands for absent structure and counts
/// as 1. Without randomize-output the last factor is dropped.
pub fn attack_complexity_log2(p: &ComplexityParams) -> Result<f64, AnalysisError> {
    p.validate()?;
    let mut bits = 0.0;
    if p.n_slot_sq > 0 && p.n_qubits > 0 {
        bits += log2_scaled(p.n_qubits as f64, p.n_subslots) + (p.n_slot_sq as f64).log2();
    }
    let free = p.n_qubits - 2 * p.n_subcx_in_slotcx;
    if p.n_slot_cx > 0 && p.n_qubits > 0 {
        let paired = 2.0 * p.n_subcx_in_slotcx as f64;
        let slot = if free == 0 {
            paired.log2()
        } else {
            // log2(paired + free * 2^s), factored to stay finite for large s
            p.n_subslots_in_slotcx as f64 + (free as f64 + paired * (-(p.n_subslots_in_slotcx as f64)).exp2()).log2()
        };
        bits += slot + (p.n_slot_cx as f64).log2();
    }
    if p.randomize_output {
        bits += p.n_qubits as f64;
    }
    Ok(bits)
}

/// Ratio of obfuscated to baseline duration.
pub fn depth_increase_factor(base: &ScheduledCircuit, obf: &ScheduledCircuit) -> Result<f64, AnalysisError> {
    if base.duration == 0 {
        return Err(AnalysisError::ZeroBaseDuration);
    }
    Ok(obf.duration as f64 / base.duration as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadParams {
    pub kem_decap_mw: f64,
    pub aead_mw: f64,
    pub per_switch_mw: f64,
    pub fridge_height_mm: f64,
    pub fridge_radius_mm: f64,
    pub per_switch_mm3: f64,
    pub logic_mm3: f64,
}

impl Default for OverheadParams {
    fn default() -> Self {
        OverheadParams {
            kem_decap_mw: 162.0,
            aead_mw: 19.52,
            per_switch_mw: 0.001,
            fridge_height_mm: 1481.0,
            fridge_radius_mm: 460.0,
            per_switch_mm3: 6.5,
            logic_mm3: 0.0,
        }
    }
}

impl OverheadParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let fields = [
            self.kem_decap_mw,
            self.aead_mw,
            self.per_switch_mw,
            self.fridge_height_mm,
            self.fridge_radius_mm,
            self.per_switch_mm3,
            self.logic_mm3,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AnalysisError::InvalidParams("overhead parameters must be finite and >= 0".into()));
        }
        if self.fridge_height_mm == 0.0 || self.fridge_radius_mm == 0.0 {
            return Err(AnalysisError::InvalidParams("fridge dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn fridge_volume_mm3(&self) -> f64 {
        PI * self.fridge_radius_mm * self.fridge_radius_mm * self.fridge_height_mm
    }
}

/// Truncates toward zero at two decimals.
pub fn truncate2(x: f64) -> f64 {
    // the epsilon absorbs representation error just below a boundary
    (x * 100.0 + 1e-9).floor() / 100.0
}

/// KEM decapsulation plus symmetric cipher plus per-switch power, truncated
/// to two decimals.
pub fn power_overhead_mw(n_switches: u64, p: &OverheadParams) -> Result<f64, AnalysisError> {
    p.validate()?;
    Ok(truncate2(p.kem_decap_mw + p.aead_mw + n_switches as f64 * p.per_switch_mw))
}

/// Share of the fridge volume taken by switches and logic, in percent.
pub fn volume_overhead_pct(n_switches: u64, p: &OverheadParams) -> Result<f64, AnalysisError> {
    p.validate()?;
    Ok(100.0 * (p.logic_mm3 + n_switches as f64 * p.per_switch_mm3) / p.fridge_volume_mm3())
}

/// One machine in the overhead table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineRow {
    pub name: String,
    pub qubits: u64,
    pub couplings: u64,
    /// Switch count as printed, where it differs from qubits + couplings.
    pub printed_switches: Option<u64>,
}

impl MachineRow {
    pub fn new(name: &str, qubits: u64, couplings: u64) -> Self {
        MachineRow { name: name.into(), qubits, couplings, printed_switches: None }
    }

    pub fn switches(&self, use_printed: bool) -> u64 {
        match self.printed_switches {
            Some(n) if use_printed => n,
            _ => self.qubits + self.couplings,
        }
    }
}

/// The six reference machines. Condor is printed with 2242 switches although
/// 1121 + 1186 = 2307.
pub fn reference_machines() -> Vec<MachineRow> {
    let mut condor = MachineRow::new("Condor", 1121, 1186);
    condor.printed_switches = Some(2242);
    vec![
        MachineRow::new("Falcon", 27, 28),
        MachineRow::new("Hummingbird", 65, 72),
        MachineRow::new("Eagle", 127, 144),
        MachineRow::new("Osprey", 433, 504),
        condor,
        MachineRow::new("Flamingo", 1386, 1387),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub name: String,
    pub qubits: u64,
    pub couplings: u64,
    pub switches: u64,
    pub power_mw: f64,
    pub volume_pct: f64,
}

pub fn overhead_table(
    rows: &[MachineRow],
    params: &OverheadParams,
    use_printed_switches: bool,
) -> Result<Vec<OverheadRow>, AnalysisError> {
    rows.iter()
        .map(|r| {
            let n = r.switches(use_printed_switches);
            Ok(OverheadRow {
                name: r.name.clone(),
                qubits: r.qubits,
                couplings: r.couplings,
                switches: n,
                power_mw: power_overhead_mw(n, params)?,
                volume_pct: volume_overhead_pct(n, params)?,
            })
        })
        .collect()
}

pub fn overhead_markdown(rows: &[OverheadRow]) -> String {
    let mut s = String::from("| Machine | Qubits | Couplings | RF switches | Power (mW) | Volume (%) |\n");
    s.push_str("|---|---:|---:|---:|---:|---:|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.2} | {:.5} |",
            r.name, r.qubits, r.couplings, r.switches, r.power_mw, r.volume_pct
        );
    }
    s
}
