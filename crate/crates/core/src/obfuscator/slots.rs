use crate::circuit::{Dt, Gate, GateKind, Origin, QuantumCircuit, Qubit, ScheduledCircuit};

use super::SlotPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    /// Contains at least one CX.
    Cx,
    /// Single-qubit gates only.
    Sq,
}

/// One item on a qubit's lane inside a slot.
#[derive(Debug, Clone, PartialEq)]
pub enum LaneEntry {
    /// Zero-width gate (RZ).
    Virtual(Gate),
    /// X, SX, or a one-sub-slot DELAY.
    Single(Gate),
    /// A CX spanning `span` sub-slots from this position. The same entry sits
    /// on both the control and the target lane.
    Cx { gate: Gate, span: usize, duration: Dt },
    /// An empty sub-slot, to be filled by a decoy.
    Idle,
}

impl LaneEntry {
    pub fn width(&self) -> usize {
        match self {
            LaneEntry::Virtual(_) => 0,
            LaneEntry::Single(_) | LaneEntry::Idle => 1,
            LaneEntry::Cx { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub kind: SlotKind,
    pub sub_slots: usize,
    /// One lane per qubit; the widths on each lane sum to `sub_slots`.
    pub lanes: Vec<Vec<LaneEntry>>,
    /// Inserted purely to lengthen the circuit; carries no user gate.
    pub padding: bool,
}

impl Slot {
    fn empty(kind: SlotKind, sub_slots: usize, n_qubits: usize) -> Self {
        Slot { kind, sub_slots, lanes: vec![Vec::new(); n_qubits], padding: false }
    }

    pub(crate) fn padding(kind: SlotKind, sub_slots: usize, n_qubits: usize) -> Self {
        Slot { kind, sub_slots, lanes: vec![vec![LaneEntry::Idle; sub_slots]; n_qubits], padding: true }
    }

    fn fill_idle(&mut self) {
        for lane in &mut self.lanes {
            let used: usize = lane.iter().map(LaneEntry::width).sum();
            debug_assert!(used <= self.sub_slots);
            // keep trailing virtual gates after the idle filler
            lane.extend(std::iter::repeat_n(LaneEntry::Idle, self.sub_slots - used));
        }
    }

    pub fn cx_count(&self, origin: Option<Origin>) -> usize {
        let n: usize = self
            .lanes
            .iter()
            .flatten()
            .filter(|e| matches!(e, LaneEntry::Cx { gate, .. } if origin.is_none_or(|o| gate.origin == o)))
            .count();
        n / 2
    }

    pub fn idle_count(&self) -> usize {
        self.lanes.iter().flatten().filter(|e| matches!(e, LaneEntry::Idle)).count()
    }
}

/// A circuit cut into fixed-length slots on the sub-slot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SlottedCircuit {
    pub n_qubits: usize,
    pub plan: SlotPlan,
    pub slots: Vec<Slot>,
    /// Terminal measurements in original order.
    pub measures: Vec<Gate>,
}

impl SlottedCircuit {
    pub fn total_sub_slots(&self) -> usize {
        self.slots.iter().map(|s| s.sub_slots).sum()
    }

    pub fn count(&self, kind: SlotKind) -> usize {
        self.slots.iter().filter(|s| s.kind == kind).count()
    }

    /// Column offset of each slot.
    pub fn offsets(&self) -> Vec<usize> {
        self.slots
            .iter()
            .scan(0, |acc, s| {
                let start = *acc;
                *acc += s.sub_slots;
                Some(start)
            })
            .collect()
    }

    /// Lowers the slots back to a flat gate list. Idle sub-slots become
    /// one-sub-slot DELAYs; each CX is followed by the DELAY that pads it to
    /// whole sub-slots. Measurements are not emitted.
    pub fn to_gates(&self) -> Vec<Gate> {
        let sq = self.plan.sub_slot;
        let mut out = Vec::new();
        for slot in &self.slots {
            let mut cursor = vec![0usize; self.n_qubits];
            loop {
                let mut progressed = false;
                for (q, lane) in slot.lanes.iter().enumerate() {
                    while let Some(entry) = lane.get(cursor[q]) {
                        match entry {
                            LaneEntry::Virtual(g) | LaneEntry::Single(g) => out.push(g.clone()),
                            LaneEntry::Idle => out.push(Gate::delay(q, sq).with_origin(Origin::Decoy)),
                            LaneEntry::Cx { .. } => break,
                        }
                        cursor[q] += 1;
                        progressed = true;
                    }
                }
                for q in 0..self.n_qubits {
                    let Some(LaneEntry::Cx { gate, span, duration }) = slot.lanes[q].get(cursor[q]) else {
                        continue;
                    };
                    let other = if gate.qubits[0] == q { gate.qubits[1] } else { gate.qubits[0] };
                    if slot.lanes[other].get(cursor[other]) != slot.lanes[q].get(cursor[q]) {
                        continue;
                    }
                    out.push(gate.clone());
                    let pad = *span as Dt * sq - duration;
                    if pad > 0 {
                        for &p in &gate.qubits {
                            out.push(Gate::delay(p, pad).with_origin(gate.origin));
                        }
                    }
                    cursor[q] += 1;
                    cursor[other] += 1;
                    progressed = true;
                }
                if !progressed {
                    break;
                }
            }
            debug_assert!(
                (0..self.n_qubits).all(|q| cursor[q] == slot.lanes[q].len()),
                "CX entries misaligned between lanes"
            );
        }
        out
    }
}

fn span_of(duration: Dt, sq: Dt) -> usize {
    duration.div_ceil(sq).max(1) as usize
}

/// Cuts a scheduled circuit into alternating single-qubit and CX slots.
///
/// Each CX is assigned to the earliest CX layer after every CX already seen
/// on its qubits; single-qubit gates go to the single-qubit group between
/// layers. A group that needs more sub-slots than one single-qubit slot holds
/// spills into further single-qubit slots. A group holding only RZ gates gets
/// no slot of its own: its gates ride at the front of the next CX slot.
pub fn split_into_slots(sched: &ScheduledCircuit, plan: &SlotPlan) -> SlottedCircuit {
    let circuit = &sched.circuit;
    let n = circuit.n_qubits();
    let sq = plan.sub_slot;

    let mut level = vec![0usize; n];
    let mut groups: Vec<Vec<Vec<LaneEntry>>> = vec![vec![Vec::new(); n]];
    let mut layers: Vec<Vec<(Gate, Dt)>> = Vec::new();
    let mut measures = Vec::new();

    for (i, gate) in circuit.gates().iter().enumerate() {
        match gate.kind {
            GateKind::X | GateKind::Sx => {
                groups[level[gate.qubits[0]]][gate.qubits[0]].push(LaneEntry::Single(gate.clone()))
            }
            GateKind::Rz(_) => groups[level[gate.qubits[0]]][gate.qubits[0]].push(LaneEntry::Virtual(gate.clone())),
            GateKind::Delay(d) => {
                let q = gate.qubits[0];
                for _ in 0..d.div_ceil(sq) {
                    let unit = Gate::delay(q, sq).with_origin(gate.origin);
                    groups[level[q]][q].push(LaneEntry::Single(unit));
                }
            }
            GateKind::Cx => {
                let (a, b) = (gate.qubits[0], gate.qubits[1]);
                let k = level[a].max(level[b]);
                if layers.len() <= k {
                    layers.resize_with(k + 1, Vec::new);
                    groups.resize_with(k + 2, || vec![Vec::new(); n]);
                }
                layers[k].push((gate.clone(), sched.durations[i]));
                level[a] = k + 1;
                level[b] = k + 1;
            }
            GateKind::Barrier => {
                let top = gate.qubits.iter().map(|&q| level[q]).max().unwrap_or(0);
                for &q in &gate.qubits {
                    level[q] = top;
                }
            }
            GateKind::Measure => measures.push(gate.clone()),
            GateKind::Opaque(_) => unreachable!("scheduled circuits are validated"),
        }
    }

    let sq_cap = plan.sq_slot_sub_slots();
    let cx_cap = plan.cx_slot_sub_slots();
    let mut slots: Vec<Slot> = Vec::new();
    let mut carried: Vec<Vec<LaneEntry>> = vec![Vec::new(); n];

    for (k, group) in groups.into_iter().enumerate() {
        let mut lanes = std::mem::replace(&mut carried, vec![Vec::new(); n]);
        for (lane, entries) in lanes.iter_mut().zip(group) {
            lane.extend(entries);
        }
        let demand = lanes.iter().map(|l| l.iter().map(LaneEntry::width).sum::<usize>()).max();
        let demand = demand.unwrap_or(0);
        if demand == 0 {
            carried = lanes;
        } else {
            let count = demand.div_ceil(sq_cap);
            let first = slots.len();
            slots.extend((0..count).map(|_| Slot::empty(SlotKind::Sq, sq_cap, n)));
            for (q, lane) in lanes.into_iter().enumerate() {
                let mut pos = 0usize;
                for entry in lane {
                    let s = (pos / sq_cap).min(count - 1);
                    pos += entry.width();
                    slots[first + s].lanes[q].push(entry);
                }
            }
            for slot in &mut slots[first..] {
                slot.fill_idle();
            }
        }
        if let Some(layer) = layers.get(k) {
            let mut slot = Slot::empty(SlotKind::Cx, cx_cap, n);
            slot.lanes = std::mem::replace(&mut carried, vec![Vec::new(); n]);
            for (gate, duration) in layer {
                let entry = LaneEntry::Cx { gate: gate.clone(), span: span_of(*duration, sq), duration: *duration };
                for &q in &gate.qubits {
                    slot.lanes[q].push(entry.clone());
                }
            }
            slot.fill_idle();
            slots.push(slot);
        }
    }

    if carried.iter().any(|l| !l.is_empty()) {
        match slots.last_mut() {
            Some(last) => {
                for (lane, extra) in last.lanes.iter_mut().zip(carried) {
                    lane.extend(extra);
                }
            }
            None => {
                let mut slot = Slot::empty(SlotKind::Sq, sq_cap, n);
                slot.lanes = carried;
                slot.fill_idle();
                slots.push(slot);
            }
        }
    }

    SlottedCircuit { n_qubits: n, plan: *plan, slots, measures }
}

/// Per-qubit occupancy check used by tests: every lane covers its slot.
pub fn lanes_are_full(slotted: &SlottedCircuit) -> bool {
    slotted.slots.iter().all(|s| s.lanes.iter().all(|l| l.iter().map(LaneEntry::width).sum::<usize>() == s.sub_slots))
}

/// Gate sequence (excluding idles) a lane holds, for order checks.
pub fn lane_gates(slotted: &SlottedCircuit, q: Qubit) -> Vec<Gate> {
    slotted
        .slots
        .iter()
        .flat_map(|s| s.lanes[q].iter())
        .filter_map(|e| match e {
            LaneEntry::Virtual(g) | LaneEntry::Single(g) | LaneEntry::Cx { gate: g, .. } => Some(g.clone()),
            LaneEntry::Idle => None,
        })
        .collect()
}

/// Emits a slotted circuit (with measurements) as a plain circuit.
pub fn slotted_to_circuit(slotted: &SlottedCircuit) -> QuantumCircuit {
    let gates = slotted.to_gates().into_iter().chain(slotted.measures.iter().cloned());
    QuantumCircuit::from_gates(slotted.n_qubits, gates).expect("slot lowering preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{schedule_asap, BackendDescriptor, BasisGate};
    use crate::obfuscator::{compute_slot_plan, Level};

    fn line3() -> BackendDescriptor {
        BackendDescriptor::new(
            "line3",
            3,
            [((0, 1), 704), ((1, 2), 640)],
            160,
            0.222,
            [BasisGate::Cx, BasisGate::Rz, BasisGate::Sx, BasisGate::X],
        )
        .unwrap()
    }

    fn split(gates: Vec<Gate>, level: Level) -> SlottedCircuit {
        let b = line3();
        let c = QuantumCircuit::from_gates(3, gates).unwrap();
        let plan = compute_slot_plan(&b, level).unwrap();
        split_into_slots(&schedule_asap(&c, &b).unwrap(), &plan)
    }

    fn kinds(s: &SlottedCircuit) -> Vec<SlotKind> {
        s.slots.iter().map(|s| s.kind).collect()
    }

    #[test]
    fn cx_is_fenced_by_single_qubit_slots() {
        let s = split(vec![Gate::x(0), Gate::cx(0, 1), Gate::x(1)], Level::Max);
        assert_eq!(kinds(&s), vec![SlotKind::Sq, SlotKind::Cx, SlotKind::Sq]);
        assert!(lanes_are_full(&s));
    }

    #[test]
    fn single_qubit_only_circuit_has_no_cx_slot() {
        let s = split(vec![Gate::x(0), Gate::sx(1), Gate::x(2)], Level::Quarter);
        assert_eq!(kinds(&s), vec![SlotKind::Sq]);
    }

    #[test]
    fn back_to_back_cx_have_no_slot_between() {
        let s = split(vec![Gate::cx(0, 1), Gate::cx(0, 1)], Level::Half);
        assert_eq!(kinds(&s), vec![SlotKind::Cx, SlotKind::Cx]);
        for slot in &s.slots {
            assert_eq!(slot.sub_slots, 6);
            assert_eq!(slot.cx_count(None), 1);
        }
    }

    #[test]
    fn parallel_cx_share_a_layer() {
        let b = BackendDescriptor::ibm_perth();
        let c = QuantumCircuit::from_gates(7, [Gate::cx(0, 1), Gate::cx(5, 6), Gate::cx(1, 2)]).unwrap();
        let plan = compute_slot_plan(&b, Level::Max).unwrap();
        let s = split_into_slots(&schedule_asap(&c, &b).unwrap(), &plan);
        assert_eq!(kinds(&s), vec![SlotKind::Cx, SlotKind::Cx]);
        assert_eq!(s.slots[0].cx_count(None), 2);
    }

    #[test]
    fn long_single_qubit_run_spills_into_extra_slots() {
        // quarter level on line3: two sub-slots per single-qubit slot
        let gates = vec![Gate::x(0), Gate::sx(0), Gate::x(0), Gate::cx(0, 1)];
        let s = split(gates, Level::Quarter);
        assert_eq!(kinds(&s), vec![SlotKind::Sq, SlotKind::Sq, SlotKind::Cx]);
        assert!(lanes_are_full(&s));
    }

    #[test]
    fn rz_only_group_rides_on_next_cx_slot() {
        let s = split(vec![Gate::cx(0, 1), Gate::rz(0, 0.3), Gate::cx(0, 1)], Level::Max);
        assert_eq!(kinds(&s), vec![SlotKind::Cx, SlotKind::Cx]);
        assert_eq!(s.slots[1].lanes[0][0], LaneEntry::Virtual(Gate::rz(0, 0.3)));
    }

    #[test]
    fn rz_only_circuit_gets_one_slot() {
        let s = split(vec![Gate::rz(2, 1.0)], Level::Max);
        assert_eq!(kinds(&s), vec![SlotKind::Sq]);
        assert!(lanes_are_full(&s));
        assert_eq!(lane_gates(&s, 2), vec![Gate::rz(2, 1.0)]);
    }

    #[test]
    fn empty_circuit_has_no_slots() {
        assert!(split(vec![], Level::Max).slots.is_empty());
    }

    #[test]
    fn lane_order_preserves_per_qubit_order() {
        let gates = vec![
            Gate::rz(0, 0.1),
            Gate::sx(0),
            Gate::cx(0, 1),
            Gate::x(2),
            Gate::cx(1, 2),
            Gate::rz(1, 0.2),
            Gate::sx(1),
            Gate::cx(0, 1),
        ];
        let c = QuantumCircuit::from_gates(3, gates.clone()).unwrap();
        let s = split(gates, Level::Half);
        for q in 0..3 {
            let expected: Vec<Gate> = c.gates().iter().filter(|g| g.qubits.contains(&q)).cloned().collect();
            assert_eq!(lane_gates(&s, q), expected, "qubit {q}");
        }
    }

    #[test]
    fn lowered_circuit_sits_on_the_grid() {
        let b = line3();
        let s = split(vec![Gate::x(0), Gate::cx(0, 1), Gate::sx(2), Gate::cx(1, 2)], Level::Half);
        let lowered = slotted_to_circuit(&s);
        let sched = schedule_asap(&lowered, &b).unwrap();
        assert_eq!(sched.duration, s.total_sub_slots() as u64 * 160);
        for (g, t) in lowered.gates().iter().zip(&sched.start_times) {
            if matches!(g.kind, GateKind::X | GateKind::Sx | GateKind::Cx) {
                assert_eq!(t % 160, 0, "{g} at {t}");
            }
        }
    }
}
