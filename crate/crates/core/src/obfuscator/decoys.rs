use rand::Rng;

use super::slots::{LaneEntry, Slot, SlotKind, SlottedCircuit};
use crate::bitmap::{Channel, ChannelLayout, InputBitmap};
use crate::circuit::{BackendDescriptor, Gate, Origin};

/// Decoy occupancy per channel and sub-slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoyMarks {
    layout: ChannelLayout,
    rows: Vec<Vec<bool>>,
}

impl DecoyMarks {
    pub fn new(layout: ChannelLayout, sub_slots: usize) -> Self {
        let rows = vec![vec![false; sub_slots]; layout.len()];
        DecoyMarks { layout, rows }
    }

    pub fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    pub fn sub_slots(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn get(&self, channel: usize, sub_slot: usize) -> bool {
        self.rows[channel][sub_slot]
    }

    pub fn mark(&mut self, channel: usize, sub_slot: usize) {
        self.rows[channel][sub_slot] = true;
    }

    pub fn count(&self) -> usize {
        self.rows.iter().flatten().filter(|&&b| b).count()
    }
}

fn lane_is_free(lane: &[LaneEntry]) -> bool {
    lane.iter().all(|e| matches!(e, LaneEntry::Virtual(_) | LaneEntry::Idle))
}

/// Replaces the first `span` idle entries of a free lane with a CX entry.
fn place_cx(lane: &mut Vec<LaneEntry>, entry: &LaneEntry, span: usize) {
    let first = lane.iter().position(|e| matches!(e, LaneEntry::Idle)).expect("free lane");
    lane.splice(first..first + span, [entry.clone()]);
}

fn random_single(q: usize, rng: &mut impl Rng) -> Gate {
    let g = if rng.gen::<bool>() { Gate::x(q) } else { Gate::sx(q) };
    g.with_origin(Origin::Decoy)
}

fn fill_slot(slot: &mut Slot, backend: &BackendDescriptor, rng: &mut impl Rng) {
    let sq = backend.sq_dur();
    if slot.kind == SlotKind::Cx {
        let mut placed = 0;
        for c in backend.couplings() {
            if !(lane_is_free(&slot.lanes[c.lo]) && lane_is_free(&slot.lanes[c.hi])) {
                continue;
            }
            if rng.gen::<bool>() {
                add_decoy_cx(slot, backend, c.lo, c.hi, sq);
                placed += 1;
            }
        }
        // a padding CX slot must look like a CX slot
        if slot.padding && placed == 0 && !backend.couplings().is_empty() {
            let c = backend.couplings()[rng.gen_range(0..backend.couplings().len())];
            add_decoy_cx(slot, backend, c.lo, c.hi, sq);
        }
    }
    for (q, lane) in slot.lanes.iter_mut().enumerate() {
        for entry in lane.iter_mut() {
            if matches!(entry, LaneEntry::Idle) {
                *entry = LaneEntry::Single(random_single(q, rng));
            }
        }
    }
}

fn add_decoy_cx(slot: &mut Slot, backend: &BackendDescriptor, lo: usize, hi: usize, sq: u64) {
    let duration = backend.cx_duration(lo, hi).expect("coupling from backend");
    let span = duration.div_ceil(sq) as usize;
    let entry = LaneEntry::Cx { gate: Gate::cx(lo, hi).with_origin(Origin::Decoy), span, duration };
    place_cx(&mut slot.lanes[lo], &entry, span);
    place_cx(&mut slot.lanes[hi], &entry, span);
}

/// Fills every idle sub-slot with a decoy and records where decoys sit.
///
/// Random draws happen slot by slot: in a CX slot, one coin per coupling
/// whose two qubits are both free (in sorted coupling order) decides on a
/// decoy CX; then every remaining idle sub-slot, qubit by qubit and sub-slot
/// by sub-slot, gets a decoy X or SX by a fair coin.
pub fn insert_decoys(
    slotted: &SlottedCircuit,
    backend: &BackendDescriptor,
    rng: &mut impl Rng,
) -> (SlottedCircuit, DecoyMarks) {
    let mut out = slotted.clone();
    for slot in &mut out.slots {
        fill_slot(slot, backend, rng);
    }
    let layout = ChannelLayout::for_backend(backend);
    let mut marks = DecoyMarks::new(layout, out.total_sub_slots());
    for (slot, start) in out.slots.iter().zip(out.offsets()) {
        for (q, lane) in slot.lanes.iter().enumerate() {
            let mut col = start;
            for entry in lane {
                match entry {
                    LaneEntry::Single(g) if g.origin == Origin::Decoy => marks.mark(q, col),
                    LaneEntry::Cx { gate, span, .. } if gate.origin == Origin::Decoy => {
                        let ctrl = Channel::Control(gate.qubits[0], gate.qubits[1]);
                        let ctrl = marks.layout.channel_index(ctrl).expect("decoy on a coupling");
                        for c in col..col + span {
                            marks.mark(q, c);
                            marks.mark(ctrl, c);
                        }
                    }
                    _ => {}
                }
                col += entry.width();
            }
        }
    }
    (out, marks)
}

pub fn generate_input_bitmap(marks: &DecoyMarks) -> InputBitmap {
    let mut bitmap = InputBitmap::zeros(marks.rows.len(), marks.sub_slots());
    for (c, row) in marks.rows.iter().enumerate() {
        for (j, &bit) in row.iter().enumerate() {
            if bit {
                bitmap.set(c, j, true);
            }
        }
    }
    bitmap
}
