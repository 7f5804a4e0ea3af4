use super::ObfuscationError;
use crate::bitmap::{ChannelLayout, InputBitmap};
use crate::circuit::{schedule_asap, BackendDescriptor, GateKind, QuantumCircuit};

/// Clears the bitmap bits of decoy runs that compose to the identity.
///
/// On each drive channel, consecutive attenuated gates in adjacent sub-slots
/// are matched greedily from the left: four SX first, then two X. Any other
/// gate on the qubit in between, RZ included, breaks the run. Executing such
/// a run instead of attenuating it leaves the circuit's unitary unchanged up
/// to global phase. The randomize-output column is never touched.
pub fn convert_decoys_to_identity(
    circuit: &QuantumCircuit,
    bitmap: &InputBitmap,
    backend: &BackendDescriptor,
) -> Result<InputBitmap, ObfuscationError> {
    let sched = schedule_asap(circuit, backend)?;
    let m = ChannelLayout::for_backend(backend).len();
    let n = sched.sub_slots() as usize;
    if bitmap.m() != m || bitmap.n() != n {
        return Err(ObfuscationError::BitmapShape {
            expected_m: m,
            expected_n: n,
            found_m: bitmap.m(),
            found_n: bitmap.n(),
        });
    }
    let limit = if bitmap.randomized_output() { n.saturating_sub(1) } else { n };
    let sq = backend.sq_dur();

    // (kind, column) of every attenuated X/SX, None for anything else
    let mut lanes: Vec<Vec<Option<(bool, usize)>>> = vec![Vec::new(); circuit.n_qubits()];
    for (gate, &t) in circuit.gates().iter().zip(&sched.start_times) {
        if gate.kind == GateKind::Barrier {
            continue;
        }
        let item = match gate.kind {
            GateKind::X | GateKind::Sx => {
                let col = (t / sq) as usize;
                let q = gate.qubits[0];
                (col < limit && bitmap.get(q, col)).then_some((gate.kind == GateKind::X, col))
            }
            _ => None,
        };
        for &q in &gate.qubits {
            lanes[q].push(item);
        }
    }

    let mut out = bitmap.clone();
    for (q, lane) in lanes.iter().enumerate() {
        let run = |i: usize, len: usize, is_x: bool| -> Option<usize> {
            let (_, c0) = (*lane.get(i)?)?;
            for k in 0..len {
                match *lane.get(i + k)? {
                    Some((x, c)) if x == is_x && c == c0 + k => {}
                    _ => return None,
                }
            }
            Some(c0)
        };
        let mut i = 0;
        while i < lane.len() {
            let hit = run(i, 4, false).map(|c| (c, 4)).or_else(|| run(i, 2, true).map(|c| (c, 2)));
            match hit {
                Some((c0, len)) => {
                    for c in c0..c0 + len {
                        out.set(q, c, false);
                    }
                    i += len;
                }
                None => i += 1,
            }
        }
    }
    Ok(out)
}
