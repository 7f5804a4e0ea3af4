use super::{BackendDescriptor, Dt, GateKind, QuantumCircuit};
use crate::error::ValidationError;

/// A circuit with an as-soon-as-possible start time for every gate.
///
/// X, SX and CX start on the sub-slot grid (multiples of `sq_dur`); RZ,
/// MEASURE and BARRIER take no time; DELAY starts at the qubit frontier.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledCircuit {
    pub circuit: QuantumCircuit,
    pub start_times: Vec<Dt>,
    pub durations: Vec<Dt>,
    pub duration: Dt,
    pub sq_dur: Dt,
}

impl ScheduledCircuit {
    pub fn end_time(&self, gate_index: usize) -> Dt {
        self.start_times[gate_index] + self.durations[gate_index]
    }

    /// Duration rounded up to whole sub-slots.
    pub fn sub_slots(&self) -> u64 {
        self.duration.div_ceil(self.sq_dur)
    }
}

fn align_up(t: Dt, quantum: Dt) -> Dt {
    t.div_ceil(quantum) * quantum
}

pub fn schedule_asap(
    circuit: &QuantumCircuit,
    backend: &BackendDescriptor,
) -> Result<ScheduledCircuit, ValidationError> {
    backend.validate(circuit)?;
    let sq = backend.sq_dur();
    let mut frontier = vec![0 as Dt; circuit.n_qubits()];
    let mut start_times = Vec::with_capacity(circuit.len());
    let mut durations = Vec::with_capacity(circuit.len());
    let mut duration = 0;
    for gate in circuit.gates() {
        let qs = &gate.qubits;
        let ready = qs.iter().map(|&q| frontier[q]).max().unwrap_or(0);
        let (start, dur) = match gate.kind {
            GateKind::X | GateKind::Sx | GateKind::Cx => (align_up(ready, sq), backend.gate_duration(gate)),
            GateKind::Delay(d) => (ready, d),
            GateKind::Barrier => (ready, 0),
            // zero-duration, does not move the frontier
            GateKind::Rz(_) | GateKind::Measure | GateKind::Opaque(_) => {
                start_times.push(ready);
                durations.push(0);
                continue;
            }
        };
        for &q in qs {
            frontier[q] = start + dur;
        }
        duration = duration.max(start + dur);
        start_times.push(start);
        durations.push(dur);
    }
    Ok(ScheduledCircuit { circuit: circuit.clone(), start_times, durations, duration, sq_dur: sq })
}

/// Total length in `dt`; zero for an empty circuit.
pub fn circuit_duration(sched: &ScheduledCircuit) -> Dt {
    sched.duration
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{BasisGate, Gate};

    fn backend() -> BackendDescriptor {
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

    fn sched(n: usize, gates: Vec<Gate>) -> ScheduledCircuit {
        schedule_asap(&QuantumCircuit::from_gates(n, gates).unwrap(), &backend()).unwrap()
    }

    #[test]
    fn empty_circuit_has_zero_duration() {
        assert_eq!(circuit_duration(&sched(2, vec![])), 0);
    }

    #[test]
    fn single_x() {
        let s = sched(1, vec![Gate::x(0)]);
        assert_eq!(s.start_times, vec![0]);
        assert_eq!(circuit_duration(&s), 160);
    }

    #[test]
    fn sequential_x_on_one_qubit() {
        let s = sched(1, vec![Gate::x(0), Gate::x(0)]);
        assert_eq!(s.start_times, vec![0, 160]);
        assert_eq!(circuit_duration(&s), 320);
    }

    #[test]
    fn disjoint_qubits_run_in_parallel() {
        let s = sched(2, vec![Gate::x(0), Gate::x(1)]);
        assert_eq!(s.start_times, vec![0, 0]);
        assert_eq!(s.duration, 160);
    }

    #[test]
    fn single_cx_uses_coupling_duration() {
        assert_eq!(circuit_duration(&sched(2, vec![Gate::cx(0, 1)])), 704);
    }

    #[test]
    fn rz_does_not_advance_frontier() {
        let s = sched(1, vec![Gate::rz(0, 1.0), Gate::x(0), Gate::rz(0, 1.0), Gate::x(0)]);
        assert_eq!(s.start_times, vec![0, 0, 160, 160]);
        assert_eq!(s.duration, 320);
    }

    #[test]
    fn sub_slot_gates_realign_after_cx() {
        let s = sched(2, vec![Gate::cx(0, 1), Gate::x(0)]);
        assert_eq!(s.start_times, vec![0, 800]);
        assert_eq!(s.duration, 960);
    }

    #[test]
    fn barrier_synchronizes_listed_qubits() {
        let s = sched(3, vec![Gate::x(0), Gate::x(0), Gate::barrier(vec![0, 1]), Gate::x(1), Gate::x(2)]);
        assert_eq!(s.start_times, vec![0, 160, 320, 320, 0]);
    }

    #[test]
    fn delay_occupies_its_duration() {
        let s = sched(1, vec![Gate::delay(0, 100), Gate::x(0)]);
        assert_eq!(s.start_times, vec![0, 160]);
        assert_eq!(s.duration, 320);
    }
}
