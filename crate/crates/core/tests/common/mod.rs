#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use qctee::circuit::{BackendDescriptor, Gate, QuantumCircuit};
use qctee::pipeline::load_corpus;

pub fn perth() -> BackendDescriptor {
    BackendDescriptor::ibm_perth()
}

pub fn corpus() -> Vec<(String, QuantumCircuit)> {
    load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/circuits")).unwrap()
}

/// A random circuit on qubits `0..n` of `backend`, with `n` in `qubits`,
/// at most `max_gates` gates before the measurements, and a non-empty set
/// of measured qubits.
pub fn random_circuit(
    seed: u64,
    backend: &BackendDescriptor,
    qubits: std::ops::RangeInclusive<usize>,
    max_gates: usize,
) -> QuantumCircuit {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = rng.gen_range(qubits);
    let couplings: Vec<(usize, usize)> =
        backend.couplings().iter().map(|c| (c.lo, c.hi)).filter(|&(a, b)| a < n && b < n).collect();
    let mut gates = Vec::new();
    for _ in 0..rng.gen_range(1..=max_gates) {
        let q = rng.gen_range(0..n);
        let g = match rng.gen_range(0..100) {
            0..=29 => Gate::sx(q),
            30..=49 => Gate::x(q),
            50..=69 => Gate::rz(q, rng.gen_range(-PI..PI)),
            70..=94 if !couplings.is_empty() => {
                let (a, b) = couplings[rng.gen_range(0..couplings.len())];
                if rng.gen() {
                    Gate::cx(a, b)
                } else {
                    Gate::cx(b, a)
                }
            }
            _ => Gate::delay(q, rng.gen_range(1..400)),
        };
        gates.push(g);
    }
    let mut measured: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
    if measured.is_empty() {
        measured.push(rng.gen_range(0..n));
    }
    gates.extend(measured.into_iter().map(Gate::measure));
    QuantumCircuit::from_gates(n, gates).unwrap()
}
