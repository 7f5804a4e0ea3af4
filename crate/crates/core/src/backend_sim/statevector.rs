use num_complex::Complex64 as C;

use crate::circuit::Qubit;

pub const MAX_QUBITS: usize = 12;

type M2 = [[C; 2]; 2];

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// A unitary acting on one or two qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    X(Qubit),
    Sx(Qubit),
    Rz(Qubit, f64),
    Rx(Qubit, f64),
    /// `e^{i phase} RX(theta)`.
    PhasedRx {
        q: Qubit,
        theta: f64,
        phase: f64,
    },
    Cx(Qubit, Qubit),
    /// Controlled `e^{i phase} RX(theta)`.
    CRx {
        c: Qubit,
        t: Qubit,
        theta: f64,
        phase: f64,
    },
    /// `exp(-i theta/2 Z_c X_t)`.
    Rzx {
        c: Qubit,
        t: Qubit,
        theta: f64,
    },
    /// Pauli error: 1 = X, 2 = Y, 3 = Z.
    Pauli(Qubit, u8),
}

impl Op {
    pub fn qubits(&self) -> (Qubit, Option<Qubit>) {
        match *self {
            Op::X(q) | Op::Sx(q) | Op::Rz(q, _) | Op::Rx(q, _) | Op::Pauli(q, _) => (q, None),
            Op::PhasedRx { q, .. } => (q, None),
            Op::Cx(c, t) | Op::CRx { c, t, .. } | Op::Rzx { c, t, .. } => (c, Some(t)),
        }
    }

    /// Same op on relabelled qubits.
    pub fn remap(self, f: impl Fn(Qubit) -> Qubit) -> Op {
        match self {
            Op::X(q) => Op::X(f(q)),
            Op::Sx(q) => Op::Sx(f(q)),
            Op::Rz(q, a) => Op::Rz(f(q), a),
            Op::Rx(q, a) => Op::Rx(f(q), a),
            Op::Pauli(q, p) => Op::Pauli(f(q), p),
            Op::PhasedRx { q, theta, phase } => Op::PhasedRx { q: f(q), theta, phase },
            Op::Cx(c, t) => Op::Cx(f(c), f(t)),
            Op::CRx { c, t, theta, phase } => Op::CRx { c: f(c), t: f(t), theta, phase },
            Op::Rzx { c, t, theta } => Op::Rzx { c: f(c), t: f(t), theta },
        }
    }
}

fn rx(theta: f64) -> M2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C::new(c, 0.0), C::new(0.0, -s)], [C::new(0.0, -s), C::new(c, 0.0)]]
}

fn scale(m: M2, z: C) -> M2 {
    [[m[0][0] * z, m[0][1] * z], [m[1][0] * z, m[1][1] * z]]
}

fn pauli(p: u8) -> M2 {
    let i = C::new(0.0, 1.0);
    match p {
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, -i], [i, ZERO]],
        _ => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Dense state of up to [`MAX_QUBITS`] qubits; qubit `q` is bit `q` of the
/// basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C>,
}

impl StateVector {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "{n} qubits exceeds the simulator limit");
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        StateVector { n, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn copy_from(&mut self, other: &StateVector) {
        self.n = other.n;
        self.amps.clone_from(&other.amps);
    }

    fn apply_1q(&mut self, q: Qubit, m: &M2) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    /// Applies `m0` to `t` where `c` is 0 and `m1` where `c` is 1.
    fn apply_conditional(&mut self, c: Qubit, t: Qubit, m0: Option<&M2>, m1: &M2) {
        let (cb, tb) = (1usize << c, 1usize << t);
        for i in 0..self.amps.len() {
            if i & tb != 0 {
                continue;
            }
            let m = if i & cb != 0 {
                m1
            } else if let Some(m0) = m0 {
                m0
            } else {
                continue;
            };
            let (a, b) = (self.amps[i], self.amps[i | tb]);
            self.amps[i] = m[0][0] * a + m[0][1] * b;
            self.amps[i | tb] = m[1][0] * a + m[1][1] * b;
        }
    }

    pub fn apply(&mut self, op: &Op) {
        match *op {
            Op::X(q) => {
                let bit = 1usize << q;
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        self.amps.swap(i, i | bit);
                    }
                }
            }
            Op::Sx(q) => {
                let (p, m) = (C::new(0.5, 0.5), C::new(0.5, -0.5));
                self.apply_1q(q, &[[p, m], [m, p]]);
            }
            Op::Rz(q, theta) => {
                let m = [[C::from_polar(1.0, -theta / 2.0), ZERO], [ZERO, C::from_polar(1.0, theta / 2.0)]];
                self.apply_1q(q, &m);
            }
            Op::Rx(q, theta) => self.apply_1q(q, &rx(theta)),
            Op::PhasedRx { q, theta, phase } => self.apply_1q(q, &scale(rx(theta), C::from_polar(1.0, phase))),
            Op::Pauli(q, p) => self.apply_1q(q, &pauli(p)),
            Op::Cx(c, t) => {
                let (cb, tb) = (1usize << c, 1usize << t);
                for i in 0..self.amps.len() {
                    if i & cb != 0 && i & tb == 0 {
                        self.amps.swap(i, i | tb);
                    }
                }
            }
            Op::CRx { c, t, theta, phase } => {
                let m = scale(rx(theta), C::from_polar(1.0, phase));
                self.apply_conditional(c, t, None, &m);
            }
            Op::Rzx { c, t, theta } => {
                self.apply_conditional(c, t, Some(&rx(theta)), &rx(-theta));
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}
