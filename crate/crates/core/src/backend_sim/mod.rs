//! The trusted backend in software: bitmap memory and switch control, an
//! RF-switch attenuation model, and a statevector executor with optional
//! stochastic Pauli noise.

mod engine;
mod job;
mod model;
mod statevector;

pub use engine::{MemoryState, QcTeeEngine, Tick};
pub use job::{
    baseline_distribution, execute_job, simulate_exact, JobMetadata, JobOptions, JobResult, JobSettings, PreparedJob,
};
pub use model::{effective_gate, Effective, NoiseModel, Setting, SwitchModel};
pub use statevector::{Op, StateVector, MAX_QUBITS};

use thiserror::Error;

use crate::bitmap::BitmapError;
use crate::envelope::EnvelopeError;
use crate::error::ValidationError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("engine is tampered; memory zeroized")]
    Tampered,
    #[error("no input bitmap loaded")]
    NoBitmap,
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Bitmap(#[from] BitmapError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("sub-slot {sub_slot} out of range for {n} columns")]
    SubSlotOutOfRange { sub_slot: usize, n: usize },
    #[error("{n} qubits exceeds the limit of {max}")]
    TooManyQubits { n: usize, max: usize },
    #[error("circuit and bitmap disagree: {0}")]
    Desync(String),
    #[error("{0}")]
    InvalidModel(String),
}
