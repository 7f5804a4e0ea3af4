use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::backend_sim::EngineError;
use crate::bitmap::BitmapError;
use crate::circuit::{CircuitError, QasmError, Qubit};
use crate::envelope::EnvelopeError;
use crate::obfuscator::ObfuscationError;
use crate::recover::RecoverError;

/// Rejection of a circuit or backend descriptor.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("qubit {qubit} does not exist on a {n_qubits}-qubit backend")]
    QubitOutOfRange { qubit: Qubit, n_qubits: usize },
    #[error("gate #{index} `{gate}` is not in the backend basis")]
    KindNotInBasis { gate: String, index: usize },
    #[error("gate #{index} cx q[{control}],q[{target}] is not on a backend coupling")]
    UncoupledCx { control: Qubit, target: Qubit, index: usize },
    #[error("invalid backend descriptor: {0}")]
    Backend(String),
}

/// Error type for the pipeline driver; every variant carries the tag of the
/// module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("circuit-ir: {0}")]
    Qasm(#[from] QasmError),
    #[error("circuit-ir: {0}")]
    Circuit(#[from] CircuitError),
    #[error("circuit-ir: {0}")]
    Validation(#[from] ValidationError),
    #[error("obfuscator: {0}")]
    Obfuscation(#[from] ObfuscationError),
    #[error("bitmap-codec: {0}")]
    Bitmap(#[from] BitmapError),
    #[error("secure-envelope: {0}")]
    Envelope(#[from] EnvelopeError),
    #[error("backend-sim: {0}")]
    Engine(#[from] EngineError),
    #[error("client-recover: {0}")]
    Recover(#[from] RecoverError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
