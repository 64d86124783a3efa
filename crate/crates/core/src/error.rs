use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid tour: {0}")]
    InvalidTour(String),

    #[error("permutation index {value} out of range for n = {n} (must be < {limit})")]
    IndexOutOfRange { value: u64, n: usize, limit: u64 },

    #[error("qubit index {index} out of range for a {qubits}-qubit register")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("register of {qubits} qubits exceeds the simulator limit of {limit}")]
    TooManyQubits { qubits: usize, limit: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("parameter vector has {got} angles, expected {expected}")]
    ParamLength { got: usize, expected: usize },

    #[error("qubit count mismatch: ansatz has {ansatz}, instance needs {instance}")]
    QubitMismatch { ansatz: usize, instance: usize },

    #[error("city count mismatch: model was trained for {model} cities, instance has {instance}")]
    CityMismatch { model: usize, instance: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective returned a non-finite value ({value}) at evaluation {evaluation}")]
    NonFiniteObjective { value: f64, evaluation: usize },

    #[error("malformed file {}: {reason}", path.display())]
    Malformed { path: PathBuf, reason: String },

    #[error("unsupported model version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure classes, used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Computation,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::NonFiniteObjective { .. } => ErrorClass::Computation,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
