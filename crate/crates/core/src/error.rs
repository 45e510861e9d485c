use thiserror::Error;

/// Errors raised by the numerical layers of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("qubit index {index} out of range for a {qubits}-qubit register")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("basis index {value} does not fit in {width} bits")]
    BasisIndexOverflow { value: u64, width: u32 },

    #[error("register of {requested} qubits exceeds the configured cap of {cap}")]
    RegisterCap { requested: usize, cap: usize },

    #[error("partial trace needs at least one kept qubit")]
    EmptyKeepSet,

    #[error("measurement outcome has zero probability")]
    ImpossibleOutcome,

    #[error("state is not normalized (norm deviation {0:e})")]
    NotNormalized(f64),

    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("process matrix has non-positive trace {0:e}")]
    NonPositiveTrace(f64),

    #[error("ancilla did not disentangle (fidelity with |0> is {0})")]
    AncillaEntangled(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unidentifiable model: tomography design spans rank {rank}, need {required}")]
    UnidentifiableModel { rank: usize, required: usize },

    #[error("dataset does not match design: {0}")]
    IncompleteDataset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
