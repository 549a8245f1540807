use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} is out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("qubit index {0} appears more than once in the target list")]
    DuplicateQubit(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("memory budget exceeded: {what} needs {required} bytes but only {available} bytes are available")]
    BudgetExceeded {
        what: String,
        required: u128,
        available: u128,
    },

    #[error("enumeration budget exceeded: {what} has {count} elements, limit is {limit}")]
    EnumerationBudget { what: String, count: u128, limit: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("tuple is not in the Good set: {0}")]
    NotGood(String),

    #[error("recombination is ambiguous: {0} distinct Good preimages share this multiset")]
    AmbiguousRecombination(usize),

    #[error("recombination failed: no consistent pairing of the multiset")]
    Unmatched,

    #[error("witness has no U_x for x = {0}")]
    MissingWitness(usize),

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
