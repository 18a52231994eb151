use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown gate label `{0}`")]
    UnknownGate(String),

    #[error("layer {layer}: gates overlap on qubit {qubit}")]
    OverlappingGates { layer: usize, qubit: usize },

    #[error("layer {layer}: CNOT on ({a}, {b}) is not an edge of graph {graph}")]
    GateOnNonEdge {
        layer: usize,
        a: usize,
        b: usize,
        graph: String,
    },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid Pauli string `{0}`")]
    InvalidPauli(String),

    #[error("circuit is not definite-outcome: backward-propagated Z{qubit} is {image}")]
    NotDefiniteOutcome { qubit: usize, image: String },

    #[error("width {width} out of range 1..={max}")]
    WidthOutOfRange { width: usize, max: usize },

    #[error("width {width} exceeds the exact-simulation cap of {cap} qubits")]
    WidthOverCap { width: usize, cap: usize },

    #[error("error generator {0} is not in the tracked set")]
    GeneratorNotTracked(String),

    #[error("circuit depth {depth} exceeds d_max = {d_max}")]
    DepthExceedsMax { depth: usize, d_max: usize },

    #[error("no value supplied for circuit `{0}`")]
    MissingValue(String),

    #[error("record `{0}` has no shot counts")]
    MissingShots(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("series is constant; Pearson correlation is undefined")]
    ConstantSeries,

    #[error("need at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },

    #[error("{path}:{line}: {msg}")]
    Schema {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: unsupported schema version {found} (expected {expected})")]
    VersionMismatch {
        path: String,
        found: u64,
        expected: u64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool: 3 for numerical failures,
    /// 2 for everything else (validation, usage, I/O).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::ConstantSeries => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
