use thiserror::Error;

/// Errors for carrier simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("register of {requested} qubits exceeds the cap of {cap}")]
    RegisterCap { requested: usize, cap: usize },

    #[error("amplitude vector has length {got}, expected {expected}")]
    AmplitudeLength { expected: usize, got: usize },

    #[error("state vector norm is {norm}, expected 1")]
    NotNormalized { norm: f64 },

    #[error("matrix is {rows}x{cols}, expected square power-of-two dimensions")]
    BadShape { rows: usize, cols: usize },

    #[error("not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected 1")]
    BadTrace { trace: f64 },

    #[error("not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("target qubit {target} out of range for {n_qubits} qubits")]
    TargetOutOfRange { target: usize, n_qubits: usize },

    #[error("duplicate target qubit {target}")]
    DuplicateTarget { target: usize },

    #[error("partial trace requires a nonempty set of kept qubits")]
    EmptyKeep,

    #[error("duplicate register label {label}")]
    DuplicateLabel { label: String },

    #[error("layout is missing required role {role}")]
    MissingRole { role: String },

    #[error("need at least {min} parties, got {got}")]
    TooFewParties { min: usize, got: usize },

    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("kick sample set is empty")]
    EmptyKickSet,

    #[error("invalid kick weights: {reason}")]
    InvalidKickWeights { reason: String },

    #[error("kick file: {reason}")]
    KickFile { reason: String },

    #[error("kick noise has no direct Pauli mixture; convert with p_from_kicks first")]
    KicksNotDirectlySupported,

    #[error("invalid Pauli mixture: {reason}")]
    InvalidMixture { reason: String },

    #[error("protocol config: {reason}")]
    BadConfig { reason: String },

    #[error("trial count must be at least 1")]
    NoTrials,

    #[error("channel reconstruction is inconsistent: {detail}")]
    ChannelConsistency { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
