use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(
        "power iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    Convergence { iterations: usize, residual: f64 },

    #[error("circular mean is undefined (resultant magnitude {resultant:e})")]
    UndefinedMean { resultant: f64 },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("invalid constellation order {0}: must be a power of two >= 2")]
    InvalidOrder(u32),

    #[error("wrong number of bits: expected {expected}, got {got}")]
    BitLength { expected: usize, got: usize },

    #[error("invalid frame size {0}: subcarrier count must be even and >= 2")]
    InvalidFrame(usize),

    #[error("invalid precoding weight {0}: must lie in (0, 1)")]
    InvalidWeight(f64),

    #[error("cyclic prefix insufficient: channel has {taps} taps, frame supports {supported}")]
    CpInsufficient { taps: usize, supported: usize },

    #[error("subcarrier {index} has a near-zero channel estimate")]
    SingularSubcarrier { index: usize },

    #[error("precoder Gram entry ({row}, {col}) = {value:e} is below the division guard")]
    GramSingularity { row: usize, col: usize, value: f64 },

    #[error("degenerate covariance: dominant eigenvalue {0:e} is not positive")]
    DegenerateCovariance(f64),

    #[error("phase ambiguity cannot be resolved: {0}")]
    AmbiguityUnresolvable(Box<Error>),

    #[error("pilot symbol has zero energy")]
    InvalidPilot,

    #[error("pilot index {index} out of range for {len} subcarriers")]
    PilotIndex { index: usize, len: usize },

    #[error("metric undefined: true channel has zero energy")]
    UndefinedMetric,

    #[error("covariance accumulator holds no blocks")]
    EmptyAccumulator,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("run {run} (snr {snr_db} dB, {n_blocks} blocks): {source}")]
    Run {
        run: usize,
        snr_db: f64,
        n_blocks: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
