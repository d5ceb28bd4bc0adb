use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("eigendecomposition did not converge (residual {residual:.3e})")]
    EigenNonConvergence { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a projector: {0}")]
    NotAProjector(String),

    #[error("Schmidt weights {first:.3e} and {second:.3e} are degenerate within {tolerance:.1e}")]
    Degenerate {
        first: f64,
        second: f64,
        tolerance: f64,
    },

    #[error("DHP undefined: fewer than two histories with nonzero probability")]
    UndefinedDhp,

    #[error("node {0} is not a live leaf")]
    NotALiveLeaf(usize),

    #[error("unknown moment identity `{0}`")]
    UnknownIdentity(String),

    #[error("percentile table is empty")]
    EmptyTable,

    #[error("percentile p = {0} is not present in the table")]
    MissingPercentile(f64),

    #[error("{samples} samples are insufficient for percentile {p} (need at least {needed})")]
    InsufficientSamples { samples: usize, p: f64, needed: usize },

    #[error("Schmidt weights stayed degenerate for {steps} consecutive steps (t = {t})")]
    PersistentDegeneracy { steps: usize, t: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNonConvergence { .. }
                | Error::Degenerate { .. }
                | Error::PersistentDegeneracy { .. }
                | Error::UndefinedDhp
        )
    }
}
