use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("map `{map}` produced a non-finite value at {point:?}")]
    NonFinite { map: String, point: Vec<f64> },

    #[error("map `{map}` has a non-finite Jacobian at {point:?}")]
    NonFiniteJacobian { map: String, point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown map `{0}`")]
    UnknownMap(String),

    #[error("jacobian is singular at {point:?}; the map is not a local diffeomorphism there")]
    NotLocalDiffeomorphism { point: Vec<f64> },

    #[error("mountain-pass precondition violated: {0}")]
    Precondition(String),

    #[error("weight undefined: the Banach-constant infimum vanishes on the shell of radius {radius}")]
    WeightUndefined { radius: f64 },

    #[error("report schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that come from evaluating a map rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NonFiniteJacobian { .. }
                | Error::NotLocalDiffeomorphism { .. }
                | Error::WeightUndefined { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
