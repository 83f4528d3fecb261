//! Error type shared by the whole construction.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not an exact rational (expected `p` or `p/q` with q > 0): `{0}`")]
    Rational(String),
    #[error("truncation radius must be nonnegative, got {0}")]
    NegativeRadius(String),
    #[error("joined supports overlap at index {0}")]
    OverlappingSupports(u32),
    #[error("stage {stage} out of range (chain has {n_max} stages)")]
    StageOutOfRange { stage: usize, n_max: usize },
    #[error("vector is not supported on stage {stage} (index {index} is outside)")]
    SupportMismatch { stage: usize, index: u32 },
    #[error("stage sizes must be strictly increasing and positive")]
    NonIncreasingStages,
    #[error("coincident domain points at table positions {0} and {1}")]
    CoincidentPoints(usize, usize),
    #[error("extension row for index {gamma} redefines a coordinate of stage {stage}")]
    RowRedefinesOldCoordinate { gamma: u32, stage: usize },
    #[error("extension row targets index {gamma}, outside the increment of stage {stage}")]
    RowOutsideIncrement { gamma: u32, stage: usize },
    #[error("extension row for index {gamma} of stage {stage} has {got} coefficients, expected {expected}")]
    RowLength { gamma: u32, stage: usize, got: usize, expected: usize },
    #[error(
        "lambda_bar = {lambda_bar} is below the computed operator norm {norm} \
         (stage {stage}, composed row for index {gamma})"
    )]
    LambdaBelowNorm { lambda_bar: u32, norm: String, stage: usize, gamma: u32 },
    #[error("enumeration of {what} would produce {predicted} points, above the cap {cap}")]
    CapExceeded { what: String, predicted: String, cap: u64 },
    #[error("vector {0} is outside the identified range of the block")]
    OutsideIdentifiedRange(String),
    #[error("point {0} is not a realized point")]
    UnrealizedPoint(String),
    #[error("point {point} is not in {block}_{stage}")]
    NotInBlock { point: String, block: &'static str, stage: usize },
    #[error("index {index} out of range {what}")]
    IndexOutOfRange { what: String, index: usize },
    #[error("net parameter a must satisfy a > 1, got {0}")]
    NetParameter(String),
    #[error("separated grid exhausted: cluster needs {needed} points but the grid has {available}")]
    GridExhausted { needed: usize, available: String },
    #[error("molecule references point {0}, outside the metric space")]
    UnsupportedPoint(usize),
    #[error("pushforward map moves the base point")]
    BaseMoved,
    #[error("config error: {0}")]
    Config(String),
    #[error("internal consistency violation: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
