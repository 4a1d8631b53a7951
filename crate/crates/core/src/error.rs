use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("label `{0}` not found")]
    LabelMismatch(String),
    #[error("orientation mismatch on `{0}`/`{1}`: contraction must pair a ket with a bra")]
    OrientationMismatch(String, String),
    #[error("extent mismatch on `{0}`/`{1}`: {2} vs {3}")]
    ExtentMismatch(String, String, usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("resource cap exceeded for {what}: need {needed}, cap {cap}")]
    ResourceCap {
        what: String,
        needed: usize,
        cap: usize,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("representation is not semi-regular")]
    NotSemiRegular,
    #[error("tensor is not G-isometric")]
    NotIsometric,
    #[error("explicit irrep matrices unavailable for this group")]
    IrrepsUnavailable,
    #[error("unknown irrep label `{0}`")]
    UnknownIrrep(String),
    #[error("paths are not homotopic: {0}")]
    NonHomotopic(String),
    #[error("region is not topologically trivial: {0}")]
    NonTrivialRegion(String),
    #[error("target plaquette is not adjacent to the current endpoint")]
    NotAdjacent,
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn cap(what: impl Into<String>, needed: usize, cap: usize) -> Self {
        Error::ResourceCap {
            what: what.into(),
            needed,
            cap,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
