use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    InputShape(String),
    #[error("near-singular operator: {0}")]
    NearSingular(String),
    #[error("algebra generation did not stabilize after {0} rounds")]
    NonStabilizing(usize),
    #[error("not a subalgebra: {0}")]
    NotSubalgebra(String),
    #[error("degenerate spectrum after {0} retries")]
    DegenerateSpectrum(usize),
    #[error("not a projection: {0}")]
    NotProjection(String),
    #[error("projection is not full: {0}")]
    NotFull(String),
    #[error("inconsistent spanning relations, residual {0:.3e}")]
    InconsistentSpan(f64),
    #[error("bad projection: {0}")]
    BadProjection(String),
    #[error("Watatani index is not in the subalgebra")]
    IndexNotInSubalgebra,
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
    #[error("axiom violated: {0}")]
    AxiomViolation(String),
    #[error("no finite frame found: {0}")]
    FrameNotFound(String),
    #[error("condition (*) fails, violation {0:.3e}")]
    StarCondition(f64),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
