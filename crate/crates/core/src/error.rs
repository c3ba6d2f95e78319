use alloc::string::String;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected {expected} bits, got {got}")]
    BitLength { expected: usize, got: usize },

    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),

    #[error("length mismatch: {what} has {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("alist parse error at line {line}: {msg}")]
    AlistParse { line: usize, msg: String },

    #[error("parity-check matrix has rank {rank} but {checks} checks are declared")]
    RankDeficient { rank: usize, checks: usize },

    #[error("infeasible code parameters: {0}")]
    InfeasibleCode(String),

    #[error("malformed generator matrix: {0}")]
    Generator(String),

    #[error("invalid codebook: {0}")]
    Codebook(String),

    #[error("empty input sequence")]
    EmptySequence,

    #[error("all-zero prior at trellis step {0}")]
    ZeroPrior(usize),

    #[error("quantizer cells do not tile the plane: {0}")]
    Tiling(String),

    #[error(
        "no feasible grid point; best infeasible candidate #{index} \
         (objective {objective:.4}, constraint {lhs:.4} > {rhs:.4})"
    )]
    NoFeasiblePoint {
        index: usize,
        objective: f64,
        lhs: f64,
        rhs: f64,
    },

    #[error("no available code rate fits level {level} (mutual information {mi:.4}, margin {margin})")]
    NoRateFits { level: usize, mi: f64, margin: f64 },

    #[error("Lloyd-Max iteration produced an empty cell {0}")]
    EmptyCell(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite message detected in {0}")]
    NonFinite(&'static str),

    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),
}
