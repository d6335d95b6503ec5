use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degree {requested} exceeds the configured cap {cap}")]
    Resource { requested: usize, cap: usize },

    #[error("design matrix is rank deficient (A = 0): {0}")]
    RankDeficient(String),

    #[error("kernel Gram matrix is numerically singular (duplicate or near-duplicate points?)")]
    SingularGram,

    #[error("requested tolerance {requested:e} unreachable: best certified tail is {achievable:e} at stored degree {stored}")]
    TolUnreachable {
        requested: f64,
        achievable: f64,
        stored: usize,
    },

    #[error("tail of the coefficient sequence is not certifiable: {0}")]
    TailNotCertifiable(String),

    #[error("worst-case error budget violated: e^2 = {e_sq:e} below -10x the tail budget {budget:e}")]
    NegativeErrorSquare { e_sq: f64, budget: f64 },

    #[error("jitter angle {0} too large; rotations of half a turn or more cannot keep a sampling family certified")]
    JitterTooLarge(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
