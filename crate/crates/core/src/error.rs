use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("paraxial distance approximation invalid: correction {correction:.3} m exceeds 10% of D00 = {d_00} m")]
    ParaxialInvalid { correction: f64, d_00: f64 },
    #[error("transmission matrix is rank deficient (sigma_min = {sigma_min:.3e})")]
    RankDeficient { sigma_min: f64 },
    #[error("effective Gram matrix is singular")]
    Singular,
    #[error("phase {0} is not in the codebook")]
    NotInCodebook(f64),
    #[error("invalid one-hot vector: {0}")]
    InvalidOneHot(String),
    #[error("pair encoding inconsistent: a.(x - x') = {lhs}, a.y = {rhs}")]
    InconsistentPair { lhs: f64, rhs: f64 },
    #[error("array orientation is degenerate (cos theta_R * cos theta_B = 0)")]
    DegenerateOrientation,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Milp(#[from] ris_milp::MilpError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
