use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one residual {0:.3e})")]
    Infeasible(f64),
    #[error("linear program is unbounded along variable {0}")]
    Unbounded(usize),
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("basis matrix became singular during refactorization")]
    SingularBasis,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MilpError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("malformed model: {0}")]
    Malformed(String),
}
