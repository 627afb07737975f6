use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("point outside the domain of chart `{0}`")]
    OutsideDomain(String),
    #[error("amplitude `{1}` is not registered for action `{0}`")]
    UnregisteredAmplitude(String, String),
    #[error("non-smooth point: {0}")]
    Domain(String),
    #[error("not a critical point: gradient norm {0:e}")]
    NotCritical(f64),
    #[error("degenerate transversal Hessian: rank {rank}, expected {expected}")]
    DegenerateTransversal { rank: usize, expected: usize },
    #[error("weak transform Hessian is rank deficient: rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("grid resolution {have} below the oscillation rule ({need} required)")]
    ResolutionInsufficient { have: usize, need: usize },
    #[error("quadrature did not converge: successive values differ by {0:e}")]
    NonConvergence(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
