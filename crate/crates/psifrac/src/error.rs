use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("gamma pole: x = {0} is a non-positive integer")]
    GammaPole(f64),

    #[error("series did not converge within {terms} terms (last term {last:e})")]
    Convergence { terms: usize, last: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("missing derivative: {0}")]
    MissingDerivative(String),

    #[error("evaluation point too close to the terminal singularity: \
             psi-distance {dist:e} < guard {guard:e}")]
    SingularGuard { dist: f64, guard: f64 },

    #[error("no sign change of the target function on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("iteration limit {0} reached before convergence")]
    MaxIter(usize),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdent(String),

    #[error("unbound variable `{0}`")]
    Unbound(String),

    #[error("not differentiable: {0}")]
    NonDifferentiable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
