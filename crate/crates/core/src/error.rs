use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("weight is singular: {0}")]
    Singularity(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("missing capability: {0}")]
    Capability(String),
    #[error("bubble ansatz rejected: {0}")]
    Ansatz(String),
    #[error("continuation needs a new parameterization: {0}")]
    Reparameterize(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate pair: {0}")]
    DegeneratePair(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("peak sits on the patch boundary: {0}")]
    PatchSize(String),
}

impl Error {
    /// True for failures of an iterative method, as opposed to bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::Convergence(_) | Error::Reparameterize(_) | Error::Numerical(_)
        )
    }
}
