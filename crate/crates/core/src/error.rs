use thiserror::Error;

/// Errors raised by oracles, proximal maps, subsolvers and the outer solvers.
///
/// Out-of-domain probes during line searches are *not* errors: they surface
/// as `+inf` objective values. The variants below are contract violations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("point is outside the domain of the smooth part")]
    OutOfDomain,

    #[error("iterate left the domain: {0}")]
    DomainEscape(String),

    #[error("oracle inconsistency: {0}")]
    OracleConsistency(String),

    #[error("Hessian system is rank deficient at pivot {pivot}")]
    RankDeficient { pivot: usize },

    #[error("Hessian solve is not available for this oracle")]
    SolveUnavailable,

    #[error("subsolver failed after {iters} iterations (residual {residual:e})")]
    SubsolverFailure { iters: usize, residual: f64 },

    #[error("metric is not positive definite: {0}")]
    IndefiniteMetric(String),

    #[error("step-size condition not met after halvings (lambda {lambda:e}, beta {beta:e}, L {l:e})")]
    StepCondition { lambda: f64, beta: f64, l: f64 },

    #[error("curvature condition y'z > 0 violated ({0:e})")]
    Curvature(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
