use thiserror::Error;

/// Errors shared across mesh construction, configuration checks, solves and
/// verification. Domain errors (bad input data) are distinguished from
/// resource/convergence failures so the CLI can map them to exit codes.
#[derive(Debug, Error)]
pub enum MgError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The prescribed singularity set violates the strict spacelike condition
    /// |t_i - t_j| < dist(p_i, p_j). Carries the offending pair (by index in
    /// the configuration), the measured surface distance and the height gap.
    #[error("configuration is not spacelike: singularities #{i} and #{j} have height gap {gap:.6} \
             but surface distance {dist:.6} (needs gap < {margin_frac:.2} * dist)")]
    NotSpacelike {
        i: usize,
        j: usize,
        gap: f64,
        dist: f64,
        margin_frac: f64,
    },

    /// A field handed to an operation that requires |grad u| <= 1 fails the
    /// bound on some triangle.
    #[error("field is not weakly spacelike: |grad u| = {grad:.9} on triangle {triangle}")]
    NotWeaklySpacelike { triangle: usize, grad: f64 },

    #[error("mesh resolution exceeded: {0}")]
    ResolutionExceeded(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl MgError {
    /// True for errors caused by the problem data rather than by resource or
    /// iteration limits.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            MgError::InvalidConfig(_)
                | MgError::NotSpacelike { .. }
                | MgError::NotWeaklySpacelike { .. }
                | MgError::InvalidTopology(_)
                | MgError::Format(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, MgError>;
