use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("sample resolvent is singular at E = {energy} (smallest singular value {sigma_min:.3e})")]
    SingularMatrix { energy: f64, sigma_min: f64 },

    #[error("spectral condition violated: {0} bound state(s) or real resonance(s) found")]
    SpectralViolation(usize),

    #[error("quadrature did not reach tolerance {tol:.1e} on [{a}, {b}] (estimate {estimate:.3e})")]
    QuadratureFailure { a: f64, b: f64, tol: f64, estimate: f64 },

    #[error("lead truncation must be at least 1 (got {0})")]
    LeadTruncation(usize),

    #[error("many-body dimension cap exceeded: {sites} one-particle sites (max {max})")]
    DimensionCap { sites: usize, max: usize },

    #[error("t_max = {t_max} exceeds the recurrence estimate {recurrence} of the finite leads")]
    BeyondRecurrence { t_max: f64, recurrence: f64 },

    #[error("time window is not decayed: |G| at the window edge is {edge:.3e} of its peak")]
    UndecayedWindow { edge: f64 },

    #[error("{what} changed the result by {change:.3e} (relative)")]
    NotConverged { what: String, change: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
