use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid gauge: {0}")]
    InvalidGauge(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("zero vector where a nonzero one is required")]
    ZeroVector,

    #[error("polar ascent did not converge in direction {direction:?} (relative gradient {residual:e})")]
    PolarNonConvergence { direction: Vec<f64>, residual: f64 },

    #[error(
        "gauge is not strongly convex: Hessian of F^2 degenerates near {direction:?} (eigenvalue ratio {eigen_ratio:e})"
    )]
    NotStronglyConvex { direction: Vec<f64>, eigen_ratio: f64 },

    #[error("Wulff volume estimates disagree: Monte Carlo {monte_carlo}, radial quadrature {quadrature}")]
    WulffMismatch { monte_carlo: f64, quadrature: f64 },

    #[error("Monte Carlo relative error {0:e} exceeds the 0.5% budget")]
    MonteCarloError(f64),

    #[error("point {0:?} lies outside the closure of the domain")]
    OutsideDomain(Vec<f64>),

    #[error("test function is nonzero at cell {0}, inside the boundary collar")]
    SupportInCollar(usize),

    #[error("test function is nonzero at cell {0}, inside the excluded core")]
    SupportInCore(usize),

    #[error("non-finite integrand at cell {0}")]
    NonFinite(usize),

    #[error("empty test-function family")]
    EmptyFamily,

    #[error("domain too small for an admissible test-function support: {0}")]
    NoAdmissibleSupport(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
