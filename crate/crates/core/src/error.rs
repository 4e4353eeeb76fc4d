use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, lengths or domains that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Evaluation outside the domain of a function (e.g. a homogeneous symbol at the origin).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("aliasing: local frequency exceeds the grid Nyquist limit on {fraction:.3} of the points (limit {nyquist:.4e}, max {max_frequency:.4e})")]
    Aliasing {
        fraction: f64,
        nyquist: f64,
        max_frequency: f64,
    },
    #[error("quadrature self-estimate {estimate:.3e} exceeds {limit:.3e}; use more time nodes")]
    Quadrature { estimate: f64, limit: f64 },
    #[error("Picard iteration does not contract (ratios {ratios:?}); reduce the step T")]
    NonContraction { ratios: Vec<f64> },
    #[error("Picard iteration did not reach tolerance {tolerance:.1e} in {iterations} iterations (last increment {last:.3e})")]
    NotConverged {
        iterations: usize,
        tolerance: f64,
        last: f64,
    },
    /// A configuration the theory does not cover (e.g. m <= 2d in standard mode).
    #[error("mode error: {0}")]
    Mode(String),
    /// Not enough usable data to produce a diagnostic (e.g. too few points for a fit).
    #[error("diagnostic error: {0}")]
    Diagnostic(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
