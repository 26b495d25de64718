use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FslError {
    #[error("fiber vector ({0}, {1}) is on the zero section")]
    DegenerateFiber(f64, f64),

    #[error("metric `{metric}` returned a non-finite value at p=({u1}, {u2}), v=({y1}, {y2})")]
    NonSmoothEvaluation {
        metric: String,
        u1: f64,
        u2: f64,
        y1: f64,
        y2: f64,
    },

    #[error("Riemann-Finsler metric is singular (det g = {det})")]
    SingularMetric { det: f64 },

    #[error("indicatrix curve did not close within theta_max = {theta_max}")]
    NoClosure { theta_max: f64 },

    #[error("ray root bracket failed for direction ({0}, {1})")]
    RootBracketFailure(f64, f64),

    #[error("one-form is not divergence free: two-path potential discrepancy {discrepancy:e}")]
    NotDivergenceFree { discrepancy: f64 },

    #[error("main scalar is constant along the indicatrix (Riemannian case)")]
    RiemannianCase,

    #[error("integration constants disagree across parameters: spread {spread:e} > {tol:e}")]
    InconsistentConstants { spread: f64, tol: f64 },

    #[error("connection coefficients depend on the fiber: spread {spread:e} > {tol:e}")]
    FiberDependence { spread: f64, tol: f64 },

    #[error("connection is not metrical for the averaged metric: residual {residual:e}")]
    NotMetrical { residual: f64 },

    #[error("averaged metric is singular or indefinite at ({0}, {1})")]
    SingularAveragedMetric(f64, f64),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FslError {
    fn from(e: std::io::Error) -> Self {
        FslError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FslError>;
