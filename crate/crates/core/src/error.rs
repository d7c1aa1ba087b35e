use thiserror::Error;

pub type Result<T> = std::result::Result<T, NpError>;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum NpError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("degenerate elliptic coordinates: point ({x}, {y}) lies on the focal segment")]
    DegenerateCoordinates { x: f64, y: f64 },
    #[error("degenerate parameterization at t = {t}: |gamma'| = {speed:e}")]
    DegenerateParameterization { t: f64, speed: f64 },
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("grid degeneracy: nodes {i} and {j} coincide")]
    GridDegeneracy { i: usize, j: usize },
    #[error("discretization failure: {0}")]
    DiscretizationFailure(String),
    #[error("H* metric is not positive definite")]
    MetricIndefinite,
    #[error("symmetrization failure: relative asymmetry {residual:e} exceeds {threshold:e}")]
    SymmetrizationFailure { residual: f64, threshold: f64 },
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("consistency error: {what} mismatch {mismatch:e} exceeds {threshold:e}")]
    Consistency {
        what: String,
        mismatch: f64,
        threshold: f64,
    },
    #[error("singular resolvent: lambda coincides with eigenvalue {index}")]
    SingularResolvent { index: usize },
    #[error("fit error: {0}")]
    Fit(String),
    #[error("insufficient truncation: n_max = {n_max} below required {required}")]
    InsufficientTruncation { n_max: usize, required: usize },
    #[error("source inside: rho_z = {rho_z} must exceed rho0 = {rho0}")]
    SourceInside { rho_z: f64, rho0: f64 },
    #[error("bound inapplicable: rho_x + rho_z - 4 rho0 = {s} is not positive")]
    BoundInapplicable { s: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singularity: x coincides with z")]
    Singularity,
}

impl NpError {
    /// Short stable identifier, used on the CLI's diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            NpError::InvalidShape(_) => "invalid-shape",
            NpError::DegenerateCoordinates { .. } => "degenerate-coordinates",
            NpError::DegenerateParameterization { .. } => "degenerate-parameterization",
            NpError::InvalidResolution(_) => "invalid-resolution",
            NpError::GridDegeneracy { .. } => "grid-degeneracy",
            NpError::DiscretizationFailure(_) => "discretization-failure",
            NpError::MetricIndefinite => "metric-indefinite",
            NpError::SymmetrizationFailure { .. } => "symmetrization-failure",
            NpError::InvalidSource(_) => "invalid-source",
            NpError::Consistency { .. } => "consistency-error",
            NpError::SingularResolvent { .. } => "singular-resolvent",
            NpError::Fit(_) => "fit-error",
            NpError::InsufficientTruncation { .. } => "insufficient-truncation",
            NpError::SourceInside { .. } => "source-inside",
            NpError::BoundInapplicable { .. } => "bound-inapplicable",
            NpError::Domain(_) => "domain-error",
            NpError::Singularity => "singularity",
        }
    }
}
