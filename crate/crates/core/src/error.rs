use thiserror::Error;

/// Errors raised by geometry evaluation, quadrature construction and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TubeError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("footpoint projection did not converge after {iterations} iterations at {point:?}")]
    NonConvergedProjection { iterations: usize, point: [f64; 3] },
    #[error("grid of {nodes} nodes exceeds the budget of {budget}")]
    GridTooLarge { nodes: usize, budget: usize },
    #[error("gradient norm {norm} is not unit at a boundary sample")]
    DegenerateNormal { norm: f64 },
    #[error("tube cell at {point:?} has two competing footpoints")]
    TubeOverlapsMedialAxis { point: [f64; 3] },
    #[error("spacing {spacing} too coarse for tube half-width {h}")]
    SpacingTooCoarse { spacing: f64, h: f64 },
    #[error("extrusion is degenerate (factor {factor} <= 0); tube reaches a focal point")]
    DegenerateExtrusion { factor: f64 },
    #[error("no eigenvalue of the Hessian is clearly the normal one: {eigenvalues:?}")]
    AmbiguousNormalEigenvalue { eigenvalues: Vec<f64> },
    #[error("iterative solver stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("the normal regularization weight must be positive")]
    SingularWithoutRegularization,
    #[error("not enough interior nodes to reconstruct the trace at {point:?}")]
    InsufficientInteriorStencil { point: [f64; 3] },
    #[error("projection is not injective near {point:?}")]
    ProjectionNotInjective { point: [f64; 3] },
}

pub type Result<T> = std::result::Result<T, TubeError>;

impl TubeError {
    /// Stable snake_case identifier for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            TubeError::InvalidShape(_) => "invalid_shape",
            TubeError::InvalidInput(_) => "invalid_input",
            TubeError::NonConvergedProjection { .. } => "non_converged_projection",
            TubeError::GridTooLarge { .. } => "grid_too_large",
            TubeError::DegenerateNormal { .. } => "degenerate_normal",
            TubeError::TubeOverlapsMedialAxis { .. } => "tube_overlaps_medial_axis",
            TubeError::SpacingTooCoarse { .. } => "spacing_too_coarse",
            TubeError::DegenerateExtrusion { .. } => "degenerate_extrusion",
            TubeError::AmbiguousNormalEigenvalue { .. } => "ambiguous_normal_eigenvalue",
            TubeError::NoConvergence { .. } => "no_convergence",
            TubeError::SingularWithoutRegularization => "singular_without_regularization",
            TubeError::InsufficientInteriorStencil { .. } => "insufficient_interior_stencil",
            TubeError::ProjectionNotInjective { .. } => "projection_not_injective",
        }
    }
}
