use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("duplicate point in configuration")]
    DuplicatePoint,
    #[error("coordinate out of box: {0}")]
    OutOfBox(f64),
    #[error("search radius {r} exceeds half box side {half} (minimum-image ambiguity)")]
    RadiusTooLarge { r: f64, half: f64 },
    #[error("point coincides with a configuration point")]
    PointInConfiguration,
    #[error("jump rate exponent is +inf (infinite rate)")]
    InfiniteRate,
    #[error("potential has no gradient metadata at the requested separation")]
    MissingGradient,
    #[error("quadrature infeasible: {0}")]
    QuadratureInfeasible(String),
    #[error("thinning bound violated: acceptance probability {0}")]
    BoundViolation(f64),
    #[error("single-step displacement {0} exceeds L/4, integrator blow-up")]
    BlowUp(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
