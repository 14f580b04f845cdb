use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve is not immersed: |c'| = {speed:.3e} at node {node}")]
    ImmersionViolation { node: usize, speed: f64 },
    #[error("curve polyline self-intersects between segments {first} and {second}")]
    SelfIntersection { first: usize, second: usize },
    #[error("curve is not counterclockwise (signed area {0:.3e})")]
    Orientation(f64),
    #[error("target area must be positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("direction must be a unit vector, |e| = {0}")]
    DegenerateDirection(f64),
    #[error("invalid curve description: {0}")]
    InvalidCurve(String),

    #[error("root finding did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("eigensolver did not converge: {0}")]
    SolverDivergence(String),
    #[error("singular or indefinite matrix: {0}")]
    SingularMass(String),
    #[error("no eigenvalue within tolerance of target {target}")]
    EmptyCluster { target: f64 },

    #[error("wrong boundary condition: expected {expected}")]
    WrongBC { expected: &'static str },
    #[error("eigenpair carries no boundary flux")]
    MissingFlux,
    #[error("eigenvalue has multiplicity {0}; use the cluster matrix")]
    MultipleEigenvalue(usize),
    #[error("cluster is not mass-orthonormal (defect {0:.3e})")]
    NonOrthonormalCluster(f64),
    #[error("boundary flux vanishes identically")]
    ZeroFlux,
    #[error("mode tracking failed: best correlation {0:.3}")]
    ModeTrackingFailure(f64),

    #[error("grid mismatch: {left} vs {right} nodes")]
    GridMismatch { left: usize, right: usize },
    #[error("operator is singular: {0}")]
    SingularOperator(String),

    #[error("no decrease found after {halvings} step halvings")]
    StepFailure { halvings: usize },

    #[error("configuration error: {0}")]
    Config(String),
    #[error("column length mismatch: {name} has {len}, expected {expected}")]
    LengthMismatch { name: String, len: usize, expected: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
