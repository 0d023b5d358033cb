use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("signature: expected one negative and {expected_positive} positive eigenvalues, found {negative} negative / {positive} positive")]
    Signature {
        negative: usize,
        positive: usize,
        expected_positive: usize,
    },
    #[error("domain: {0}")]
    Domain(String),
    #[error("orientation: {0}")]
    Orientation(String),
    #[error("not spacelike: {0}")]
    NotSpacelike(String),
    #[error("spacelike violation at node {node}: q = {q:.3e} below floor {floor:.3e}")]
    SpacelikeViolation { node: usize, q: f64, floor: f64 },
    #[error("step too small: dt = {0:.3e}")]
    StepTooSmall(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("degenerate metric at node {node}, t = {t:.6}: det ratio {ratio:.3e}")]
    DegenerateMetric { node: usize, t: f64, ratio: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-positive value {value:.3e} at s = {s:.6}")]
    NonPositiveValue { s: f64, value: f64 },
    #[error("window: {0}")]
    Window(String),
    #[error("height escape: u = {u:.6} outside [{lower:.6}, {upper:.6}]")]
    HeightEscape { u: f64, lower: f64, upper: f64 },
    #[error("barrier violation: {count} node(s), worst margin {worst:.3e}")]
    BarrierViolation { count: usize, worst: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl GeomError {
    /// Stable identifier used in summaries.
    pub fn reason(&self) -> &'static str {
        match self {
            GeomError::Signature { .. } => "SignatureError",
            GeomError::Domain(_) => "DomainError",
            GeomError::Orientation(_) => "OrientationError",
            GeomError::NotSpacelike(_) => "NotSpacelike",
            GeomError::SpacelikeViolation { .. } => "SpacelikeViolation",
            GeomError::StepTooSmall(_) => "StepTooSmall",
            GeomError::NoConvergence { .. } => "NoConvergence",
            GeomError::DegenerateMetric { .. } => "DegenerateMetric",
            GeomError::InsufficientData(_) => "InsufficientData",
            GeomError::NonPositiveValue { .. } => "NonPositiveValue",
            GeomError::Window(_) => "WindowError",
            GeomError::HeightEscape { .. } => "HeightEscape",
            GeomError::BarrierViolation { .. } => "BarrierViolation",
            GeomError::Shape(_) => "ShapeError",
        }
    }
}

pub type Result<T> = std::result::Result<T, GeomError>;
