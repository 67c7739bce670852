use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("invalid shape parameters: {0}")]
    InvalidShape(String),
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("chart does not match shape topology: {0}")]
    TopologyMismatch(String),
    #[error("axis {axis} has {have} nodes, stencils need at least {need}")]
    InsufficientStencil { axis: &'static str, need: usize, have: usize },
    #[error("degenerate chart at node ({i}, {j}): metric determinant {det:e}")]
    DegenerateChart { i: usize, j: usize, det: f64 },
    #[error("missing temporal samples: {0}")]
    MissingTemporalSamples(&'static str),
    #[error("contour term requested on a closed surface")]
    ContourOnClosedSurface,
    #[error("operation requires a closed surface")]
    OpenSurface,
    #[error("step instability: {0}")]
    StepInstability(String),
    #[error("wave integration became unstable at step {step} (max |C| = {max_abs:e})")]
    WaveInstability { step: usize, max_abs: f64 },
    #[error("point {index} lies within r_min = {r_min} of the origin")]
    Singularity { index: usize, r_min: f64 },
    #[error("coefficient quadrature did not converge: {0}")]
    QuadratureNotConverged(String),
    #[error("trace closure is singular at node {0} (1 + Λτ = 0)")]
    ClosureSingularity(usize),
    #[error("tangent speed {speed:e} below v_min = {v_min:e} at node {node}")]
    SpeedBelowMinimum { node: usize, speed: f64, v_min: f64 },
    #[error("fusion enthalpy must be non-zero in the Gibbs-Thomson branch")]
    ZeroFusionEnthalpy,
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len<T>(field: &[T], expected: usize) -> Result<()> {
    if field.len() == expected {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got: field.len() })
    }
}
