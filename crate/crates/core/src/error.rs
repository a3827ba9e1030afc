use thiserror::Error;

/// Errors raised by the operators, integrators and monitors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("negative time {0} is not allowed")]
    NegativeTime(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "vorticity has nonzero mean {mean:e} (|mean| > {tol:e}); on the periodic domain the \
         velocity exists only for mean-zero vorticity (torus constraint)"
    )]
    NonZeroMeanVorticity { mean: f64, tol: f64 },

    #[error("velocity is not divergence-free: relative spectral divergence {rel:e} > {tol:e}")]
    NotDivergenceFree { rel: f64, tol: f64 },

    #[error("radius {radius} exceeds the admissible maximum {max} for this grid")]
    RadiusTooLarge { radius: f64, max: f64 },

    #[error("CFL number {cfl:.4} exceeds the limit {limit}")]
    CflViolation { cfl: f64, limit: f64 },

    #[error(
        "estimated contraction factor {kappa:.4} >= 1 for horizon T = {horizon}; \
         reduce T below about {suggested:.3e} (T ~ nu/|u0|^2)"
    )]
    NotContractive { kappa: f64, horizon: f64, suggested: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last ratio {ratio:.4}, distance {distance:e})")]
    PicardNoConvergence { iterations: usize, ratio: f64, distance: f64 },

    #[error("weight is not admissible: {0}")]
    InadmissibleWeight(String),

    #[error("grid is not a strip (l1 = {l1}, l2 = {l2}); need l1 >= 4 l2")]
    NotAStrip { l1: f64, l2: f64 },
}

pub type Result<T> = std::result::Result<T, NsError>;
