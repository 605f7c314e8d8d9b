//! Error type shared by all modules.

use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Grid or time-axis construction violated an invariant.
    Construction(&'static str),
    /// A field value was not finite.
    NonFinite(&'static str),
    /// Fields defined on incompatible grids or time axes.
    ShapeMismatch(&'static str),
    /// Integration region contains no cells.
    EmptyRegion,
    /// Negative diffusivity or reaction coefficient.
    CoefficientSign,
    /// A tensor eigenvalue left the declared ellipticity interval.
    Ellipticity,
    /// Conjugate gradients did not reach the requested tolerance.
    SolveFailure { iterations: usize, residual: f64 },
    /// Fixed-point iteration exhausted its budget; carries the gap history.
    NoConvergence { gaps: Vec<f64> },
    /// NaN, infinity or negativity beyond tolerance during time stepping.
    BlowUp { slice: usize },
    /// Parameter outside its admissible range.
    InvalidParameter(&'static str),
    /// A parabolic cube extends outside the space-time domain.
    CubeOutsideDomain,
    /// Grid cannot resolve the requested nested cubes; carries the largest
    /// feasible level index.
    TooCoarse { max_feasible: usize },
    /// Ratio with zero denominator and nonzero numerator.
    DegenerateRatio,
    /// Measured Lipschitz constant exceeds the admissible bound.
    LipschitzTooLarge,
    /// Point outside the extent of a boundary graph.
    OutsideGraph,
    /// Test function does not vanish at the initial time.
    TestFunction,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Construction(what) => write!(f, "invalid construction: {what}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::EmptyRegion => write!(f, "empty region"),
            Error::CoefficientSign => write!(f, "coefficient sign"),
            Error::Ellipticity => write!(f, "ellipticity violated"),
            Error::SolveFailure { iterations, residual } => {
                write!(f, "linear solve failed after {iterations} iterations, residual {residual:e}")
            }
            Error::NoConvergence { gaps } => {
                write!(f, "no convergence after {} iterations", gaps.len())
            }
            Error::BlowUp { slice } => write!(f, "blow-up detected at slice {slice}"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::CubeOutsideDomain => write!(f, "cube leaves domain"),
            Error::TooCoarse { max_feasible } => {
                write!(f, "grid too coarse; deepest feasible level is {max_feasible}")
            }
            Error::DegenerateRatio => write!(f, "degenerate ratio: zero denominator"),
            Error::LipschitzTooLarge => write!(f, "Lipschitz constant exceeds 1"),
            Error::OutsideGraph => write!(f, "point outside graph extent"),
            Error::TestFunction => write!(f, "test function must vanish at the initial time"),
        }
    }
}

impl core::error::Error for Error {}
