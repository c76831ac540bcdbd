use crate::mlf::MlError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("x = {x} lies outside the domain [0, {length}]")]
    OutOfDomain { x: f64, length: f64 },
    #[error("mesh with {intervals} intervals cannot resolve {modes} modes (need an even count of at least {needed})")]
    MeshTooCoarse {
        intervals: usize,
        modes: usize,
        needed: usize,
    },
    #[error("{what} is defined on a different grid or domain")]
    Mismatch { what: &'static str },
    #[error("|g(x0)| = {value:e} is below the point-degeneracy threshold {threshold:e}")]
    PointDegenerate { value: f64, threshold: f64 },
    #[error("observed trace starts at {0:e}; zero initial data requires trace(0) = 0")]
    NonZeroInitialTrace(f64),
    #[error("K = {k} is below the required bound {bound}")]
    KTooSmall { k: f64, bound: f64 },
    #[error("iteration diverged at step {iteration}")]
    Divergence { iteration: usize },
    #[error("every mode is below the cutoff delta = {0:e}")]
    AllModesCut(f64),
    #[error("rho vanishes on the last quarter of the time grid")]
    DegenerateRho,
    #[error("rho(0) = 0; interior reconstruction needs rho(0) != 0")]
    VanishingInitialRho,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
