//! Forward solvers and inverse source reconstruction for the time-fractional
//! diffusion equation ∂_t^α u − Δu = g(x)ρ(t) on (0, L) with homogeneous
//! Dirichlet conditions and zero initial data.

pub mod cli;
pub mod error;
pub mod forward;
pub mod fracops;
pub mod inverse_t;
pub mod inverse_x;
pub mod mlf;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
pub use report::ReconstructionReport;
