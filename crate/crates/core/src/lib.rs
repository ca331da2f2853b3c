//! Invariant rescaling of signal trajectories.
//!
//! A trajectory's own velocity statistics define a Riemannian metric on its
//! feature space. Parallel transport of reference vectors under that metric
//! yields a coordinate chart (the "s" coordinates) that is unchanged by any
//! invertible, time-independent transformation of the signal.

pub mod audio;
pub mod chart;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod trajectory;

pub use error::{AudioError, ChartError, FormatError, GeometryError, HarnessError};
pub use exec::Execution;
pub use trajectory::FeatureTrajectory;
