//! Exact stationary and heavy-traffic analysis of the single-server queue with
//! batch Poisson arrivals, semi-Markov (type-correlated) service times and an
//! exceptional first service in each busy period, plus a discrete-event
//! simulator of the same dynamics.
//!
//! The analytic code is generic over the real scalar (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the tolerances are tuned for.

pub mod analysis;
pub mod closed_form;
pub mod distribution;
pub mod export;
pub mod heavy_traffic;
pub mod inversion;
pub mod linalg;
pub mod model;
pub mod model_json;
pub mod presets;
pub mod roots;
pub mod sim;
mod scalar;
pub mod solver;

pub use num_complex::Complex;
pub use scalar::Scalar;

pub use distribution::{BatchDistribution, DurationDistribution};
pub use model::{KernelEntry, KernelKind, ModelError, MomentSet, QueueModel};
pub use solver::{Epoch, SolverError, StationarySolution};

pub type Model = QueueModel<f64>;
pub type Duration = DurationDistribution<f64>;
pub type Batch = BatchDistribution<f64>;
pub type Moments = MomentSet<f64>;
pub type Solution = StationarySolution<f64>;
pub type Pmf = inversion::QueueLengthPmf<f64>;
pub type HtResult = heavy_traffic::HeavyTrafficResult<f64>;
