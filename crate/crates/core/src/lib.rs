// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod kinetic;
pub mod macro_transport;
pub mod metrics;
pub mod micro;

pub use error::{Result, SedError};
pub use kernels::{FluidState, GridSpec, Mat3, ScalarGrid, Vec3, VectorGrid};
pub use kinetic::{EnergyBudget, MomentReport, PhaseCloud};
pub use macro_transport::SpatialCloud;
pub use micro::{EnsembleStats, ParticleEnsemble};
