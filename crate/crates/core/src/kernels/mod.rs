//! Fundamental solutions, grid fields, deposition and the Stokes/Brinkman operators.

mod brinkman;
mod deposit;
mod fft3;
mod grid;
mod oseen;
mod stokes;
mod vec3;

pub use brinkman::{brinkman_solve, brinkman_solve_with, BrinkmanOptions};
pub use deposit::{deposit, inside, interpolate, interpolate_scalar, Boundary};
pub use grid::{GridSpec, ScalarGrid, VectorGrid};
pub use oseen::{oseen_apply, oseen_regularized, oseen_tensor, BLOB_SUPPORT};
pub use stokes::{stokes_solve, stokes_solve_with, FluidState, StokesSolver};
pub use vec3::{Mat3, Vec3};
