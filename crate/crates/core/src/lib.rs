//! Generalized scalar-auxiliary-variable time steppers for gradient flows on
//! doubly periodic rectangles, with Fourier-spectral spatial operators.
//!
//! The building blocks are [`grid::SpectralContext`] for transforms and
//! diagonal solves, [`models::ModelSpec`] for energies, and
//! [`schemes::Stepper`] for the time steppers. [`harness`] wires them into
//! runnable experiments.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod models;
pub mod schemes;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{Field, Grid, SpectralContext};
pub use models::{ModelSpec, Potential};
pub use schemes::{SchemeKind, SchemeState, Stepper};
pub use transform::GFunction;
