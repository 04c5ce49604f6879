//! Pseudospectral laboratory for 2-D incompressible MHD near the uniform field
//! `x₂`-potential, in Eulerian form (ψ, u) and Lagrangian flow-map form (Y, Y_t, q),
//! with the anisotropic Littlewood–Paley toolkit used to measure it.
//!
//! The domain is a periodic box; fields are sampled uniformly and all
//! derivatives are spectral.

pub mod diagnostics;
pub mod error;
pub mod eulerian;
pub mod etd;
pub mod grid;
pub mod initial_data;
pub mod interp;
pub mod io;
pub mod lagrangian;
pub mod linear;
pub mod lp;
pub mod ops;
pub mod sample;

pub use error::{Error, Result};
pub use grid::{Axis, Grid, RealField, SpectralField};
