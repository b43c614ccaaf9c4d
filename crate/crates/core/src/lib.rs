//! Wave propagation on periodic grids with a coarse and a fine leapfrog
//! solver, a learned coarse-to-fine correction network, and parareal
//! iterations built on top of them.

pub mod cli;
pub mod dataset;
pub mod dispersion;
pub mod energy;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod jnet;
pub mod media;
pub mod parareal;
pub mod solver;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};
