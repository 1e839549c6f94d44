//! Simulation and exact computation for the two-periodic Aztec diamond dimer model.
//!
//! Modules follow the data flow: [`lattice`] geometry, [`sampler`] exact tilings,
//! [`heights`], [`temperley`] forests, [`wilson`] forest sampling, [`kasteleyn`]
//! determinantal statistics, [`scaling`] limit-shape and Airy-path statistics, [`airy`]
//! kernel and Tracy–Widom numerics, [`acceptance`] checks, and [`io`] file formats, run
//! manifests and SVG rendering.

pub mod error;
pub mod lattice;
pub mod heights;
pub mod sampler;
pub mod temperley;
pub mod wilson;
pub mod kasteleyn;
pub mod scaling;
pub mod airy;
pub mod acceptance;
pub mod io;

pub use error::{Error, Result};
