//! Physics side of the visuotactile simulator.
//!
//! [`mechanics`] holds the series-spring press model used to synthesize and
//! invert force sequences, plus the Hertzian projected-area relations.
//! [`optics`] is the sensor forward model (imprint geometry, Lambertian
//! three-light rendering) and the decoding path back to depth: lookup-table
//! calibration, gradient lookup, DCT Poisson integration and contact fitting.

pub mod error;
pub mod grid;
pub mod mechanics;
pub mod optics;

pub use error::{Error, Result};
pub use grid::Grid;
