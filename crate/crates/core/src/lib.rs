pub mod cli;
pub mod ctsim;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod nsct;
pub mod pipeline;
pub mod train;

pub use error::{Error, Result};
pub use image::{Image, SpatialTransform};
