use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parallel-beam acquisition over `[0, π)` and the reconstruction grid.
///
/// World coordinates are millimetres with the origin at the grid centre; `x`
/// grows with the column index and `y` with the row index. View `i` measures
/// line integrals along rays at detector offset `s = x·cos θ + y·sin θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub n_angles: usize,
    pub n_bins: usize,
    pub bin_spacing: f64,
    pub side: usize,
    pub pixel_size: f64,
}

impl Geometry {
    pub fn new(n_angles: usize, n_bins: usize, bin_spacing: f64, side: usize, pixel_size: f64) -> Result<Self> {
        let g = Self {
            n_angles,
            n_bins,
            bin_spacing,
            side,
            pixel_size,
        };
        g.validate()?;
        Ok(g)
    }

    /// Detector with bin spacing equal to the pixel size and an odd bin count
    /// wide enough for the grid diagonal.
    pub fn for_grid(side: usize, pixel_size: f64, n_angles: usize) -> Self {
        let half_bins = ((side as f64) * std::f64::consts::FRAC_1_SQRT_2).ceil() as usize + 1;
        Self {
            n_angles,
            n_bins: 2 * half_bins + 1,
            bin_spacing: pixel_size,
            side,
            pixel_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_angles == 0 || self.n_bins == 0 || self.side == 0 {
            return Err(Error::InvalidArgument(format!("degenerate geometry {self:?}")));
        }
        if !(self.bin_spacing > 0.0 && self.pixel_size > 0.0) {
            return Err(Error::InvalidArgument("bin spacing and pixel size must be positive".into()));
        }
        Ok(())
    }

    pub fn angle(&self, view: usize) -> f64 {
        view as f64 * PI / self.n_angles as f64
    }

    pub fn bin_offset(&self, bin: usize) -> f64 {
        (bin as f64 - (self.n_bins - 1) as f64 / 2.0) * self.bin_spacing
    }

    /// Largest `|s|` any detector bin sees.
    pub fn detector_radius(&self) -> f64 {
        (self.n_bins - 1) as f64 / 2.0 * self.bin_spacing
    }

    /// Half-width of the reconstruction grid in mm.
    pub fn grid_half_width(&self) -> f64 {
        self.side as f64 * self.pixel_size / 2.0
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let c = (self.side - 1) as f64 / 2.0;
        ((col as f64 - c) * self.pixel_size, (row as f64 - c) * self.pixel_size)
    }
}
