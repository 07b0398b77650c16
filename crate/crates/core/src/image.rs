//! Dense 2-D scalar fields stored row-major.

use crate::error::{Error, Result};

/// A 2-D scalar field (attenuation in mm⁻¹, HU, or a coefficient band).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Image(format!("empty image {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Image(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    fn check_same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "image dims {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Image) -> Result<Image> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Image) -> Result<Image> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
        self.check_same_dims(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Image) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Circular shift: `out[(r + dy) mod rows][(c + dx) mod cols] = self[r][c]`.
    pub fn shift_circular(&self, dy: isize, dx: isize) -> Image {
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        let mut out = Image::zeros(self.rows, self.cols);
        for r in 0..rows {
            let nr = (r + dy).rem_euclid(rows) as usize;
            for c in 0..cols {
                let nc = (c + dx).rem_euclid(cols) as usize;
                out.data[nr * self.cols + nc] = self.data[(r * cols + c) as usize];
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Image) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `‖self − other‖₂ / ‖other‖₂`.
    pub fn relative_l2_error(&self, reference: &Image) -> Result<f64> {
        let diff = self.sub(reference)?;
        Ok(diff.norm() / reference.norm())
    }

    /// Copies a `height × width` window whose top-left corner is (`row`, `col`).
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Image> {
        if row + height > self.rows || col + width > self.cols {
            return Err(Error::Shape(format!(
                "crop {height}x{width}@({row},{col}) exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(Image::from_fn(height, width, |r, c| self.get(row + r, col + c)))
    }
}

/// The six flips/rotations used for augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpatialTransform {
    Identity,
    /// Mirror columns: `c → W − 1 − c`.
    FlipHorizontal,
    /// Mirror rows: `r → H − 1 − r`.
    FlipVertical,
    /// Quarter turn: `out[r][c] = in[c][N − 1 − r]`.
    Rot90,
    Rot180,
    /// Three quarter turns: `out[r][c] = in[N − 1 − c][r]`.
    Rot270,
}

impl SpatialTransform {
    pub const ALL: [SpatialTransform; 6] = [
        SpatialTransform::Identity,
        SpatialTransform::FlipHorizontal,
        SpatialTransform::FlipVertical,
        SpatialTransform::Rot90,
        SpatialTransform::Rot180,
        SpatialTransform::Rot270,
    ];

    /// Source index `(row, col)` read for output position `(r, c)` of an
    /// `n × n` grid.
    #[inline]
    pub fn source(self, r: usize, c: usize, n: usize) -> (usize, usize) {
        match self {
            SpatialTransform::Identity => (r, c),
            SpatialTransform::FlipHorizontal => (r, n - 1 - c),
            SpatialTransform::FlipVertical => (n - 1 - r, c),
            SpatialTransform::Rot90 => (c, n - 1 - r),
            SpatialTransform::Rot180 => (n - 1 - r, n - 1 - c),
            SpatialTransform::Rot270 => (n - 1 - c, r),
        }
    }

    /// Applies the transform to a square `n × n` slice in place of `out`.
    pub fn apply_slice(self, input: &[f64], out: &mut [f64], n: usize) {
        for r in 0..n {
            for c in 0..n {
                let (sr, sc) = self.source(r, c, n);
                out[r * n + c] = input[sr * n + sc];
            }
        }
    }

    pub fn apply(self, image: &Image) -> Result<Image> {
        if !image.is_square() {
            return Err(Error::Image(format!(
                "transform needs a square image, got {}x{}",
                image.rows, image.cols
            )));
        }
        let n = image.rows;
        let mut out = Image::zeros(n, n);
        self.apply_slice(&image.data, &mut out.data, n);
        Ok(out)
    }

    /// Where a structure at orientation `k·π/d` ends up after the transform.
    pub fn map_orientation(self, k: usize, directions: usize) -> usize {
        match self {
            SpatialTransform::Identity | SpatialTransform::Rot180 => k,
            SpatialTransform::Rot90 | SpatialTransform::Rot270 => {
                (k + directions / 2) % directions
            }
            SpatialTransform::FlipHorizontal | SpatialTransform::FlipVertical => {
                (directions - k) % directions
            }
        }
    }
}
