use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binomial lowpass `[1, 4, 6, 4, 1] / 16`.
pub const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

const DC_TOLERANCE: f64 = 1e-12;
const MAX_MATERIALIZED_CHANNEL: usize = 10;

/// Pyramid lowpass plus per-level directional split counts.
///
/// The highpass of every pyramid stage is implicit: `H1(z) = 1 − H0(z)`, so
/// each stage splits its input into `lowpass + highpass` with no remainder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    h0: Vec<f64>,
    levels: usize,
    directions_per_level: Vec<usize>,
    wedge_transition: f64,
}

impl FilterBank {
    /// Validates and builds a bank with `levels` pyramid levels; the last
    /// level is the residual lowpass, so `directions.len()` must be
    /// `levels − 1`.
    pub fn new(levels: usize, directions: &[usize], h0: &[f64]) -> Result<Self> {
        if levels < 2 {
            return Err(Error::FilterBank(format!("levels must be >= 2, got {levels}")));
        }
        if directions.len() != levels - 1 {
            return Err(Error::FilterBank(format!(
                "{} direction counts given for {} highpass levels",
                directions.len(),
                levels - 1
            )));
        }
        if let Some(&d) = directions.iter().find(|d| !d.is_power_of_two()) {
            return Err(Error::FilterBank(format!(
                "direction count {d} is not a power of two"
            )));
        }
        if h0.is_empty() || h0.len() % 2 == 0 {
            return Err(Error::FilterBank(format!(
                "h0 must have odd length, got {}",
                h0.len()
            )));
        }
        let dc: f64 = h0.iter().sum();
        if (dc - 1.0).abs() > DC_TOLERANCE {
            return Err(Error::FilterBank(format!("h0 DC gain is {dc}, expected 1")));
        }
        let max_dirs = directions.iter().copied().max().unwrap_or(1);
        Ok(Self {
            h0: h0.to_vec(),
            levels,
            directions_per_level: directions.to_vec(),
            wedge_transition: PI / (2.0 * max_dirs as f64),
        })
    }

    /// Four levels with 8/4/2 directional bands and a binomial lowpass.
    pub fn standard() -> Self {
        Self::new(4, &[8, 4, 2], &BINOMIAL5).expect("standard bank is valid")
    }

    /// Sets the angular crossfade width (radians) of the directional wedges.
    ///
    /// Must lie in `(0, π/d]` for the largest direction count `d`, so that
    /// only neighbouring wedges overlap.
    pub fn with_wedge_transition(mut self, width: f64) -> Result<Self> {
        let max_dirs = self.directions_per_level.iter().copied().max().unwrap_or(1);
        let limit = PI / max_dirs as f64;
        if !(width > 0.0 && width <= limit) {
            return Err(Error::FilterBank(format!(
                "wedge transition {width} outside (0, {limit}]"
            )));
        }
        self.wedge_transition = width;
        Ok(self)
    }

    pub fn h0(&self) -> &[f64] {
        &self.h0
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn directions_per_level(&self) -> &[usize] {
        &self.directions_per_level
    }

    pub fn wedge_transition(&self) -> f64 {
        self.wedge_transition
    }

    /// Directional bands plus the lowpass band.
    pub fn band_count(&self) -> usize {
        self.directions_per_level.iter().sum::<usize>() + 1
    }

    /// Index of the first band belonging to highpass `level` (0-based).
    pub fn band_offset(&self, level: usize) -> usize {
        self.directions_per_level[..level].iter().sum()
    }

    pub fn lowpass_band(&self) -> usize {
        self.band_count() - 1
    }
}

/// Centered odd-sized 2-D kernel; tap `(r, c)` sits at offset
/// `(r − radius, c − radius)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2d {
    radius: usize,
    taps: Vec<f64>,
}

impl Kernel2d {
    pub fn delta() -> Self {
        Self {
            radius: 0,
            taps: vec![1.0],
        }
    }

    pub fn from_taps(radius: usize, taps: Vec<f64>) -> Result<Self> {
        let side = 2 * radius + 1;
        if taps.len() != side * side {
            return Err(Error::Shape(format!(
                "{} taps for a {side}x{side} kernel",
                taps.len()
            )));
        }
        Ok(Self { radius, taps })
    }

    /// Separable kernel `v ⊗ v` of a centered odd 1-D filter.
    pub fn separable(v: &[f64]) -> Self {
        let radius = v.len() / 2;
        let side = v.len();
        let mut taps = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                taps[r * side + c] = v[r] * v[c];
            }
        }
        Self { radius, taps }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Tap at signed offset `(dy, dx)`, zero outside the support.
    pub fn at(&self, dy: isize, dx: isize) -> f64 {
        let r = self.radius as isize;
        if dy.abs() > r || dx.abs() > r {
            return 0.0;
        }
        self.taps[((dy + r) as usize) * self.side() + (dx + r) as usize]
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Full linear convolution (polynomial product in `z1, z2`).
    pub fn convolve(&self, other: &Kernel2d) -> Kernel2d {
        let radius = self.radius + other.radius;
        let side = 2 * radius + 1;
        let mut taps = vec![0.0; side * side];
        let (sa, sb) = (self.side(), other.side());
        for ar in 0..sa {
            for ac in 0..sa {
                let a = self.taps[ar * sa + ac];
                if a == 0.0 {
                    continue;
                }
                for br in 0..sb {
                    for bc in 0..sb {
                        taps[(ar + br) * side + ac + bc] += a * other.taps[br * sb + bc];
                    }
                }
            }
        }
        Kernel2d { radius, taps }
    }
}

/// Inserts `factor − 1` zeros between taps of a centered odd filter.
pub fn upsample_filter(h: &[f64], factor: usize) -> Vec<f64> {
    let radius = h.len() / 2;
    let mut out = vec![0.0; 2 * radius * factor + 1];
    for (i, &v) in h.iter().enumerate() {
        out[i * factor] = v;
    }
    out
}

fn convolve_1d(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// 1-D lowpass product `Π_{j=0}^{count−1} H0(z^{2^j})`.
fn lowpass_product_1d(bank: &FilterBank, count: usize) -> Vec<f64> {
    (0..count).fold(vec![1.0], |acc, j| {
        convolve_1d(&acc, &upsample_filter(&bank.h0, 1 << j))
    })
}

fn pad_centered(v: &[f64], radius: usize) -> Vec<f64> {
    let own = v.len() / 2;
    let mut out = vec![0.0; 2 * radius + 1];
    out[radius - own..radius + own + 1].copy_from_slice(v);
    out
}

/// Equivalent filter of pyramid channel `n` for a depth-`k` pyramid:
/// `H1(z^{2^{n−1}}) Π_{j=0}^{n−2} H0(z^{2^j})` for `1 ≤ n < 2^k` and the
/// pure lowpass product `Π_{j=0}^{n−1} H0(z^{2^j})` for `n = 2^k`.
///
/// Both cases are assembled from separable pieces: with `L` the 1-D lowpass
/// product and `u` the upsampled `h0`, `H1·L⊗L = L⊗L − (u∗L)⊗(u∗L)`.
pub fn equivalent_pyramid_filter(bank: &FilterBank, n: usize, k: usize) -> Result<Kernel2d> {
    let top = 1usize.checked_shl(k as u32).unwrap_or(usize::MAX);
    if n < 1 || n > top {
        return Err(Error::InvalidArgument(format!(
            "channel index {n} outside [1, 2^{k}]"
        )));
    }
    // support grows as 2^n; past this the 2-D kernel no longer fits in memory
    if n > MAX_MATERIALIZED_CHANNEL {
        return Err(Error::InvalidArgument(format!(
            "channel index {n} exceeds {MAX_MATERIALIZED_CHANNEL}"
        )));
    }
    if n == top {
        return Ok(Kernel2d::separable(&lowpass_product_1d(bank, n)));
    }
    let low = lowpass_product_1d(bank, n - 1);
    let band = convolve_1d(&low, &upsample_filter(&bank.h0, 1 << (n - 1)));
    let radius = band.len() / 2;
    let mut taps = Kernel2d::separable(&pad_centered(&low, radius)).taps;
    let outer = Kernel2d::separable(&band);
    for (t, o) in taps.iter_mut().zip(outer.taps) {
        *t -= o;
    }
    Kernel2d::from_taps(radius, taps)
}
