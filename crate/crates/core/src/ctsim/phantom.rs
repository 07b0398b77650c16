use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MU_WATER;
use crate::error::{Error, Result};

/// Ellipse with additive attenuation `mu` (mm⁻¹). `semi_axes[0]` lies along
/// the ellipse's own x axis, rotated by `rotation` radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    #[serde(default)]
    pub rotation: f64,
    pub mu: f64,
}

impl Ellipse {
    pub fn disk(center: [f64; 2], radius: f64, mu: f64) -> Self {
        Self {
            center,
            semi_axes: [radius, radius],
            rotation: 0.0,
            mu,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let (s, c) = self.rotation.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_axes[0]).powi(2) + (v / self.semi_axes[1]).powi(2) <= 1.0
    }

    /// Radius of the smallest origin-centred disk containing the ellipse.
    pub fn extent(&self) -> f64 {
        self.center[0].hypot(self.center[1]) + self.semi_axes[0].max(self.semi_axes[1])
    }

    /// Exact line integral along the ray at offset `s` and angle `theta`.
    pub fn line_integral(&self, theta: f64, s: f64) -> f64 {
        let [a, b] = self.semi_axes;
        let (sin_t, cos_t) = theta.sin_cos();
        let shifted = s - (self.center[0] * cos_t + self.center[1] * sin_t);
        let (sp, cp) = (theta - self.rotation).sin_cos();
        let a2 = a * a * cp * cp + b * b * sp * sp;
        let d = a2 - shifted * shifted;
        if d <= 0.0 {
            0.0
        } else {
            2.0 * self.mu * a * b / a2 * d.sqrt()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub ellipses: Vec<Ellipse>,
    /// Half-width of the square canvas in mm.
    pub half_width: f64,
}

impl Phantom {
    pub fn new(ellipses: Vec<Ellipse>, half_width: f64) -> Result<Self> {
        let p = Self { ellipses, half_width };
        p.validate()?;
        Ok(p)
    }

    pub fn empty(half_width: f64) -> Self {
        Self {
            ellipses: Vec::new(),
            half_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) {
            return Err(Error::InvalidArgument("phantom half-width must be positive".into()));
        }
        for (i, e) in self.ellipses.iter().enumerate() {
            if !(e.semi_axes[0] > 0.0 && e.semi_axes[1] > 0.0) {
                return Err(Error::InvalidArgument(format!("ellipse {i} has non-positive semi-axes")));
            }
            if ![e.center[0], e.center[1], e.rotation, e.mu].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument(format!("ellipse {i} has non-finite fields")));
            }
        }
        // total attenuation is checked at every ellipse centre and on a coarse grid
        let n = 64;
        let step = 2.0 * self.half_width / n as f64;
        let grid = (0..n * n).map(|k| {
            let x = -self.half_width + (k % n) as f64 * step + step / 2.0;
            let y = -self.half_width + (k / n) as f64 * step + step / 2.0;
            (x, y)
        });
        let centres = self.ellipses.iter().map(|e| (e.center[0], e.center[1]));
        for (x, y) in centres.chain(grid) {
            let mu = self.attenuation_at(x, y);
            if mu < -1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "negative total attenuation {mu:e} at ({x:.1}, {y:.1}) mm"
                )));
            }
        }
        Ok(())
    }

    pub fn attenuation_at(&self, x: f64, y: f64) -> f64 {
        self.ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.mu).sum()
    }

    /// Radius of the smallest origin-centred disk containing every ellipse.
    pub fn extent(&self) -> f64 {
        self.ellipses.iter().map(Ellipse::extent).fold(0.0, f64::max)
    }

    /// Centred disk, the analytic reference object.
    pub fn disk(radius: f64, mu: f64, half_width: f64) -> Result<Self> {
        Self::new(vec![Ellipse::disk([0.0, 0.0], radius, mu)], half_width)
    }

    /// Randomized abdomen-like slice: a water body with a fat rim, soft-tissue
    /// organs and small lesions. With `bones`, two dense ellipses sit on
    /// opposite sides of the body so that rays through both are
    /// photon-starved.
    pub fn random_body(rng: &mut impl Rng, half_width: f64, bones: bool) -> Result<Self> {
        let hu = |h: f64| h * MU_WATER / 1000.0;
        let scale = half_width / 192.0;
        let a = rng.random_range(120.0..150.0) * scale;
        let b = rng.random_range(85.0..105.0) * scale;
        let tilt = rng.random_range(-0.1..0.1);
        let mut ellipses = vec![
            Ellipse {
                center: [0.0, 0.0],
                semi_axes: [a, b],
                rotation: tilt,
                mu: MU_WATER + hu(-100.0),
            },
            Ellipse {
                center: [0.0, 0.0],
                semi_axes: [a - 12.0 * scale, b - 12.0 * scale],
                rotation: tilt,
                mu: hu(140.0),
            },
        ];
        let inner = |rng: &mut dyn rand::RngCore, margin: f64| {
            let r = rng.random_range(0.0..1.0f64).sqrt();
            let phi = rng.random_range(0.0..2.0 * PI);
            [(a - margin) * r * phi.cos(), (b - margin) * r * phi.sin()]
        };
        for _ in 0..rng.random_range(2..5) {
            let size = [rng.random_range(25.0..55.0) * scale, rng.random_range(20.0..40.0) * scale];
            ellipses.push(Ellipse {
                center: inner(rng, 25.0 * scale + size[0]),
                semi_axes: size,
                rotation: rng.random_range(0.0..PI),
                mu: hu(rng.random_range(-60.0..80.0)),
            });
        }
        for _ in 0..rng.random_range(3..7) {
            let r = rng.random_range(4.0..14.0) * scale;
            ellipses.push(Ellipse {
                center: inner(rng, 20.0 * scale + r),
                semi_axes: [r, r * rng.random_range(0.7..1.0)],
                rotation: rng.random_range(0.0..PI),
                mu: hu(rng.random_range(-120.0..160.0)),
            });
        }
        if bones {
            let phi = rng.random_range(-0.3..0.3f64);
            let reach = rng.random_range(0.6..0.75);
            let size = [rng.random_range(10.0..16.0) * scale, rng.random_range(16.0..26.0) * scale];
            let mu = hu(rng.random_range(1100.0..1500.0));
            for sign in [-1.0, 1.0] {
                ellipses.push(Ellipse {
                    center: [sign * reach * a * phi.cos(), sign * reach * b * phi.sin()],
                    semi_axes: size,
                    rotation: phi,
                    mu,
                });
            }
        }
        Self::new(ellipses, half_width)
    }
}
