use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{Geometry, Sinogram, SinogramKind};
use crate::error::{Error, Result};
use crate::image::Image;

/// Spatial Ram-Lak kernel at integer offset `n` for bin spacing `tau`.
pub fn ram_lak(n: i64, tau: f64) -> f64 {
    if n == 0 {
        1.0 / (4.0 * tau * tau)
    } else if n % 2 == 0 {
        0.0
    } else {
        -1.0 / ((n * n) as f64 * PI * PI * tau * tau)
    }
}

/// Ramp-filters every view (linear convolution via a zero-padded FFT).
pub fn ramp_filter(sino: &Sinogram, tau: f64) -> Vec<f64> {
    let n = sino.n_bins;
    let len = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut kernel = vec![Complex64::new(0.0, 0.0); len];
    for k in -(n as i64 - 1)..n as i64 {
        kernel[k.rem_euclid(len as i64) as usize] = Complex64::new(tau * ram_lak(k, tau), 0.0);
    }
    fwd.process(&mut kernel);
    let norm = 1.0 / len as f64;
    let mut out = vec![0.0; sino.data.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for i in 0..sino.n_angles {
        buf.fill(Complex64::new(0.0, 0.0));
        for (b, &v) in buf.iter_mut().zip(sino.view(i)) {
            b.re = v;
        }
        fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kernel) {
            *b *= k * norm;
        }
        inv.process(&mut buf);
        for (o, b) in out[i * n..(i + 1) * n].iter_mut().zip(&buf) {
            *o = b.re;
        }
    }
    out
}

/// Filtered backprojection onto the geometry's grid, in the sinogram's
/// attenuation units.
pub fn fbp(sino: &Sinogram, geom: &Geometry) -> Result<Image> {
    geom.validate()?;
    if sino.kind == SinogramKind::PhotonCount {
        return Err(Error::InvalidArgument("photon counts must be log-transformed before reconstruction".into()));
    }
    if sino.n_angles != geom.n_angles || sino.n_bins != geom.n_bins {
        return Err(Error::Shape(format!(
            "sinogram is {}x{}, geometry expects {}x{}",
            sino.n_angles, sino.n_bins, geom.n_angles, geom.n_bins
        )));
    }
    let filtered = ramp_filter(sino, geom.bin_spacing);
    let n = geom.side;
    let nb = geom.n_bins;
    let centre_bin = (nb - 1) as f64 / 2.0;
    let mut data = vec![0.0; n * n];
    for i in 0..geom.n_angles {
        let q = &filtered[i * nb..(i + 1) * nb];
        let (sin_t, cos_t) = geom.angle(i).sin_cos();
        // detector coordinate in bin units advances by `dt` per column
        let dt = cos_t * geom.pixel_size / geom.bin_spacing;
        for r in 0..n {
            let (x0, y) = geom.pixel_center(r, 0);
            let mut t = (x0 * cos_t + y * sin_t) / geom.bin_spacing + centre_bin;
            for d in &mut data[r * n..(r + 1) * n] {
                let j = t.floor();
                if j >= 0.0 && j < (nb - 1) as f64 {
                    let k = j as usize;
                    let w = t - j;
                    *d += q[k] * (1.0 - w) + q[k + 1] * w;
                } else if j == (nb - 1) as f64 {
                    *d += q[nb - 1];
                }
                t += dt;
            }
        }
    }
    let scale = PI / geom.n_angles as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    Image::new(n, n, data)
}
