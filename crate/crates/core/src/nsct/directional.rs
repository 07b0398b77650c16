//! Frequency-domain angular wedges for the directional stage.
//!
//! Band `k` of a level with `d` directions collects image structures whose
//! spatial orientation lies near `k·π/d`, measured from the column axis
//! towards increasing row index. A structure at orientation `θ` has its
//! spectrum along frequency angle `θ + π/2`.

use std::f64::consts::{FRAC_PI_2, PI};

use super::fft2::signed_frequency;

/// Spatial orientation in `[0, π)` of frequency `(ωy, ωx)`; `None` at DC.
fn orientation(wy: f64, wx: f64) -> Option<f64> {
    if wx == 0.0 && wy == 0.0 {
        return None;
    }
    Some((wy.atan2(wx) - FRAC_PI_2).rem_euclid(PI))
}

/// Signed frequencies an FFT index stands for: one, or both `±side/2` at
/// Nyquist.
fn aliases(k: usize, side: usize) -> Vec<f64> {
    if 2 * k == side {
        vec![-(k as f64), k as f64]
    } else {
        vec![signed_frequency(k, side)]
    }
}

/// Raised-cosine bump over one sector, `x` in sector units from the centre.
fn bump(x: f64, width: f64) -> f64 {
    let a = x.abs();
    let lo = 0.5 - width / 2.0;
    let hi = 0.5 + width / 2.0;
    if a <= lo {
        1.0
    } else if a >= hi {
        0.0
    } else {
        let c = (FRAC_PI_2 * (a - lo) / width).cos();
        c * c
    }
}

fn raw_weights(theta: Option<f64>, directions: usize, width: f64, out: &mut [f64]) {
    let Some(theta) = theta else {
        // DC: assigned wholly to the first wedge
        out.fill(0.0);
        out[0] = 1.0;
        return;
    };
    let d = directions as f64;
    let t = theta * d / PI;
    for (k, w) in out.iter_mut().enumerate() {
        let x = (t - k as f64 + d / 2.0).rem_euclid(d) - d / 2.0;
        *w = bump(x, width);
    }
    let total: f64 = out.iter().sum();
    for w in out.iter_mut() {
        *w /= total;
    }
}

/// Wedge masks for one level, each `side × side` in FFT index order.
///
/// Nyquist samples average the weights of all their aliases. This keeps the
/// masks symmetric under `ω → −ω` (real bands) and under flips and quarter
/// turns, and they sum to one at every sample.
pub(crate) fn wedge_masks(side: usize, directions: usize, transition: f64) -> Vec<Vec<f64>> {
    let n = side * side;
    if directions == 1 {
        return vec![vec![1.0; n]];
    }
    let width = transition * directions as f64 / PI;
    let mut masks = vec![vec![0.0; n]; directions];
    let mut here = vec![0.0; directions];
    for u in 0..side {
        let wys = aliases(u, side);
        for v in 0..side {
            let wxs = aliases(v, side);
            let share = 1.0 / (wys.len() * wxs.len()) as f64;
            for &wy in &wys {
                for &wx in &wxs {
                    raw_weights(orientation(wy, wx), directions, width, &mut here);
                    for k in 0..directions {
                        masks[k][u * side + v] += share * here[k];
                    }
                }
            }
        }
    }
    masks
}

/// Centre orientation of wedge `k` out of `directions`.
pub fn wedge_center(k: usize, directions: usize) -> f64 {
    k as f64 * PI / directions as f64
}
