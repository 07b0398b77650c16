//! 3×3 same-padded convolution as nine shifted GEMMs.
//!
//! The input is copied once into a zero-padded buffer whose rows are
//! `W + 2` wide and whose batch items follow each other inside one channel
//! row. With that layout every kernel tap reads a contiguous, offset view of
//! the buffer, so a whole batch goes through one GEMM per tap. Output columns
//! that land on padding are computed and discarded.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// Arithmetic used inside the convolution GEMMs. Everything outside the
/// GEMMs (bias, normalization, losses, parameters) stays in `f64`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// Weights `(out, in, 3, 3)` and one bias per output channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_ch: usize,
    pub in_ch: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvSpec {
    pub fn zeros(out_ch: usize, in_ch: usize) -> Self {
        Self {
            out_ch,
            in_ch,
            weight: vec![0.0; out_ch * in_ch * TAPS],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn from_parts(out_ch: usize, in_ch: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != out_ch * in_ch * TAPS || bias.len() != out_ch {
            return Err(Error::Shape(format!(
                "conv {out_ch}<-{in_ch}: {} weights, {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            out_ch,
            in_ch,
            weight,
            bias,
        })
    }

    #[inline]
    pub fn weight_index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_ch + i) * KERNEL + ky) * KERNEL + kx
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_ch, self.in_ch, KERNEL, KERNEL]
    }
}

trait GemmScalar: Copy + Default + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// `C ← alpha·A·B + beta·C` with arbitrary strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl GemmScalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl GemmScalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Geometry of the padded, batch-interleaved buffer.
#[derive(Clone, Copy)]
struct Layout {
    batch: usize,
    height: usize,
    width: usize,
    /// padded row width
    wp: usize,
    /// elements per padded batch item
    item: usize,
    /// GEMM columns: every padded position of every item
    cols: usize,
    /// row stride of a channel, with slack for the largest tap offset
    chan: usize,
}

impl Layout {
    fn new(dims: [usize; 4]) -> Self {
        let [batch, _, height, width] = dims;
        let wp = width + 2;
        let item = (height + 2) * wp;
        let cols = batch * item;
        Self {
            batch,
            height,
            width,
            wp,
            item,
            cols,
            chan: cols + 2 * wp + 2,
        }
    }

    #[inline]
    fn tap_offset(&self, tap: usize) -> usize {
        (tap / KERNEL) * self.wp + tap % KERNEL
    }

    /// Column of output pixel `(y, x)` of item `n`.
    #[inline]
    fn out_col(&self, n: usize, y: usize) -> usize {
        n * self.item + y * self.wp
    }
}

fn pad_input<T: GemmScalar>(input: &Tensor, lay: &Layout) -> Vec<T> {
    let channels = input.channels();
    let mut buf = vec![T::default(); channels * lay.chan];
    for n in 0..lay.batch {
        for c in 0..channels {
            let src = input.channel(n, c);
            let base = c * lay.chan + n * lay.item;
            for y in 0..lay.height {
                let dst = base + (y + 1) * lay.wp + 1;
                for (d, &s) in buf[dst..dst + lay.width]
                    .iter_mut()
                    .zip(&src[y * lay.width..(y + 1) * lay.width])
                {
                    *d = T::from_f64(s);
                }
            }
        }
    }
    buf
}

fn check_input(input: &Tensor, spec: &ConvSpec) -> Result<()> {
    if input.channels() != spec.in_ch {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            spec.in_ch,
            input.channels()
        )));
    }
    Ok(())
}

/// Same-size convolution (cross-correlation) with zero padding 1.
pub fn conv2d(input: &Tensor, spec: &ConvSpec, precision: Precision) -> Result<Tensor> {
    check_input(input, spec)?;
    Ok(match precision {
        Precision::F64 => forward_impl::<f64>(input, spec),
        Precision::F32 => forward_impl::<f32>(input, spec),
    })
}

fn forward_impl<T: GemmScalar>(input: &Tensor, spec: &ConvSpec) -> Tensor {
    let lay = Layout::new(input.dims());
    let padded = pad_input::<T>(input, &lay);
    let weight: Vec<T> = spec.weight.iter().map(|&w| T::from_f64(w)).collect();
    let mut out_p = vec![T::default(); spec.out_ch * lay.cols];
    for tap in 0..TAPS {
        let beta = if tap == 0 { T::from_f64(0.0) } else { T::from_f64(1.0) };
        // SAFETY: A reads weight[o·in·9 + i·9 + tap] for o < out, i < in.
        // B reads padded[i·chan + off + col] with off + col < chan.
        // C writes out_p[o·cols + col], col < cols.
        unsafe {
            T::gemm(
                spec.out_ch,
                spec.in_ch,
                lay.cols,
                weight.as_ptr().add(tap),
                (spec.in_ch * TAPS) as isize,
                TAPS as isize,
                padded.as_ptr().add(lay.tap_offset(tap)),
                lay.chan as isize,
                1,
                beta,
                out_p.as_mut_ptr(),
                lay.cols as isize,
                1,
            );
        }
    }
    let mut out = Tensor::zeros([lay.batch, spec.out_ch, lay.height, lay.width]);
    for n in 0..lay.batch {
        for o in 0..spec.out_ch {
            let b = spec.bias[o];
            let dst = out.channel_mut(n, o);
            for y in 0..lay.height {
                let src = o * lay.cols + lay.out_col(n, y);
                for (d, s) in dst[y * lay.width..(y + 1) * lay.width]
                    .iter_mut()
                    .zip(&out_p[src..src + lay.width])
                {
                    *d = s.to_f64() + b;
                }
            }
        }
    }
    out
}

/// Adjoint of [`conv2d`]: returns the input gradient and parameter gradients.
pub fn conv2d_backward(
    input: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
    precision: Precision,
) -> Result<(Tensor, ConvGrads)> {
    check_input(input, spec)?;
    let expected = [input.batch(), spec.out_ch, input.height(), input.width()];
    if grad_out.dims() != expected {
        return Err(Error::Shape(format!(
            "conv output grad {:?}, expected {expected:?}",
            grad_out.dims()
        )));
    }
    Ok(match precision {
        Precision::F64 => backward_impl::<f64>(input, spec, grad_out),
        Precision::F32 => backward_impl::<f32>(input, spec, grad_out),
    })
}

fn backward_impl<T: GemmScalar>(input: &Tensor, spec: &ConvSpec, grad_out: &Tensor) -> (Tensor, ConvGrads) {
    let lay = Layout::new(input.dims());
    let padded = pad_input::<T>(input, &lay);
    let weight: Vec<T> = spec.weight.iter().map(|&w| T::from_f64(w)).collect();

    let mut grad_bias = vec![0.0; spec.out_ch];
    let mut g = vec![T::default(); spec.out_ch * lay.cols];
    for n in 0..lay.batch {
        for o in 0..spec.out_ch {
            let src = grad_out.channel(n, o);
            grad_bias[o] += src.iter().sum::<f64>();
            for y in 0..lay.height {
                let dst = o * lay.cols + lay.out_col(n, y);
                for (d, &s) in g[dst..dst + lay.width]
                    .iter_mut()
                    .zip(&src[y * lay.width..(y + 1) * lay.width])
                {
                    *d = T::from_f64(s);
                }
            }
        }
    }

    let mut grad_weight = vec![0.0; spec.weight.len()];
    let mut tap_grad = vec![T::default(); spec.out_ch * spec.in_ch];
    let mut grad_padded = vec![T::default(); spec.in_ch * lay.chan];
    for tap in 0..TAPS {
        let off = lay.tap_offset(tap);
        // SAFETY: same index bounds as the forward pass; the transposed views
        // only swap strides.
        unsafe {
            // dW_tap = G · P_tapᵀ   (out × cols)·(cols × in)
            T::gemm(
                spec.out_ch,
                lay.cols,
                spec.in_ch,
                g.as_ptr(),
                lay.cols as isize,
                1,
                padded.as_ptr().add(off),
                1,
                lay.chan as isize,
                T::from_f64(0.0),
                tap_grad.as_mut_ptr(),
                spec.in_ch as isize,
                1,
            );
            // dP_tap += W_tapᵀ · G   (in × out)·(out × cols)
            T::gemm(
                spec.in_ch,
                spec.out_ch,
                lay.cols,
                weight.as_ptr().add(tap),
                TAPS as isize,
                (spec.in_ch * TAPS) as isize,
                g.as_ptr(),
                lay.cols as isize,
                1,
                T::from_f64(1.0),
                grad_padded.as_mut_ptr().add(off),
                lay.chan as isize,
                1,
            );
        }
        for o in 0..spec.out_ch {
            for i in 0..spec.in_ch {
                grad_weight[(o * spec.in_ch + i) * TAPS + tap] += tap_grad[o * spec.in_ch + i].to_f64();
            }
        }
    }

    let mut grad_in = Tensor::zeros(input.dims());
    for n in 0..lay.batch {
        for c in 0..spec.in_ch {
            let dst = grad_in.channel_mut(n, c);
            let base = c * lay.chan + n * lay.item;
            for y in 0..lay.height {
                let src = base + (y + 1) * lay.wp + 1;
                for (d, s) in dst[y * lay.width..(y + 1) * lay.width]
                    .iter_mut()
                    .zip(&grad_padded[src..src + lay.width])
                {
                    *d = s.to_f64();
                }
            }
        }
    }
    (
        grad_in,
        ConvGrads {
            weight: grad_weight,
            bias: grad_bias,
        },
    )
}
