use super::tensor::Tensor;
use crate::error::Result;

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = v.max(0.0);
    }
}

/// Passes `grad_out` where the forward output was positive. The subgradient
/// at exactly zero is 0.
pub fn relu_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    output.check_same_dims(grad_out)?;
    let mut g = grad_out.clone();
    relu_mask_in_place(output, &mut g);
    Ok(g)
}

pub(crate) fn relu_mask_in_place(output: &Tensor, grad: &mut Tensor) {
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
}
