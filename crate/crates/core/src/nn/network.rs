//! Forward and backward passes of the wavelet-domain residual network.
//!
//! ```text
//! x ─ conv·BN·ReLU ─ h0 ─ block ─ h1 ─ … ─ block ─ hM
//!                     └──────────┴── concat(h0 … hM) ── conv·BN·ReLU ── conv ─(+ lowpass of x)─ y
//! block(h) = ReLU(h + [conv·BN·ReLU]^(k−1) · conv·BN (h))
//! ```

use super::activation::{relu_in_place, relu_mask_in_place};
use super::batchnorm::{batch_norm_backward, batch_norm_infer, batch_norm_train, BnCache, BnGrads};
use super::conv::{conv2d, conv2d_backward, ConvGrads, Precision};
use super::params::{ConvBnUnit, NetworkParams, ParamKind};
use super::tensor::Tensor;
use crate::error::{Error, Result};

struct UnitCache {
    input: Tensor,
    bn: BnCache,
    /// post-ReLU output, kept only when the unit has a ReLU
    output: Option<Tensor>,
}

/// Saved forward state of one residual block.
pub struct BlockCache {
    units: Vec<UnitCache>,
    output: Tensor,
}

/// Everything the backward pass needs from one training-mode forward pass.
pub struct ForwardCache {
    input: UnitCache,
    blocks: Vec<BlockCache>,
    fusion: UnitCache,
    fused: Tensor,
}

fn push_pattern(pattern: &mut Vec<bool>, t: &Tensor) {
    pattern.extend(t.data().iter().map(|&v| v > 0.0));
}

impl BlockCache {
    /// Sign pattern (`> 0`) of every ReLU output inside the block.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut pattern = Vec::new();
        for unit in &self.units {
            if let Some(o) = &unit.output {
                push_pattern(&mut pattern, o);
            }
        }
        push_pattern(&mut pattern, &self.output);
        pattern
    }
}

impl ForwardCache {
    /// Sign pattern (`> 0`) of every ReLU output in the network. Two forward
    /// passes with equal patterns lie on the same linear piece.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut pattern = Vec::new();
        if let Some(o) = &self.input.output {
            push_pattern(&mut pattern, o);
        }
        for block in &self.blocks {
            pattern.extend(block.relu_pattern());
        }
        if let Some(o) = &self.fusion.output {
            push_pattern(&mut pattern, o);
        }
        pattern
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitGrads {
    pub conv: ConvGrads,
    pub bn: BnGrads,
}

/// Gradients of every trainable tensor, structured like [`NetworkParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGrads {
    pub input: UnitGrads,
    pub blocks: Vec<Vec<UnitGrads>>,
    pub fusion: UnitGrads,
    pub output: ConvGrads,
}

impl NetworkGrads {
    /// Gradient tensors in the order of [`NetworkParams::trainable_mut`].
    pub fn flat(&self) -> Vec<&[f64]> {
        fn push<'a>(out: &mut Vec<&'a [f64]>, u: &'a UnitGrads) {
            out.push(&u.conv.weight);
            out.push(&u.conv.bias);
            out.push(&u.bn.gamma);
            out.push(&u.bn.beta);
        }
        let mut out: Vec<&[f64]> = Vec::new();
        push(&mut out, &self.input);
        for block in &self.blocks {
            for u in block {
                push(&mut out, u);
            }
        }
        push(&mut out, &self.fusion);
        out.push(&self.output.weight);
        out.push(&self.output.bias);
        out
    }

    pub fn flat_mut(&mut self) -> Vec<&mut Vec<f64>> {
        fn push<'a>(out: &mut Vec<&'a mut Vec<f64>>, u: &'a mut UnitGrads) {
            out.push(&mut u.conv.weight);
            out.push(&mut u.conv.bias);
            out.push(&mut u.bn.gamma);
            out.push(&mut u.bn.beta);
        }
        let mut out = Vec::new();
        push(&mut out, &mut self.input);
        for block in &mut self.blocks {
            for u in block {
                push(&mut out, u);
            }
        }
        push(&mut out, &mut self.fusion);
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.flat()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Adds `2λW` to every convolution weight gradient.
    pub fn add_weight_decay(&mut self, params: &NetworkParams, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let weights: Vec<&[f64]> = params
            .tensors()
            .into_iter()
            .filter(|p| p.kind.trainable())
            .map(|p| if p.kind == ParamKind::ConvWeight { p.values } else { &[][..] })
            .collect();
        for (g, w) in self.flat_mut().into_iter().zip(weights) {
            for (gi, wi) in g.iter_mut().zip(w) {
                *gi += 2.0 * lambda * wi;
            }
        }
    }
}

/// `mean((pred − target)²)` and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    pred.check_same_dims(target)?;
    let n = pred.len() as f64;
    let mut grad = Tensor::zeros_like(pred);
    let mut loss = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

/// Runs the network with a chosen GEMM precision.
#[derive(Clone, Copy, Debug, Default)]
pub struct Engine {
    pub precision: Precision,
}

impl Engine {
    pub fn new(precision: Precision) -> Self {
        Self { precision }
    }

    fn check_input(params: &NetworkParams, x: &Tensor) -> Result<()> {
        let expected = params.arch.io_channels();
        if x.channels() != expected {
            return Err(Error::Architecture(format!(
                "{} network expects {expected} channels, got {}",
                params.arch.variant,
                x.channels()
            )));
        }
        Ok(())
    }

    fn add_external_bypass(params: &NetworkParams, x: &Tensor, out: &mut Tensor) {
        if !params.arch.variant.external_bypass() {
            return;
        }
        let low = params.arch.io_channels() - 1;
        for n in 0..x.batch() {
            let src = x.channel(n, low);
            for (o, &s) in out.channel_mut(n, low).iter_mut().zip(src) {
                *o += s;
            }
        }
    }

    /// Inference-mode forward pass (batch norm uses running statistics).
    pub fn forward(&self, params: &NetworkParams, x: &Tensor) -> Result<Tensor> {
        Self::check_input(params, x)?;
        let bypass = params.arch.variant.internal_bypass();
        let mut h = self.unit_infer(&params.input, x, true)?;
        let mut states = vec![h.clone()];
        for block in &params.blocks {
            h = self.block_infer(block, &h, bypass)?;
            states.push(h.clone());
        }
        drop(h);
        let refs: Vec<&Tensor> = states.iter().collect();
        let concat = Tensor::concat_channels(&refs)?;
        drop(states);
        let fused = self.unit_infer(&params.fusion, &concat, true)?;
        drop(concat);
        let mut out = conv2d(&fused, &params.output, self.precision)?;
        Self::add_external_bypass(params, x, &mut out);
        Ok(out)
    }

    /// Training-mode forward pass: batch statistics, running-stat updates,
    /// and a cache for [`Engine::backward`].
    pub fn forward_train(&self, params: &mut NetworkParams, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
        Self::check_input(params, x)?;
        let bypass = params.arch.variant.internal_bypass();
        let (mut h, input_cache) = self.unit_train(&mut params.input, x.clone(), true)?;
        let mut states = vec![h.clone()];
        let mut block_caches = Vec::with_capacity(params.blocks.len());
        for block in &mut params.blocks {
            let (out, cache) = self.block_train(block, &h, bypass)?;
            block_caches.push(cache);
            states.push(out.clone());
            h = out;
        }
        let refs: Vec<&Tensor> = states.iter().collect();
        let concat = Tensor::concat_channels(&refs)?;
        let (fused, fusion_cache) = self.unit_train(&mut params.fusion, concat, true)?;
        let mut out = conv2d(&fused, &params.output, self.precision)?;
        Self::add_external_bypass(params, x, &mut out);
        Ok((
            out,
            ForwardCache {
                input: input_cache,
                blocks: block_caches,
                fusion: fusion_cache,
                fused,
            },
        ))
    }

    /// Parameter gradients given `∂L/∂output`.
    pub fn backward(&self, params: &NetworkParams, cache: &ForwardCache, grad_out: &Tensor) -> Result<NetworkGrads> {
        let (g_fused, output) = conv2d_backward(&cache.fused, &params.output, grad_out, self.precision)?;
        let (g_concat, fusion) = self.unit_backward(&params.fusion, &cache.fusion, g_fused)?;
        let sizes = vec![params.arch.channels; params.arch.modules + 1];
        let mut parts = g_concat.split_channels(&sizes)?;
        let bypass = params.arch.variant.internal_bypass();

        // parts[i] is the concat's share of ∂L/∂h_i; blocks run back to front
        let mut g = parts.pop().expect("modules + 1 parts");
        let mut blocks = Vec::with_capacity(params.blocks.len());
        for (i, (block, bcache)) in params.blocks.iter().zip(&cache.blocks).enumerate().rev() {
            let (mut g_in, grads) = self.block_backward(block, bcache, g, bypass)?;
            g_in.add_assign(&parts[i])?;
            blocks.push(grads);
            g = g_in;
        }
        blocks.reverse();
        let (_, input) = self.unit_backward(&params.input, &cache.input, g)?;
        Ok(NetworkGrads {
            input,
            blocks,
            fusion,
            output,
        })
    }

    /// Training-mode forward, `mean((y − target)²) + λ·Σ‖W‖²`, and the full
    /// parameter gradient.
    pub fn loss_and_grad(
        &self,
        params: &mut NetworkParams,
        input: &Tensor,
        target: &Tensor,
        lambda: f64,
    ) -> Result<(f64, NetworkGrads)> {
        let (pred, cache) = self.forward_train(params, input)?;
        let (data_loss, grad_pred) = mse_loss(&pred, target)?;
        let mut grads = self.backward(params, &cache, &grad_pred)?;
        grads.add_weight_decay(params, lambda);
        Ok((data_loss + lambda * params.weight_energy(), grads))
    }

    fn unit_infer(&self, unit: &ConvBnUnit, x: &Tensor, relu: bool) -> Result<Tensor> {
        let z = conv2d(x, &unit.conv, self.precision)?;
        let mut y = batch_norm_infer(&z, &unit.bn)?;
        if relu {
            relu_in_place(&mut y);
        }
        Ok(y)
    }

    fn unit_train(&self, unit: &mut ConvBnUnit, x: Tensor, relu: bool) -> Result<(Tensor, UnitCache)> {
        let z = conv2d(&x, &unit.conv, self.precision)?;
        let (mut y, bn) = batch_norm_train(&z, &mut unit.bn)?;
        if relu {
            relu_in_place(&mut y);
        }
        let output = relu.then(|| y.clone());
        Ok((y, UnitCache { input: x, bn, output }))
    }

    fn unit_backward(&self, unit: &ConvBnUnit, cache: &UnitCache, mut grad: Tensor) -> Result<(Tensor, UnitGrads)> {
        if let Some(out) = &cache.output {
            relu_mask_in_place(out, &mut grad);
        }
        let (g_z, bn) = batch_norm_backward(&unit.bn, &cache.bn, &grad)?;
        let (g_x, conv) = conv2d_backward(&cache.input, &unit.conv, &g_z, self.precision)?;
        Ok((g_x, UnitGrads { conv, bn }))
    }

    fn block_infer(&self, units: &[ConvBnUnit], x: &Tensor, bypass: bool) -> Result<Tensor> {
        let last = units.len() - 1;
        let mut h = self.unit_infer(&units[0], x, last > 0)?;
        for (j, unit) in units.iter().enumerate().skip(1) {
            h = self.unit_infer(unit, &h, j < last)?;
        }
        if bypass {
            h.add_assign(x)?;
        }
        relu_in_place(&mut h);
        Ok(h)
    }

    fn block_train(&self, units: &mut [ConvBnUnit], x: &Tensor, bypass: bool) -> Result<(Tensor, BlockCache)> {
        let last = units.len() - 1;
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(units.len());
        for (j, unit) in units.iter_mut().enumerate() {
            let (y, cache) = self.unit_train(unit, h, j < last)?;
            caches.push(cache);
            h = y;
        }
        if bypass {
            h.add_assign(x)?;
        }
        relu_in_place(&mut h);
        Ok((
            h.clone(),
            BlockCache {
                units: caches,
                output: h,
            },
        ))
    }

    fn block_backward(
        &self,
        units: &[ConvBnUnit],
        cache: &BlockCache,
        mut grad: Tensor,
        bypass: bool,
    ) -> Result<(Tensor, Vec<UnitGrads>)> {
        relu_mask_in_place(&cache.output, &mut grad);
        let mut g = grad.clone();
        let mut grads = Vec::with_capacity(units.len());
        for (unit, ucache) in units.iter().zip(&cache.units).rev() {
            let (g_in, ug) = self.unit_backward(unit, ucache, g)?;
            grads.push(ug);
            g = g_in;
        }
        grads.reverse();
        if bypass {
            g.add_assign(&grad)?;
        }
        Ok((g, grads))
    }
}

impl Engine {
    /// Training-mode residual block `ReLU(x + g(x))` (or `ReLU(g(x))` without
    /// the bypass), where `g` chains the units with ReLU between them.
    pub fn residual_block(
        &self,
        units: &mut [ConvBnUnit],
        x: &Tensor,
        bypass: bool,
    ) -> Result<(Tensor, BlockCache)> {
        if units.is_empty() {
            return Err(Error::Architecture("residual block without units".into()));
        }
        if x.channels() != units[units.len() - 1].conv.out_ch && bypass {
            return Err(Error::Shape(format!(
                "bypass needs matching channels, input has {}",
                x.channels()
            )));
        }
        self.block_train(units, x, bypass)
    }

    /// Input gradient and per-unit gradients of [`Engine::residual_block`].
    pub fn residual_block_backward(
        &self,
        units: &[ConvBnUnit],
        cache: &BlockCache,
        grad_out: &Tensor,
        bypass: bool,
    ) -> Result<(Tensor, Vec<UnitGrads>)> {
        cache.output.check_same_dims(grad_out)?;
        self.block_backward(units, cache, grad_out.clone(), bypass)
    }
}

/// Inference-mode forward pass in double precision.
pub fn network_forward(input: &Tensor, params: &NetworkParams) -> Result<Tensor> {
    Engine::default().forward(params, input)
}
