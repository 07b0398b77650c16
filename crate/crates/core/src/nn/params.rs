use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::batchnorm::BatchNormSpec;
use super::conv::ConvSpec;
use crate::error::{Error, Result};

/// Network variants compared in the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Coefficient input/output, block bypasses, lowpass bypass.
    WaveletFull,
    /// Single-channel image input/output with block bypasses.
    ImageDomain,
    /// Coefficient input/output, block bypasses only.
    NoExternalBypass,
    /// Coefficient input/output without any bypass.
    NoBypassAtAll,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::WaveletFull,
        Variant::ImageDomain,
        Variant::NoExternalBypass,
        Variant::NoBypassAtAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::WaveletFull => "wavelet_full",
            Variant::ImageDomain => "image_domain",
            Variant::NoExternalBypass => "no_external_bypass",
            Variant::NoBypassAtAll => "no_bypass_at_all",
        }
    }

    pub fn internal_bypass(self) -> bool {
        !matches!(self, Variant::NoBypassAtAll)
    }

    pub fn external_bypass(self) -> bool {
        matches!(self, Variant::WaveletFull)
    }

    pub fn is_wavelet(self) -> bool {
        !matches!(self, Variant::ImageDomain)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

/// Architecture descriptor: width, depth and variant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub channels: usize,
    pub modules: usize,
    #[serde(default = "default_convs_per_module")]
    pub convs_per_module: usize,
    #[serde(default = "default_bands")]
    pub bands: usize,
    pub variant: Variant,
}

fn default_convs_per_module() -> usize {
    3
}

fn default_bands() -> usize {
    15
}

impl Architecture {
    pub fn new(channels: usize, modules: usize, variant: Variant) -> Self {
        Self {
            channels,
            modules,
            convs_per_module: default_convs_per_module(),
            bands: default_bands(),
            variant,
        }
    }

    /// 128 channels, six modules.
    pub fn paper_scale(variant: Variant) -> Self {
        Self::new(128, 6, variant)
    }

    /// Channels at the network input and output.
    pub fn io_channels(&self) -> usize {
        if self.variant.is_wavelet() {
            self.bands
        } else {
            1
        }
    }

    /// Channels entering the fusion convolution: the input of every module
    /// plus the output of the last one.
    pub fn concat_channels(&self) -> usize {
        (self.modules + 1) * self.channels
    }

    /// Input conv, module convs, fusion conv and output conv.
    pub fn conv_layer_count(&self) -> usize {
        1 + self.convs_per_module * self.modules + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.modules == 0 || self.convs_per_module == 0 || self.bands == 0 {
            return Err(Error::Architecture(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }
}

/// Convolution followed by batch normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvBnUnit {
    pub conv: ConvSpec,
    pub bn: BatchNormSpec,
}

impl ConvBnUnit {
    fn zeros(out_ch: usize, in_ch: usize) -> Self {
        Self {
            conv: ConvSpec::zeros(out_ch, in_ch),
            bn: BatchNormSpec::new(out_ch),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    ConvWeight,
    ConvBias,
    BnGamma,
    BnBeta,
    RunningMean,
    RunningVar,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamKind::RunningMean | ParamKind::RunningVar)
    }

    fn suffix(self) -> &'static str {
        match self {
            ParamKind::ConvWeight => "conv.weight",
            ParamKind::ConvBias => "conv.bias",
            ParamKind::BnGamma => "bn.gamma",
            ParamKind::BnBeta => "bn.beta",
            ParamKind::RunningMean => "bn.running_mean",
            ParamKind::RunningVar => "bn.running_var",
        }
    }
}

pub struct ParamRef<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub dims: Vec<usize>,
    pub values: &'a [f64],
}

pub struct ParamMut<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub values: &'a mut Vec<f64>,
}

/// All weights of one network, in a fixed canonical order: input unit,
/// module units, fusion unit, output conv.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub arch: Architecture,
    pub input: ConvBnUnit,
    pub blocks: Vec<Vec<ConvBnUnit>>,
    pub fusion: ConvBnUnit,
    pub output: ConvSpec,
}

impl NetworkParams {
    /// All weights and biases zero, `γ = 1`, `β = 0`.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        arch.validate()?;
        let c = arch.channels;
        let io = arch.io_channels();
        Ok(Self {
            arch: arch.clone(),
            input: ConvBnUnit::zeros(c, io),
            blocks: (0..arch.modules)
                .map(|_| (0..arch.convs_per_module).map(|_| ConvBnUnit::zeros(c, c)).collect())
                .collect(),
            fusion: ConvBnUnit::zeros(c, arch.concat_channels()),
            output: ConvSpec::zeros(io, c),
        })
    }

    fn units(&self) -> Vec<(String, &ConvBnUnit)> {
        let mut units = vec![("input".to_string(), &self.input)];
        for (i, block) in self.blocks.iter().enumerate() {
            for (j, unit) in block.iter().enumerate() {
                units.push((format!("block{i}.unit{j}"), unit));
            }
        }
        units.push(("fusion".to_string(), &self.fusion));
        units
    }

    /// Every stored tensor, trainable or not, in canonical order.
    pub fn tensors(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::new();
        for (prefix, unit) in self.units() {
            let c = unit.bn.channels();
            let entries: [(ParamKind, Vec<usize>, &[f64]); 6] = [
                (ParamKind::ConvWeight, unit.conv.weight_dims().to_vec(), &unit.conv.weight),
                (ParamKind::ConvBias, vec![unit.conv.out_ch], &unit.conv.bias),
                (ParamKind::BnGamma, vec![c], &unit.bn.gamma),
                (ParamKind::BnBeta, vec![c], &unit.bn.beta),
                (ParamKind::RunningMean, vec![c], &unit.bn.running_mean),
                (ParamKind::RunningVar, vec![c], &unit.bn.running_var),
            ];
            for (kind, dims, values) in entries {
                out.push(ParamRef {
                    name: format!("{prefix}.{}", kind.suffix()),
                    kind,
                    dims,
                    values,
                });
            }
        }
        out.push(ParamRef {
            name: "output.conv.weight".into(),
            kind: ParamKind::ConvWeight,
            dims: self.output.weight_dims().to_vec(),
            values: &self.output.weight,
        });
        out.push(ParamRef {
            name: "output.conv.bias".into(),
            kind: ParamKind::ConvBias,
            dims: vec![self.output.out_ch],
            values: &self.output.bias,
        });
        out
    }

    /// Mutable access to every stored tensor in canonical order.
    pub fn tensors_mut(&mut self) -> Vec<ParamMut<'_>> {
        fn push_unit<'a>(out: &mut Vec<ParamMut<'a>>, prefix: &str, unit: &'a mut ConvBnUnit) {
            let ConvBnUnit { conv, bn } = unit;
            let entries: [(ParamKind, &'a mut Vec<f64>); 6] = [
                (ParamKind::ConvWeight, &mut conv.weight),
                (ParamKind::ConvBias, &mut conv.bias),
                (ParamKind::BnGamma, &mut bn.gamma),
                (ParamKind::BnBeta, &mut bn.beta),
                (ParamKind::RunningMean, &mut bn.running_mean),
                (ParamKind::RunningVar, &mut bn.running_var),
            ];
            for (kind, values) in entries {
                out.push(ParamMut {
                    name: format!("{prefix}.{}", kind.suffix()),
                    kind,
                    values,
                });
            }
        }
        let mut out = Vec::new();
        push_unit(&mut out, "input", &mut self.input);
        for (i, block) in self.blocks.iter_mut().enumerate() {
            for (j, unit) in block.iter_mut().enumerate() {
                push_unit(&mut out, &format!("block{i}.unit{j}"), unit);
            }
        }
        push_unit(&mut out, "fusion", &mut self.fusion);
        out.push(ParamMut {
            name: "output.conv.weight".into(),
            kind: ParamKind::ConvWeight,
            values: &mut self.output.weight,
        });
        out.push(ParamMut {
            name: "output.conv.bias".into(),
            kind: ParamKind::ConvBias,
            values: &mut self.output.bias,
        });
        out
    }

    /// Trainable tensors only, in the order gradients are reported.
    pub fn trainable_mut(&mut self) -> Vec<ParamMut<'_>> {
        self.tensors_mut().into_iter().filter(|p| p.kind.trainable()).collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.tensors()
            .iter()
            .filter(|p| p.kind.trainable())
            .map(|p| p.values.len())
            .sum()
    }

    /// `Σ‖W‖²` over convolution weights.
    pub fn weight_energy(&self) -> f64 {
        self.tensors()
            .iter()
            .filter(|p| p.kind == ParamKind::ConvWeight)
            .flat_map(|p| p.values.iter())
            .map(|w| w * w)
            .sum()
    }

    /// Rebuilds parameters from named tensors; every canonical name must be
    /// present with the right length.
    pub fn from_named(arch: &Architecture, mut named: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        for slot in params.tensors_mut() {
            let values = named
                .remove(&slot.name)
                .ok_or_else(|| Error::Format(format!("missing tensor {}", slot.name)))?;
            if values.len() != slot.values.len() {
                return Err(Error::Format(format!(
                    "tensor {} has {} values, expected {}",
                    slot.name,
                    values.len(),
                    slot.values.len()
                )));
            }
            *slot.values = values;
        }
        if let Some(extra) = named.keys().next() {
            return Err(Error::Format(format!("unexpected tensor {extra}")));
        }
        Ok(params)
    }
}

/// Conv weights drawn from `N(0, σ²)`, biases 0, `γ = 1`, `β = 0`.
pub fn init_gaussian(arch: &Architecture, sigma: f64, seed: u64) -> Result<NetworkParams> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    let mut params = NetworkParams::zeros(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    for slot in params.tensors_mut() {
        if slot.kind == ParamKind::ConvWeight {
            for w in slot.values.iter_mut() {
                *w = normal.sample(&mut rng);
            }
        }
    }
    Ok(params)
}

pub const DEFAULT_INIT_SIGMA: f64 = 0.01;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_accounting() {
        let arch = Architecture::paper_scale(Variant::WaveletFull);
        assert_eq!(arch.conv_layer_count(), 21);
        let params = NetworkParams::zeros(&Architecture::new(8, 2, Variant::WaveletFull)).unwrap();
        let convs = params.tensors().iter().filter(|p| p.kind == ParamKind::ConvWeight).count();
        assert_eq!(convs, 1 + 3 * 2 + 2);
        assert_eq!(params.input.conv.in_ch, 15);
        assert_eq!(params.fusion.conv.in_ch, 24);
        assert_eq!(params.output.out_ch, 15);

        let image = NetworkParams::zeros(&Architecture::new(8, 2, Variant::ImageDomain)).unwrap();
        assert_eq!(image.input.conv.in_ch, 1);
        assert_eq!(image.output.out_ch, 1);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("resnet".parse::<Variant>().is_err());
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let arch = Architecture::new(4, 2, Variant::WaveletFull);
        let a = init_gaussian(&arch, 0.01, 7).unwrap();
        let b = init_gaussian(&arch, 0.01, 7).unwrap();
        let c = init_gaussian(&arch, 0.01, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for p in a.tensors() {
            match p.kind {
                ParamKind::ConvBias | ParamKind::BnBeta | ParamKind::RunningMean => {
                    assert!(p.values.iter().all(|&v| v == 0.0), "{}", p.name)
                }
                ParamKind::BnGamma | ParamKind::RunningVar => assert!(p.values.iter().all(|&v| v == 1.0)),
                ParamKind::ConvWeight => {}
            }
        }
        assert!(init_gaussian(&arch, 0.0, 1).is_err());
    }

    #[test]
    fn init_variance_matches_sigma() {
        // Monte-Carlo: ~1.5e5 weights in this architecture
        let arch = Architecture::new(32, 5, Variant::WaveletFull);
        let sigma = 0.01;
        let params = init_gaussian(&arch, sigma, 42).unwrap();
        let weights: Vec<f64> = params
            .tensors()
            .iter()
            .filter(|p| p.kind == ParamKind::ConvWeight)
            .flat_map(|p| p.values.to_vec())
            .collect();
        assert!(weights.len() >= 100_000);
        let sample = &weights[..100_000];
        let mean = sample.iter().sum::<f64>() / sample.len() as f64;
        let var = sample.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (sample.len() - 1) as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() <= 0.05, "variance ratio {}", var / (sigma * sigma));
    }

    #[test]
    fn named_round_trip_and_errors() {
        let arch = Architecture::new(4, 1, Variant::NoBypassAtAll);
        let params = init_gaussian(&arch, 0.1, 3).unwrap();
        let named: BTreeMap<String, Vec<f64>> =
            params.tensors().into_iter().map(|p| (p.name, p.values.to_vec())).collect();
        assert_eq!(NetworkParams::from_named(&arch, named.clone()).unwrap(), params);

        let mut missing = named.clone();
        missing.remove("fusion.bn.gamma");
        assert!(NetworkParams::from_named(&arch, missing).is_err());
        let mut extra = named;
        extra.insert("bogus".into(), vec![]);
        assert!(NetworkParams::from_named(&arch, extra).is_err());
    }
}
