use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{self, PoolKind};
use super::Tensor;
use crate::error::{Error, Result};

pub const BN_EPSILON: f32 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// 3x3 conv (stride 1, pad 1) → batch norm → ReLU.
    Conv(usize),
    MaxPool,
}

/// A VGG-style layer string plus input/output widths. The network always
/// ends in a global average pool and one dense layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VggConfig {
    pub layers: Vec<LayerSpec>,
    pub input_channels: usize,
    pub num_classes: usize,
}

fn layers(spec: &str) -> Vec<LayerSpec> {
    spec.parse::<LayerString>()
        .expect("built-in layer string")
        .0
}

impl VggConfig {
    pub fn new(layers: Vec<LayerSpec>, input_channels: usize, num_classes: usize) -> Self {
        VggConfig {
            layers,
            input_channels,
            num_classes,
        }
    }

    /// VGG11 with one 256→256 and one 512→512 convolution removed.
    pub fn vgg_ba_small() -> Self {
        Self::new(layers("64 M 128 M 256 M 512 512 M 512 M"), 1, 7)
    }

    pub fn vgg11() -> Self {
        Self::new(layers("64 M 128 M 256 256 M 512 512 M 512 512 M"), 1, 7)
    }

    pub fn vgg13() -> Self {
        Self::new(
            layers("64 64 M 128 128 M 256 256 M 512 512 M 512 512 M"),
            1,
            7,
        )
    }

    pub fn vgg16() -> Self {
        Self::new(
            layers("64 64 M 128 128 M 256 256 256 M 512 512 512 M 512 512 512 M"),
            1,
            7,
        )
    }

    pub fn vgg19() -> Self {
        Self::new(
            layers("64 64 M 128 128 M 256 256 256 256 M 512 512 512 512 M 512 512 512 512 M"),
            1,
            7,
        )
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "vgg_ba_small" => Some(Self::vgg_ba_small()),
            "vgg11" => Some(Self::vgg11()),
            "vgg13" => Some(Self::vgg13()),
            "vgg16" => Some(Self::vgg16()),
            "vgg19" => Some(Self::vgg19()),
            _ => None,
        }
    }

    /// `(in_channels, out_channels)` of each convolution, in order.
    pub fn conv_channels(&self) -> Vec<(usize, usize)> {
        let mut prev = self.input_channels;
        let mut out = Vec::new();
        for l in &self.layers {
            if let LayerSpec::Conv(c) = *l {
                out.push((prev, c));
                prev = c;
            }
        }
        out
    }

    /// Channel count entering the dense layer.
    pub fn feature_width(&self) -> usize {
        self.conv_channels()
            .last()
            .map_or(self.input_channels, |&(_, c)| c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig(
                "input_channels and num_classes must be positive".into(),
            ));
        }
        if !self.layers.iter().any(|l| matches!(l, LayerSpec::Conv(_))) {
            return Err(Error::InvalidConfig("no convolution layers".into()));
        }
        if self.layers.contains(&LayerSpec::Conv(0)) {
            return Err(Error::InvalidConfig("zero-width convolution".into()));
        }
        Ok(())
    }

    pub fn layer_string(&self) -> String {
        LayerString(self.layers.clone()).to_string()
    }
}

/// Whitespace- or comma-separated layer items: channel counts or `M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerString(pub Vec<LayerSpec>);

impl FromStr for LayerString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if t.eq_ignore_ascii_case("m") {
                    Ok(LayerSpec::MaxPool)
                } else {
                    t.parse()
                        .map(LayerSpec::Conv)
                        .map_err(|_| Error::InvalidConfig(format!("bad layer item `{t}`")))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(LayerString)
    }
}

impl fmt::Display for LayerString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match l {
                LayerSpec::Conv(c) => write!(f, "{c}")?,
                LayerSpec::MaxPool => f.write_str("M")?,
            }
        }
        Ok(())
    }
}

/// Convolution plus the batch norm that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub weight: Tensor,
    pub bias: Vec<f32>,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
}

impl ConvBlock {
    fn zeros(in_c: usize, out_c: usize) -> Self {
        ConvBlock {
            weight: Tensor::zeros([out_c, in_c, 3, 3]).expect("positive dims"),
            bias: vec![0.0; out_c],
            gamma: vec![0.0; out_c],
            beta: vec![0.0; out_c],
            running_mean: vec![0.0; out_c],
            running_var: vec![0.0; out_c],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) config: VggConfig,
    pub(crate) convs: Vec<ConvBlock>,
    /// Row-major (num_classes, feature_width).
    pub(crate) dense_weight: Vec<f32>,
    pub(crate) dense_bias: Vec<f32>,
    pub(crate) bn_epsilon: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub trainable: usize,
    pub stored: usize,
    pub bytes: usize,
}

pub fn build_model(config: &VggConfig) -> Result<Model> {
    config.validate()?;
    let convs = config
        .conv_channels()
        .into_iter()
        .map(|(i, o)| ConvBlock::zeros(i, o))
        .collect();
    let fw = config.feature_width();
    Ok(Model {
        convs,
        dense_weight: vec![0.0; config.num_classes * fw],
        dense_bias: vec![0.0; config.num_classes],
        bn_epsilon: BN_EPSILON,
        config: config.clone(),
    })
}

pub fn count_params(model: &Model) -> ParamCount {
    count_config_params(&model.config)
}

/// Parameter totals computed from the layer string alone.
pub fn count_config_params(config: &VggConfig) -> ParamCount {
    let mut trainable = 0;
    let mut running = 0;
    for (i, o) in config.conv_channels() {
        trainable += o * i * 9 + o; // conv weight + bias
        trainable += 2 * o; // gamma, beta
        running += 2 * o; // running mean, var
    }
    trainable += config.num_classes * config.feature_width() + config.num_classes;
    let stored = trainable + running;
    ParamCount {
        trainable,
        stored,
        bytes: stored * 4,
    }
}

/// Borrowed view of one named parameter.
pub struct ParamRef<'a> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a [f32],
}

impl Model {
    pub fn config(&self) -> &VggConfig {
        &self.config
    }

    pub fn bn_epsilon(&self) -> f32 {
        self.bn_epsilon
    }

    pub fn conv_blocks(&self) -> &[ConvBlock] {
        &self.convs
    }

    pub fn dense_weight(&self) -> &[f32] {
        &self.dense_weight
    }

    pub fn dense_bias(&self) -> &[f32] {
        &self.dense_bias
    }

    /// He-style random initialization; batch norm statistics are randomized
    /// too so that every parameter participates in the output.
    pub fn random(config: &VggConfig, seed: u64) -> Result<Model> {
        let mut model = build_model(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for block in &mut model.convs {
            let [_, in_c, _, _] = block.weight.dims();
            let bound = (6.0 / (in_c * 9) as f32).sqrt();
            block
                .weight
                .data_mut()
                .iter_mut()
                .for_each(|w| *w = rng.random_range(-bound..bound));
            for i in 0..block.bias.len() {
                block.bias[i] = rng.random_range(-0.05..0.05);
                block.gamma[i] = rng.random_range(0.5..1.5);
                block.beta[i] = rng.random_range(-0.1..0.1);
                block.running_mean[i] = rng.random_range(-0.1..0.1);
                block.running_var[i] = rng.random_range(0.5..1.5);
            }
        }
        let bound = (1.0 / config.feature_width() as f32).sqrt();
        model
            .dense_weight
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..bound));
        model
            .dense_bias
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-0.1..0.1));
        Ok(model)
    }

    /// Parameters under their weight-file names, in canonical file order.
    pub fn named_params(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::with_capacity(self.convs.len() * 6 + 2);
        for (i, b) in self.convs.iter().enumerate() {
            let n = i + 1;
            let c = b.bias.len();
            out.push(ParamRef {
                name: format!("conv{n}.weight"),
                dims: b.weight.dims().to_vec(),
                data: b.weight.data(),
            });
            for (suffix, data) in [
                ("conv{}.bias", &b.bias),
                ("bn{}.gamma", &b.gamma),
                ("bn{}.beta", &b.beta),
                ("bn{}.running_mean", &b.running_mean),
                ("bn{}.running_var", &b.running_var),
            ] {
                out.push(ParamRef {
                    name: suffix.replace("{}", &n.to_string()),
                    dims: vec![c],
                    data,
                });
            }
        }
        out.push(ParamRef {
            name: "dense.weight".into(),
            dims: vec![self.config.num_classes, self.config.feature_width()],
            data: &self.dense_weight,
        });
        out.push(ParamRef {
            name: "dense.bias".into(),
            dims: vec![self.config.num_classes],
            data: &self.dense_bias,
        });
        out
    }

    /// Mutable storage for a named parameter, with its expected dims.
    pub fn param_mut(&mut self, name: &str) -> Option<(Vec<usize>, &mut [f32])> {
        let classes = self.config.num_classes;
        let fw = self.config.feature_width();
        match name {
            "dense.weight" => return Some((vec![classes, fw], &mut self.dense_weight)),
            "dense.bias" => return Some((vec![classes], &mut self.dense_bias)),
            _ => {}
        }
        let (layer, field) = name.split_once('.')?;
        let (kind, idx) = if let Some(i) = layer.strip_prefix("conv") {
            ("conv", i)
        } else {
            ("bn", layer.strip_prefix("bn")?)
        };
        let idx: usize = idx.parse().ok()?;
        let block = self.convs.get_mut(idx.checked_sub(1)?)?;
        let c = block.bias.len();
        let slot = match (kind, field) {
            ("conv", "weight") => {
                let dims = block.weight.dims().to_vec();
                return Some((dims, block.weight.data_mut()));
            }
            ("conv", "bias") => &mut block.bias,
            ("bn", "gamma") => &mut block.gamma,
            ("bn", "beta") => &mut block.beta,
            ("bn", "running_mean") => &mut block.running_mean,
            ("bn", "running_var") => &mut block.running_var,
            _ => return None,
        };
        Some((vec![c], slot.as_mut_slice()))
    }

    /// Logits, one row of `num_classes` per batch item.
    pub fn forward(&self, input: &Tensor) -> Result<Vec<Vec<f32>>> {
        if input.channels() != self.config.input_channels {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} input channels, got {}",
                self.config.input_channels,
                input.channels()
            )));
        }
        let mut x = input.clone();
        let mut blocks = self.convs.iter();
        for layer in &self.config.layers {
            match layer {
                LayerSpec::Conv(_) => {
                    let b = blocks.next().expect("one block per conv layer");
                    x = ops::conv2d(&x, &b.weight, &b.bias)?;
                    let (scale, shift) = ops::batchnorm_affine(
                        &b.gamma,
                        &b.beta,
                        &b.running_mean,
                        &b.running_var,
                        self.bn_epsilon,
                    )?;
                    ops::apply_affine(&mut x, &scale, &shift, true);
                }
                LayerSpec::MaxPool => x = ops::pool2d(&x, PoolKind::Max)?,
            }
        }
        let pooled = ops::global_avg_pool(&x);
        (0..pooled.batch())
            .map(|n| ops::dense(pooled.item(n), &self.dense_weight, &self.dense_bias))
            .collect()
    }
}
