use super::{ModelConfig, ModelError};
use crate::nn::{BatchNorm, Tensor};
use crate::rng::SeededRng;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    /// `[in, out]`
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

impl<T: Real> Dense<T> {
    fn init(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        Self {
            w: Tensor::glorot(&[fan_in, fan_out], fan_in, fan_out, rng),
            b: Tensor::zeros(&[fan_out]),
        }
    }
}

/// Pointwise dense, batch norm, ReLU, then weighted-max subtraction.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer<T> {
    pub dense: Dense<T>,
    pub bn: BatchNorm<T>,
    /// One weight per filter, zero-initialized.
    pub w_max: Tensor<T>,
}

/// Dense, batch norm, ReLU over per-part feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ReduceLayer<T> {
    pub dense: Dense<T>,
    pub bn: BatchNorm<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionHead<T> {
    /// Feature projection `[in, width]`.
    pub w: Tensor<T>,
    /// Attention vector `[2 * width]`: source half then neighbor half.
    pub a: Tensor<T>,
}

impl<T: Real> AttentionHead<T> {
    pub fn width(&self) -> usize {
        self.w.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatLayer<T> {
    pub heads: Vec<AttentionHead<T>>,
}

impl<T: Real> GatLayer<T> {
    pub fn output_width(&self) -> usize {
        self.heads.iter().map(|h| h.width()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    /// Batch-norm running statistics, updated outside the optimizer.
    RunningStat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub encoder: Vec<EncoderLayer<T>>,
    pub reduce: Vec<ReduceLayer<T>>,
    pub gat: Vec<GatLayer<T>>,
    /// Hidden layers followed by the output layer.
    pub classifier: Vec<Dense<T>>,
}

impl<T: Real> ModelParams<T> {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = SeededRng::derived(seed, &[0x1417]);
        let momentum = T::lit(config.bn_momentum);
        let eps = T::lit(config.bn_eps);

        let mut width = config.in_features;
        let encoder = config
            .encoder_widths
            .iter()
            .map(|&w| {
                let layer = EncoderLayer {
                    dense: Dense::init(width, w, &mut rng),
                    bn: BatchNorm::new(w, momentum, eps),
                    w_max: Tensor::zeros(&[w]),
                };
                width = w;
                layer
            })
            .collect();
        let reduce = config
            .reduce_widths
            .iter()
            .map(|&w| {
                let layer = ReduceLayer {
                    dense: Dense::init(width, w, &mut rng),
                    bn: BatchNorm::new(w, momentum, eps),
                };
                width = w;
                layer
            })
            .collect();
        let gat = config
            .gat_head_widths
            .iter()
            .map(|&w| {
                let heads = (0..config.gat_heads)
                    .map(|_| AttentionHead {
                        w: Tensor::glorot(&[width, w], width, w, &mut rng),
                        a: Tensor::glorot(&[2 * w], 2 * w, 1, &mut rng),
                    })
                    .collect();
                width = w * config.gat_heads;
                GatLayer { heads }
            })
            .collect();
        let mut classifier = Vec::new();
        for &w in config.classifier_widths.iter().chain(std::iter::once(&config.n_classes)) {
            classifier.push(Dense::init(width, w, &mut rng));
            width = w;
        }
        Ok(Self {
            config: config.clone(),
            encoder,
            reduce,
            gat,
            classifier,
        })
    }

    /// Every tensor with a stable name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, ParamKind, &Tensor<T>)> {
        let mut out = Vec::new();
        let t = ParamKind::Trainable;
        let r = ParamKind::RunningStat;
        for (i, l) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.{i}.w"), t, &l.dense.w));
            out.push((format!("encoder.{i}.b"), t, &l.dense.b));
            out.push((format!("encoder.{i}.bn.gamma"), t, &l.bn.gamma));
            out.push((format!("encoder.{i}.bn.beta"), t, &l.bn.beta));
            out.push((format!("encoder.{i}.bn.running_mean"), r, &l.bn.running_mean));
            out.push((format!("encoder.{i}.bn.running_var"), r, &l.bn.running_var));
            out.push((format!("encoder.{i}.w_max"), t, &l.w_max));
        }
        for (i, l) in self.reduce.iter().enumerate() {
            out.push((format!("reduce.{i}.w"), t, &l.dense.w));
            out.push((format!("reduce.{i}.b"), t, &l.dense.b));
            out.push((format!("reduce.{i}.bn.gamma"), t, &l.bn.gamma));
            out.push((format!("reduce.{i}.bn.beta"), t, &l.bn.beta));
            out.push((format!("reduce.{i}.bn.running_mean"), r, &l.bn.running_mean));
            out.push((format!("reduce.{i}.bn.running_var"), r, &l.bn.running_var));
        }
        for (i, l) in self.gat.iter().enumerate() {
            for (h, head) in l.heads.iter().enumerate() {
                out.push((format!("gat.{i}.head.{h}.w"), t, &head.w));
                out.push((format!("gat.{i}.head.{h}.a"), t, &head.a));
            }
        }
        for (i, l) in self.classifier.iter().enumerate() {
            out.push((format!("classifier.{i}.w"), t, &l.w));
            out.push((format!("classifier.{i}.b"), t, &l.b));
        }
        out
    }

    /// Mutable tensors in the same order as [`Self::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(ParamKind, &mut Tensor<T>)> {
        let mut out = Vec::new();
        let t = ParamKind::Trainable;
        let r = ParamKind::RunningStat;
        for l in self.encoder.iter_mut() {
            out.push((t, &mut l.dense.w));
            out.push((t, &mut l.dense.b));
            out.push((t, &mut l.bn.gamma));
            out.push((t, &mut l.bn.beta));
            out.push((r, &mut l.bn.running_mean));
            out.push((r, &mut l.bn.running_var));
            out.push((t, &mut l.w_max));
        }
        for l in self.reduce.iter_mut() {
            out.push((t, &mut l.dense.w));
            out.push((t, &mut l.dense.b));
            out.push((t, &mut l.bn.gamma));
            out.push((t, &mut l.bn.beta));
            out.push((r, &mut l.bn.running_mean));
            out.push((r, &mut l.bn.running_var));
        }
        for l in self.gat.iter_mut() {
            for head in l.heads.iter_mut() {
                out.push((t, &mut head.w));
                out.push((t, &mut head.a));
            }
        }
        for l in self.classifier.iter_mut() {
            out.push((t, &mut l.w));
            out.push((t, &mut l.b));
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.tensors_mut()
            .into_iter()
            .filter(|(k, _)| *k == ParamKind::Trainable)
            .map(|(_, t)| t)
            .collect()
    }

    pub fn zero_grad(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.zero_grad();
        }
    }

    pub fn n_trainable(&self) -> usize {
        self.named_tensors()
            .into_iter()
            .filter(|(_, k, _)| *k == ParamKind::Trainable)
            .map(|(_, _, t)| t.len())
            .sum()
    }
}
