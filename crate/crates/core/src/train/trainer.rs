use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use super::{Metrics, Optimizer, OptimizerConfig, OptimizerKind};
use crate::features::LrfMode;
use crate::gnn::{backward, forward, update_running_stats, GraphInput, ModelError, ModelParams, Pooling};
use crate::nn::Mode;
use crate::pipeline::FeaturizedGraph;
use crate::rng::SeededRng;
use crate::scalar::Real;

const TAG_SHUFFLE: u64 = 1;
const TAG_DISCONNECT: u64 = 2;
const EVAL_CHUNK: usize = 16;

/// A featurized object with its class and the threshold factor it was
/// sampled with.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledGraph<T> {
    pub id: String,
    pub label: usize,
    pub graph: FeaturizedGraph<T>,
    pub threshold_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Graphs per update; gradients are averaged over the batch.
    pub batch_size: usize,
    pub epochs: usize,
    pub disconnect_rate: f64,
    pub seed: u64,
    pub lrf_mode: LrfMode,
    pub include_angle: bool,
    pub pooling: Pooling,
    /// Threshold factor the evaluation set must have been sampled with.
    pub threshold_scale_eval: f64,
    /// Per-class replacements for `threshold_scale_eval`.
    pub class_threshold_scale: BTreeMap<usize, f64>,
    /// Stop once train and validation accuracy both reach these values.
    pub stop_at: Option<(f64, f64)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 50,
            disconnect_rate: 0.0,
            seed: 0,
            lrf_mode: LrfMode::Pca,
            include_angle: true,
            pooling: Pooling::MaxPool,
            threshold_scale_eval: 1.0,
            class_threshold_scale: BTreeMap::new(),
            stop_at: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err("learning rate must be > 0".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err("epochs and batch size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.disconnect_rate) {
            return Err("disconnect rate must be in [0, 1]".into());
        }
        let scales = std::iter::once(&self.threshold_scale_eval).chain(self.class_threshold_scale.values());
        for &s in scales {
            if !(s.is_finite() && s >= 1.0) {
                return Err("threshold scales must be finite and >= 1".into());
            }
        }
        Ok(())
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.optimizer,
            learning_rate: self.learning_rate,
            ..Default::default()
        }
    }

    /// Threshold factor expected for objects of class `label`.
    pub fn eval_scale_for(&self, label: usize) -> f64 {
        self.class_threshold_scale
            .get(&label)
            .copied()
            .unwrap_or(self.threshold_scale_eval)
    }
}

#[derive(Debug, Error)]
pub enum TrainError<T: Real> {
    #[error("{id}: {source}")]
    Model { id: String, source: ModelError },
    #[error(transparent)]
    Batch(#[from] ModelError),
    #[error("empty training set")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("{id}: {n_columns} point columns, model expects {expected}")]
    FeatureMismatch {
        id: String,
        n_columns: usize,
        expected: usize,
    },
    #[error("{id}: sampled with threshold scale {got}, evaluation expects {expected}")]
    ThresholdScaleMismatch { id: String, got: f64, expected: f64 },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    DivergedLoss {
        epoch: usize,
        batch: usize,
        /// Parameters before the diverging update.
        last_good: Box<ModelParams<T>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{:.6}\t{:.4}\t", self.epoch, self.loss, self.train_acc)?;
        match self.val_acc {
            Some(v) => write!(f, "{v:.4}"),
            None => write!(f, "-"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub log: Vec<EpochLog>,
    pub stopped_early: bool,
}

fn inputs<T: Real>(graphs: &[LabeledGraph<T>], expected: usize) -> Result<Vec<GraphInput<T>>, TrainError<T>> {
    graphs
        .iter()
        .map(|g| {
            if let Some(p) = g.graph.parts.iter().find(|p| p.n_columns != expected) {
                return Err(TrainError::FeatureMismatch {
                    id: g.id.clone(),
                    n_columns: p.n_columns,
                    expected,
                });
            }
            GraphInput::from_graph(&g.graph).map_err(|source| TrainError::Model { id: g.id.clone(), source })
        })
        .collect()
}

/// Seeded minibatch training. Each epoch reshuffles, each graph gets a
/// fresh disconnection draw per epoch, batch-norm runs in train mode and
/// its running statistics are folded in after every batch.
pub fn train<T: Real>(
    mut params: ModelParams<T>,
    train_set: &[LabeledGraph<T>],
    val_set: &[LabeledGraph<T>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<T>, TrainError<T>> {
    cfg.validate().map_err(TrainError::InvalidConfig)?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let n_classes = params.config.n_classes;
    if let Some(g) = train_set.iter().chain(val_set).find(|g| g.label >= n_classes) {
        return Err(TrainError::Model {
            id: g.id.clone(),
            source: ModelError::LabelOutOfRange { label: g.label, n_classes },
        });
    }
    let base = inputs(train_set, params.config.in_features)?;
    let val_inputs = inputs(val_set, params.config.in_features)?;
    let train_labels: Vec<usize> = train_set.iter().map(|g| g.label).collect();
    let val_labels: Vec<usize> = val_set.iter().map(|g| g.label).collect();
    let mut opt = Optimizer::new(cfg.optimizer_config());
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..base.len()).collect();
        SeededRng::derived(cfg.seed, &[TAG_SHUFFLE, epoch as u64]).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let graphs: Vec<GraphInput<T>> = batch
                .iter()
                .map(|&i| {
                    let mut rng = SeededRng::derived(cfg.seed, &[TAG_DISCONNECT, epoch as u64, i as u64]);
                    base[i].with_mask(base[i].mask.apply_disconnection(cfg.disconnect_rate, &mut rng))
                })
                .collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train_labels[i]).collect();
            let fwd = forward(&params, &graphs, Mode::Train)?;
            let loss = fwd.loss(&labels)?;
            if !loss.is_finite() {
                return Err(TrainError::DivergedLoss {
                    epoch,
                    batch: b,
                    last_good: Box::new(params),
                });
            }
            params.zero_grad();
            backward(&mut params, &fwd, &labels)?;
            update_running_stats(&mut params, &fwd);
            opt.step(&mut params);
            loss_sum += loss.as_f64() * batch.len() as f64;
        }
        let train_acc = accuracy(&params, &base, &train_labels)?;
        let val_acc = if val_inputs.is_empty() {
            None
        } else {
            Some(accuracy(&params, &val_inputs, &val_labels)?)
        };
        let entry = EpochLog {
            epoch,
            loss: loss_sum / base.len() as f64,
            train_acc,
            val_acc,
        };
        on_epoch(&entry);
        log.push(entry);
        if let Some((tr, va)) = cfg.stop_at {
            if train_acc >= tr && val_acc.is_none_or(|v| v >= va) {
                stopped_early = epoch + 1 < cfg.epochs;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params,
        log,
        stopped_early,
    })
}

fn predictions<T: Real>(params: &ModelParams<T>, graphs: &[GraphInput<T>]) -> Result<Vec<usize>, ModelError> {
    let chunks: Vec<Vec<usize>> = graphs
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let fwd = forward(params, chunk, Mode::Eval)?;
            Ok(fwd.outputs.iter().map(|o| o.predicted()).collect())
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(chunks.concat())
}

fn accuracy<T: Real>(params: &ModelParams<T>, graphs: &[GraphInput<T>], labels: &[usize]) -> Result<f64, ModelError> {
    let pred = predictions(params, graphs)?;
    Ok(Metrics::from_predictions(labels, &pred, params.config.n_classes).accuracy)
}

/// Eval-mode metrics; consumes no randomness.
pub fn evaluate<T: Real>(params: &ModelParams<T>, dataset: &[LabeledGraph<T>]) -> Result<Metrics, TrainError<T>> {
    let n_classes = params.config.n_classes;
    if let Some(g) = dataset.iter().find(|g| g.label >= n_classes) {
        return Err(TrainError::Model {
            id: g.id.clone(),
            source: ModelError::LabelOutOfRange { label: g.label, n_classes },
        });
    }
    let graphs = inputs(dataset, params.config.in_features)?;
    let labels: Vec<usize> = dataset.iter().map(|g| g.label).collect();
    let pred = predictions(params, &graphs)?;
    Ok(Metrics::from_predictions(&labels, &pred, n_classes))
}

/// [`evaluate`] after checking that every object was re-sampled with the
/// threshold factor the config asks for.
pub fn evaluate_with_config<T: Real>(
    params: &ModelParams<T>,
    dataset: &[LabeledGraph<T>],
    cfg: &TrainConfig,
) -> Result<Metrics, TrainError<T>> {
    for g in dataset {
        let expected = cfg.eval_scale_for(g.label);
        if g.threshold_scale != expected {
            return Err(TrainError::ThresholdScaleMismatch {
                id: g.id.clone(),
                got: g.threshold_scale,
                expected,
            });
        }
    }
    evaluate(params, dataset)
}

/// Keeps a random `1 - fraction` of the parts (at least one) and the edges
/// among them.
pub fn drop_parts<T: Real>(graph: &FeaturizedGraph<T>, fraction: f64, rng: &mut SeededRng) -> FeaturizedGraph<T> {
    let n = graph.n_nodes();
    if n == 0 {
        return graph.clone();
    }
    let keep_n = ((n as f64 * (1.0 - fraction)).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut keep = order[..keep_n].to_vec();
    keep.sort_unstable();
    graph.induced(&keep)
}
