//! Training loop, optimizers, metrics, baselines and the synthetic dataset.

mod metrics;
mod optim;
mod synth;
mod trainer;

pub use synth::{generate_synthetic_dataset, random_rotation, synthesize, RotationMode, SynthConfig, SyntheticObject, SYNTH_CLASSES};
pub use metrics::{majority_class_baseline, Metrics};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use trainer::{
    drop_parts, evaluate, evaluate_with_config, train, EpochLog, LabeledGraph, TrainConfig, TrainError, TrainOutcome,
};
