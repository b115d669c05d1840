use std::collections::BTreeMap;

use super::text::{parse_enum, Reader, Writer};
use super::FormatError;
use crate::gnn::{ModelConfig, ModelParams};
use crate::scalar::Real;
use crate::train::TrainConfig;

pub const CHECKPOINT_MAGIC: &str = "partgnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters (running statistics included) and the training
/// configuration that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub params: ModelParams<T>,
    pub train: TrainConfig,
}

pub fn save_checkpoint<T: Real>(c: &Checkpoint<T>) -> String {
    let m = &c.params.config;
    let t = &c.train;
    let mut w = Writer::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
    w.line("model.in_features", [m.in_features]);
    w.line("model.encoder_widths", &m.encoder_widths);
    w.line("model.reduce_widths", &m.reduce_widths);
    w.line("model.gat_heads", [m.gat_heads]);
    w.line("model.gat_head_widths", &m.gat_head_widths);
    w.line("model.classifier_widths", &m.classifier_widths);
    w.line("model.n_classes", [m.n_classes]);
    w.line("model.pooling", [m.pooling.as_str()]);
    w.line("model.max_parts", [m.max_parts]);
    w.line("model.leaky_slope", [m.leaky_slope]);
    w.line("model.bn_momentum", [m.bn_momentum]);
    w.line("model.bn_eps", [m.bn_eps]);
    w.line("train.optimizer", [t.optimizer.as_str()]);
    w.line("train.learning_rate", [t.learning_rate]);
    w.line("train.batch_size", [t.batch_size]);
    w.line("train.epochs", [t.epochs]);
    w.line("train.disconnect_rate", [t.disconnect_rate]);
    w.line("train.seed", [t.seed]);
    w.line("train.lrf_mode", [t.lrf_mode.as_str()]);
    w.line("train.include_angle", [t.include_angle]);
    w.line("train.pooling", [t.pooling.as_str()]);
    w.line("train.threshold_scale_eval", [t.threshold_scale_eval]);
    w.line(
        "train.class_threshold_scale",
        t.class_threshold_scale.iter().map(|(k, v)| format!("{k}:{v}")),
    );
    match t.stop_at {
        Some((a, b)) => w.line("train.stop_at", [a, b]),
        None => w.line::<f64>("train.stop_at", []),
    }
    let tensors = c.params.named_tensors();
    w.line("tensors", [tensors.len()]);
    for (name, _, tensor) in tensors {
        let shape = tensor.shape();
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        w.line(&format!("tensor {name}"), dims);
        let cols = shape.last().copied().unwrap_or(1).max(1);
        for row in tensor.data().chunks(cols) {
            w.out.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
            w.out.push('\n');
        }
    }
    w.finish()
}

fn parse_model_config(r: &mut Reader) -> Result<ModelConfig, FormatError> {
    Ok(ModelConfig {
        in_features: r.value("model.in_features")?,
        encoder_widths: r.values("model.encoder_widths")?,
        reduce_widths: r.values("model.reduce_widths")?,
        gat_heads: r.value("model.gat_heads")?,
        gat_head_widths: r.values("model.gat_head_widths")?,
        classifier_widths: r.values("model.classifier_widths")?,
        n_classes: r.value("model.n_classes")?,
        pooling: {
            let s = r.expect("model.pooling")?;
            parse_enum(r, s)?
        },
        max_parts: r.value("model.max_parts")?,
        leaky_slope: r.value("model.leaky_slope")?,
        bn_momentum: r.value("model.bn_momentum")?,
        bn_eps: r.value("model.bn_eps")?,
    })
}

fn parse_train_config(r: &mut Reader) -> Result<TrainConfig, FormatError> {
    let optimizer = {
        let s = r.expect("train.optimizer")?;
        parse_enum(r, s)?
    };
    let learning_rate = r.value("train.learning_rate")?;
    let batch_size = r.value("train.batch_size")?;
    let epochs = r.value("train.epochs")?;
    let disconnect_rate = r.value("train.disconnect_rate")?;
    let seed = r.value("train.seed")?;
    let lrf_mode = {
        let s = r.expect("train.lrf_mode")?;
        parse_enum(r, s)?
    };
    let include_angle = {
        let s = r.expect("train.include_angle")?;
        super::text::parse_bool(r, s)?
    };
    let pooling = {
        let s = r.expect("train.pooling")?;
        parse_enum(r, s)?
    };
    let threshold_scale_eval = r.value("train.threshold_scale_eval")?;
    let mut class_threshold_scale = BTreeMap::new();
    for item in r.expect("train.class_threshold_scale")?.split_whitespace() {
        let (k, v) = item
            .split_once(':')
            .ok_or_else(|| r.err(format!("expected class:scale, found `{item}`")))?;
        class_threshold_scale.insert(r.parse_one(k)?, r.parse_one(v)?);
    }
    let stop: Vec<f64> = r.values("train.stop_at")?;
    let stop_at = match stop.as_slice() {
        [] => None,
        [a, b] => Some((*a, *b)),
        _ => return Err(r.err("train.stop_at needs zero or two values")),
    };
    Ok(TrainConfig {
        optimizer,
        learning_rate,
        batch_size,
        epochs,
        disconnect_rate,
        seed,
        lrf_mode,
        include_angle,
        pooling,
        threshold_scale_eval,
        class_threshold_scale,
        stop_at,
    })
}

/// Parses a checkpoint, checking every tensor name and shape against the
/// architecture its model config describes.
pub fn load_checkpoint<T: Real>(text: &str) -> Result<Checkpoint<T>, FormatError> {
    let mut r = Reader::open(text, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let config = parse_model_config(&mut r)?;
    let train = parse_train_config(&mut r)?;
    let mut params = ModelParams::init(&config, 0).map_err(|e| r.err(e.to_string()))?;
    let names: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, _, t)| (n, t.shape().to_vec()))
        .collect();
    let count: usize = r.value("tensors")?;
    if count != names.len() {
        return Err(FormatError::Shape {
            name: "tensors".into(),
            expected: vec![names.len()],
            got: vec![count],
        });
    }
    for ((name, shape), (_, tensor)) in names.iter().zip(params.tensors_mut()) {
        let rest = r.expect("tensor")?;
        let mut it = rest.split_whitespace();
        let found = it.next().unwrap_or("");
        if found != name {
            return Err(r.err(format!("expected tensor `{name}`, found `{found}`")));
        }
        let dims: Vec<usize> = r.parse_all(&it.collect::<Vec<_>>().join(" "))?;
        if &dims != shape {
            return Err(FormatError::Shape {
                name: name.clone(),
                expected: shape.clone(),
                got: dims,
            });
        }
        let cols = shape.last().copied().unwrap_or(1).max(1);
        let rows = tensor.len().div_ceil(cols);
        let data: Vec<T> = r.matrix(rows, cols)?;
        tensor.data_mut().copy_from_slice(&data);
    }
    r.finish()?;
    Ok(Checkpoint { params, train })
}
