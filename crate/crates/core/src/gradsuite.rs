//! Finite-difference checks of every layer primitive and the whole network,
//! as run by the `gradcheck` command.

use crate::gnn::{
    backward, forward, gat_layer_backward, gat_layer_forward, AdjacencyMask, AttentionHead, GraphInput, ModelConfig,
    ModelParams, ParamKind, Pooling,
};
use crate::nn::*;
use crate::rng::SeededRng;

/// Tolerance for individual layers.
pub const LAYER_TOLERANCE: f64 = 1e-5;
/// Tolerance for the end-to-end toy model.
pub const MODEL_TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn random(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).expect("shape")
}

/// Uniform in `±[0.05, 1]` so activation kinks are never straddled.
fn away_from_zero(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v = rng.uniform(0.05, 1.0);
            if rng.bernoulli(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape")
}

fn like(t: &Tensor<f64>, d: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), d.to_vec()).expect("shape")
}

fn project(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn check(f: impl FnMut(&[f64]) -> f64, x: &Tensor<f64>, analytic: &Tensor<f64>) -> f64 {
    gradient_check(f, x.data(), analytic.data(), EPS)
}

fn dense(rng: &mut SeededRng) -> f64 {
    let (x, w, b, r) = (random(&[6, 5], rng), random(&[5, 3], rng), random(&[3], rng), random(&[6, 3], rng));
    let g = dense_backward(&x, &w, &r).expect("shapes");
    let fx = |d: &[f64]| project(&dense_forward(&like(&x, d), &w, &b).expect("shapes"), &r);
    let fw = |d: &[f64]| project(&dense_forward(&x, &like(&w, d), &b).expect("shapes"), &r);
    let fb = |d: &[f64]| project(&dense_forward(&x, &w, &like(&b, d)).expect("shapes"), &r);
    check(fx, &x, &g.dx).max(check(fw, &w, &g.dw)).max(check(fb, &b, &g.db))
}

fn batch_norm(mode: Mode, rng: &mut SeededRng) -> f64 {
    let x = random(&[7, 3], rng);
    let mut bn = BatchNorm::new(3, 0.1, 1e-5);
    bn.gamma = random(&[3], rng);
    bn.beta = random(&[3], rng);
    bn.running_mean = random(&[3], rng);
    bn.running_var = Tensor::from_vec(&[3], vec![0.5, 1.0, 2.0]).expect("shape");
    let r = random(&[7, 3], rng);
    let (_, cache) = batch_norm_forward(&x, &bn, mode).expect("shapes");
    let (dx, dg, db) = batch_norm_backward(&cache, &bn.gamma, &r).expect("shapes");
    let fx = |d: &[f64]| project(&batch_norm_forward(&like(&x, d), &bn, mode).expect("shapes").0, &r);
    let fg = |d: &[f64]| {
        let b = BatchNorm { gamma: like(&bn.gamma, d), ..bn.clone() };
        project(&batch_norm_forward(&x, &b, mode).expect("shapes").0, &r)
    };
    let fb = |d: &[f64]| {
        let b = BatchNorm { beta: like(&bn.beta, d), ..bn.clone() };
        project(&batch_norm_forward(&x, &b, mode).expect("shapes").0, &r)
    };
    check(fx, &x, &dx).max(check(fg, &bn.gamma, &dg)).max(check(fb, &bn.beta, &db))
}

fn activation(leaky: bool, rng: &mut SeededRng) -> f64 {
    let x = away_from_zero(&[5, 4], rng);
    let r = random(&[5, 4], rng);
    let f = |t: &Tensor<f64>| if leaky { leaky_relu_forward(t, 0.2) } else { relu_forward(t) };
    let dx = if leaky { leaky_relu_backward(&x, &r, 0.2) } else { relu_backward(&x, &r) };
    check(|d| project(&f(&like(&x, d)), &r), &x, &dx)
}

fn masked_softmax(rng: &mut SeededRng) -> f64 {
    let n = 5;
    let e = random(&[n, n], rng);
    let mut mask = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.bernoulli(0.4) {
                mask.data_mut()[i * n + j] = MASK_OFF;
            }
        }
    }
    let r = random(&[n, n], rng);
    let y = masked_softmax_forward(&e, &mask).expect("shapes");
    let de = masked_softmax_backward(&y, &r);
    check(|d| project(&masked_softmax_forward(&like(&e, d), &mask).expect("shapes"), &r), &e, &de)
}

fn segment_max(rng: &mut SeededRng) -> f64 {
    let x = random(&[9, 3], rng);
    let segs = [(0, 4), (4, 2), (6, 3)];
    let r = random(&[3, 3], rng);
    let (_, argmax) = segment_max_forward(&x, &segs).expect("shapes");
    let dx = segment_max_backward(&argmax, 9, &r);
    check(|d| project(&segment_max_forward(&like(&x, d), &segs).expect("shapes").0, &r), &x, &dx)
}

fn weighted_max(rng: &mut SeededRng) -> f64 {
    let x = random(&[8, 3], rng);
    let w = random(&[3], rng);
    let segs = [(0, 5), (5, 3)];
    let r = random(&[8, 3], rng);
    let (_, cache) = weighted_max_subtract_segments_forward(&x, &w, &segs).expect("shapes");
    let (dx, dw) = weighted_max_subtract_segments_backward(&cache, &w, &r);
    let fx = |d: &[f64]| {
        project(&weighted_max_subtract_segments_forward(&like(&x, d), &w, &segs).expect("shapes").0, &r)
    };
    let fw = |d: &[f64]| {
        project(&weighted_max_subtract_segments_forward(&x, &like(&w, d), &segs).expect("shapes").0, &r)
    };
    check(fx, &x, &dx).max(check(fw, &w, &dw))
}

fn softmax_cross_entropy(rng: &mut SeededRng) -> f64 {
    let logits = random(&[1, 6], rng);
    let label = 2;
    let p = softmax_rows(&logits);
    let g = like(&logits, &cross_entropy_logit_grad(p.row(0), label));
    check(|d| cross_entropy(softmax_rows(&like(&logits, d)).row(0), label), &logits, &g)
}

fn gat(rng: &mut SeededRng) -> f64 {
    let n = 5;
    let mask = AdjacencyMask::from_edges(n, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
    let h = random(&[n, 3], rng);
    let heads: Vec<AttentionHead<f64>> = (0..2)
        .map(|_| AttentionHead {
            w: random(&[3, 2], rng),
            a: random(&[4], rng),
        })
        .collect();
    let r = random(&[n, 4], rng);
    let loss = |h: &Tensor<f64>, hs: &[AttentionHead<f64>]| project(&gat_layer_forward(h, &mask, hs, 0.2).expect("shapes").0, &r);
    let (_, cache) = gat_layer_forward(&h, &mask, &heads, 0.2).expect("shapes");
    let (dh, grads) = gat_layer_backward(&cache, &heads, &r).expect("shapes");
    let mut err = check(|d| loss(&like(&h, d), &heads), &h, &dh);
    for (k, g) in grads.iter().enumerate() {
        let fw = |d: &[f64]| {
            let mut hs = heads.clone();
            hs[k].w = like(&heads[k].w, d);
            loss(&h, &hs)
        };
        let fa = |d: &[f64]| {
            let mut hs = heads.clone();
            hs[k].a = like(&heads[k].a, d);
            loss(&h, &hs)
        };
        err = err.max(check(fw, &heads[k].w, &g.dw)).max(check(fa, &heads[k].a, &g.da));
    }
    err
}

/// Relative error of the analytic parameter gradient of the batch loss,
/// checked coordinate by coordinate over every trainable tensor.
pub fn model_gradient_error(
    mut params: ModelParams<f64>,
    graphs: &[GraphInput<f64>],
    labels: &[usize],
    mode: Mode,
) -> f64 {
    params.zero_grad();
    let fwd = forward(&params, graphs, mode).expect("valid toy input");
    backward(&mut params, &fwd, labels).expect("valid labels");
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let kinds: Vec<ParamKind> = params.tensors_mut().into_iter().map(|(k, _)| k).collect();
    for (t, kind) in kinds.into_iter().enumerate() {
        if kind != ParamKind::Trainable {
            continue;
        }
        let (grad, len) = {
            let (_, tensor) = &params.tensors_mut()[t];
            (tensor.grad_or_zeros(), tensor.len())
        };
        analytic.extend(grad);
        for k in 0..len {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.tensors_mut()[t].1.data_mut()[k] += delta;
                forward(&p, graphs, mode).expect("valid").loss(labels).expect("valid")
            };
            numeric.push((eval(EPS) - eval(-EPS)) / (2.0 * EPS));
        }
    }
    relative_error(&analytic, &numeric)
}

/// Toy architecture with every tensor randomized (running variances kept
/// positive).
pub fn randomized_toy_params(n_classes: usize, pooling: Pooling, seed: u64) -> ModelParams<f64> {
    let mut params = ModelParams::init(&ModelConfig::toy(n_classes, pooling), seed).expect("valid toy config");
    let mut rng = SeededRng::derived(seed, &[0x7e57]);
    for (kind, t) in params.tensors_mut() {
        let (lo, hi) = if kind == ParamKind::Trainable { (-1.0, 1.0) } else { (0.5, 1.5) };
        t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(lo, hi));
    }
    params
}

/// Two parts of four points each, joined by one edge.
pub fn toy_graph(rng: &mut SeededRng) -> GraphInput<f64> {
    GraphInput {
        points: random(&[8, 4], rng),
        part_sizes: vec![4, 4],
        mask: AdjacencyMask::from_edges(2, &[(0, 1)]),
    }
}

fn model(pooling: Pooling, seed: u64, rng: &mut SeededRng) -> f64 {
    let params = randomized_toy_params(3, pooling, seed);
    let graph = toy_graph(rng);
    model_gradient_error(params, &[graph], &[1], Mode::Train)
}

/// Every check with a fixed seed.
pub fn run_gradient_suite(seed: u64) -> Vec<GradReport> {
    let mut rng = SeededRng::derived(seed, &[0x9c]);
    let layer = |name, e| GradReport {
        name,
        max_rel_error: e,
        tolerance: LAYER_TOLERANCE,
    };
    let mut out = vec![
        layer("dense", dense(&mut rng)),
        layer("batch_norm_train", batch_norm(Mode::Train, &mut rng)),
        layer("batch_norm_eval", batch_norm(Mode::Eval, &mut rng)),
        layer("relu", activation(false, &mut rng)),
        layer("leaky_relu", activation(true, &mut rng)),
        layer("masked_softmax", masked_softmax(&mut rng)),
        layer("segment_max_pool", segment_max(&mut rng)),
        layer("weighted_max_subtract", weighted_max(&mut rng)),
        layer("softmax_cross_entropy", softmax_cross_entropy(&mut rng)),
        layer("gat_layer", gat(&mut rng)),
    ];
    for (name, pooling) in [("model_maxpool", Pooling::MaxPool), ("model_singlenode", Pooling::SingleNode)] {
        out.push(GradReport {
            name,
            max_rel_error: model(pooling, seed, &mut rng),
            tolerance: MODEL_TOLERANCE,
        });
    }
    out
}
