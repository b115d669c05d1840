mod common;

use partgnn::features::LrfMode;
use partgnn::gnn::{backward, forward, update_running_stats, GraphInput, ModelConfig, ModelParams, Pooling};
use partgnn::nn::Mode;
use partgnn::rng::SeededRng;
use partgnn::train::{evaluate, train, LabeledGraph, Metrics, Optimizer, TrainConfig, TrainError};
use proptest::prelude::*;

use common::synthetic_set;

fn eight_graphs() -> Vec<LabeledGraph<f64>> {
    synthetic_set(3, 2, 32, 8, LrfMode::Pca)
}

fn params(pooling: Pooling) -> ModelParams<f64> {
    ModelParams::init(&ModelConfig { pooling, ..ModelConfig::standard(4) }, 0).unwrap()
}

fn bits(p: &ModelParams<f64>) -> Vec<u64> {
    p.named_tensors()
        .iter()
        .flat_map(|(_, _, t)| t.data().iter().map(|v| v.to_bits()))
        .collect()
}

#[test]
fn loss_halves_on_eight_graphs() {
    let data = eight_graphs();
    assert_eq!(data.len(), 8);
    for pooling in [Pooling::MaxPool, Pooling::SingleNode] {
        let cfg = TrainConfig { pooling, ..Default::default() };
        let out = train(params(pooling), &data, &[], &cfg, |_| {}).unwrap();
        assert_eq!(out.log.len(), 50);
        let (first, last) = (out.log[0].loss, out.log[49].loss);
        assert!(last < 0.5 * first, "{pooling:?}: {first} -> {last}");
    }
}

#[test]
fn rate_zero_matches_plain_training_step_for_step() {
    let data = eight_graphs();
    let cfg = TrainConfig { epochs: 3, batch_size: 3, seed: 11, ..Default::default() };
    let trained = train(params(Pooling::MaxPool), &data, &[], &cfg, |_| {}).unwrap().params;

    let mut p = params(Pooling::MaxPool);
    let mut opt = Optimizer::new(cfg.optimizer_config());
    let inputs: Vec<GraphInput<f64>> = data.iter().map(|g| GraphInput::from_graph(&g.graph).unwrap()).collect();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        SeededRng::derived(cfg.seed, &[1, epoch as u64]).shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let graphs: Vec<GraphInput<f64>> = batch.iter().map(|&i| inputs[i].clone()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| data[i].label).collect();
            let fwd = forward(&p, &graphs, Mode::Train).unwrap();
            p.zero_grad();
            backward(&mut p, &fwd, &labels).unwrap();
            update_running_stats(&mut p, &fwd);
            opt.step(&mut p);
        }
    }
    assert_eq!(bits(&trained), bits(&p));
}

#[test]
fn disconnection_changes_training() {
    let data = eight_graphs();
    let run = |rate| {
        let cfg = TrainConfig { epochs: 2, disconnect_rate: rate, ..Default::default() };
        bits(&train(params(Pooling::SingleNode), &data, &[], &cfg, |_| {}).unwrap().params)
    };
    assert_eq!(run(0.5), run(0.5));
    assert_ne!(run(0.0), run(0.5));
}

#[test]
fn evaluation_is_deterministic_and_consistent() {
    let data = eight_graphs();
    let cfg = TrainConfig { epochs: 2, ..Default::default() };
    let p = train(params(Pooling::MaxPool), &data, &[], &cfg, |_| {}).unwrap().params;
    let a = evaluate(&p, &data).unwrap();
    let b = evaluate(&p, &data).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.total(), data.len());
    assert!((0.0..=1.0).contains(&a.accuracy) && (0.0..=1.0).contains(&a.class_accuracy));
}

#[test]
fn early_stop_and_epoch_log() {
    let data = eight_graphs();
    let cfg = TrainConfig { stop_at: Some((0.0, 0.0)), ..Default::default() };
    let mut seen = Vec::new();
    let out = train(params(Pooling::MaxPool), &data, &data, &cfg, |e| seen.push(e.to_string())).unwrap();
    assert!(out.stopped_early);
    assert_eq!(out.log.len(), 1);
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].split('\t').count(), 4);
}

#[test]
fn non_finite_loss_reports_last_good_params() {
    let data = eight_graphs();
    let mut p = params(Pooling::MaxPool);
    let good = bits(&p);
    let last = p.classifier.len() - 1;
    p.classifier[last].w.data_mut()[0] = f64::NAN;
    let poisoned = bits(&p);
    assert_ne!(good, poisoned);
    match train(p, &data, &[], &TrainConfig::default(), |_| {}) {
        Err(TrainError::DivergedLoss { epoch, batch, last_good }) => {
            assert_eq!((epoch, batch), (0, 0));
            assert_eq!(bits(&last_good), poisoned);
        }
        other => panic!("expected divergence, got {:?}", other.map(|o| o.log)),
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let data = eight_graphs();
    let p = params(Pooling::MaxPool);
    assert!(matches!(train(p.clone(), &[], &[], &TrainConfig::default(), |_| {}), Err(TrainError::EmptyDataset)));
    let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
    assert!(matches!(train(p.clone(), &data, &[], &bad, |_| {}), Err(TrainError::InvalidConfig(_))));
    let wide = ModelParams::init(&ModelConfig { in_features: 3, ..ModelConfig::standard(4) }, 0).unwrap();
    assert!(matches!(
        train(wide, &data, &[], &TrainConfig::default(), |_| {}),
        Err(TrainError::FeatureMismatch { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn metrics_are_bounded_and_total(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60)) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let m = Metrics::from_predictions(&truth, &pred, 5);
        prop_assert_eq!(m.total(), pairs.len());
        prop_assert!((0.0..=1.0).contains(&m.accuracy));
        prop_assert!((0.0..=1.0).contains(&m.class_accuracy));
        let trace: usize = (0..5).map(|c| m.confusion[c][c]).sum();
        prop_assert!((m.accuracy - trace as f64 / pairs.len() as f64).abs() < 1e-15);
    }
}
