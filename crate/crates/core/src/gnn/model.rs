use super::{gat_layer_backward, gat_layer_forward, AdjacencyMask, GatCache, ModelError, ModelParams, Pooling};
use crate::features::PartPointSet;
use crate::nn::{
    batch_norm_backward, batch_norm_forward, cross_entropy, cross_entropy_logit_grad, dense_backward, dense_forward,
    relu_backward, relu_forward, segment_max_backward, segment_max_forward, softmax_rows,
    weighted_max_subtract_segments_backward, weighted_max_subtract_segments_forward, BatchNorm, BnCache, Mode,
    NnError, Segment, Tensor, WeightedMaxCache,
};
use crate::pipeline::FeaturizedGraph;
use crate::scalar::Real;

/// Stacked point sets of one graph plus its attention mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput<T> {
    /// `[sum of part sizes, in_features]`.
    pub points: Tensor<T>,
    pub part_sizes: Vec<usize>,
    pub mask: AdjacencyMask<T>,
}

impl<T: Real> GraphInput<T> {
    pub fn new(parts: &[PartPointSet<T>], mask: AdjacencyMask<T>) -> Result<Self, ModelError> {
        let cols = parts.first().map_or(0, |p| p.n_columns);
        let mut data = Vec::new();
        let mut sizes = Vec::with_capacity(parts.len());
        for p in parts {
            if p.n_columns != cols {
                return Err(NnError::ShapeMismatch {
                    op: "graph_input",
                    expected: vec![p.n_points(), cols],
                    got: vec![p.n_points(), p.n_columns],
                }
                .into());
            }
            data.extend_from_slice(&p.points);
            sizes.push(p.n_points());
        }
        let rows = sizes.iter().sum();
        if mask.n() != parts.len() {
            return Err(NnError::ShapeMismatch {
                op: "graph_input",
                expected: vec![parts.len(), parts.len()],
                got: mask.bias().shape().to_vec(),
            }
            .into());
        }
        Ok(Self {
            points: Tensor::from_vec(&[rows, cols], data)?,
            part_sizes: sizes,
            mask,
        })
    }

    pub fn from_graph(graph: &FeaturizedGraph<T>) -> Result<Self, ModelError> {
        let mask = AdjacencyMask::from_edges(graph.n_nodes(), &graph.edges);
        Self::new(&graph.parts, mask)
    }

    pub fn n_nodes(&self) -> usize {
        self.part_sizes.len()
    }

    pub fn with_mask(&self, mask: AdjacencyMask<T>) -> Self {
        Self {
            points: self.points.clone(),
            part_sizes: self.part_sizes.clone(),
            mask,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphOutput<T> {
    /// Object class probabilities.
    pub probs: Vec<T>,
    /// `[n, n_classes]` per-node probabilities (SingleNode only).
    pub node_probs: Option<Tensor<T>>,
}

impl<T: Real> GraphOutput<T> {
    /// Most probable class, lowest index on ties.
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
struct BnStage<T> {
    input: Tensor<T>,
    bn_out: Tensor<T>,
    bn: BnCache<T>,
}

#[derive(Clone, Debug)]
struct EncoderStage<T> {
    stage: BnStage<T>,
    wmax: WeightedMaxCache<T>,
}

#[derive(Clone, Debug)]
struct ClassifierStage<T> {
    input: Tensor<T>,
    /// Pre-activation of each layer.
    pre: Vec<Tensor<T>>,
    inputs: Vec<Tensor<T>>,
}

#[derive(Clone, Debug)]
struct GraphCache<T> {
    gat: Vec<GatCache<T>>,
    /// Column argmax over nodes (MaxPool).
    pool_argmax: Vec<usize>,
}

/// Outputs of a batched forward pass and everything backward needs.
#[derive(Clone, Debug)]
pub struct ModelForward<T> {
    pub outputs: Vec<GraphOutput<T>>,
    mode: Mode,
    node_offsets: Vec<usize>,
    point_rows: usize,
    encoder: Vec<EncoderStage<T>>,
    part_pool_argmax: Vec<usize>,
    reduce: Vec<BnStage<T>>,
    graphs: Vec<GraphCache<T>>,
    classifier: ClassifierStage<T>,
}

fn bn_pass<T: Real>(x: &Tensor<T>, bn: &BatchNorm<T>, mode: Mode) -> Result<(Tensor<T>, BnCache<T>), NnError> {
    // A single row has no batch statistics; fall back to the running ones.
    let mode = if x.rows() < 2 { Mode::Eval } else { mode };
    batch_norm_forward(x, bn, mode)
}

fn dense_bn_relu<T: Real>(
    x: Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    bn: &BatchNorm<T>,
    mode: Mode,
) -> Result<(Tensor<T>, BnStage<T>), NnError> {
    let z = dense_forward(&x, w, b)?;
    let (bn_out, cache) = bn_pass(&z, bn, mode)?;
    let y = relu_forward(&bn_out);
    Ok((
        y,
        BnStage {
            input: x,
            bn_out,
            bn: cache,
        },
    ))
}

fn rows_slice<T: Real>(x: &Tensor<T>, start: usize, len: usize) -> Tensor<T> {
    let c = x.cols();
    Tensor::from_vec(&[len, c], x.data()[start * c..(start + len) * c].to_vec()).expect("row range")
}

fn stack_rows<T: Real>(parts: &[Tensor<T>], cols: usize) -> Tensor<T> {
    let mut data = Vec::new();
    let mut rows = 0;
    for p in parts {
        data.extend_from_slice(p.data());
        rows += p.rows();
    }
    Tensor::from_vec(&[rows, cols], data).expect("consistent columns")
}

/// Runs the network on a batch of graphs. Batch-norm statistics are taken
/// over every point (encoder) or part (reduction) of the batch.
pub fn forward<T: Real>(
    params: &ModelParams<T>,
    graphs: &[GraphInput<T>],
    mode: Mode,
) -> Result<ModelForward<T>, ModelError> {
    let cfg = &params.config;
    let mut node_offsets = Vec::with_capacity(graphs.len() + 1);
    let mut segments: Vec<Segment> = Vec::new();
    let mut row = 0;
    node_offsets.push(0);
    for (g, graph) in graphs.iter().enumerate() {
        if graph.n_nodes() == 0 {
            return Err(ModelError::EmptyGraph(g));
        }
        graph.points.expect_shape("forward", &[graph.points.rows(), cfg.in_features])?;
        for &s in &graph.part_sizes {
            if s == 0 {
                return Err(NnError::ShapeMismatch {
                    op: "forward",
                    expected: vec![1, cfg.in_features],
                    got: vec![0, cfg.in_features],
                }
                .into());
            }
            segments.push((row, s));
            row += s;
        }
        node_offsets.push(segments.len());
    }
    let point_rows = row;
    let parts: Vec<Tensor<T>> = graphs.iter().map(|g| g.points.clone()).collect();
    let mut x = stack_rows(&parts, cfg.in_features);

    let mut encoder = Vec::with_capacity(params.encoder.len());
    for layer in &params.encoder {
        let (r, stage) = dense_bn_relu(x, &layer.dense.w, &layer.dense.b, &layer.bn, mode)?;
        let (y, wmax) = weighted_max_subtract_segments_forward(&r, &layer.w_max, &segments)?;
        encoder.push(EncoderStage { stage, wmax });
        x = y;
    }
    let (mut h, part_pool_argmax) = segment_max_forward(&x, &segments)?;
    let mut reduce = Vec::with_capacity(params.reduce.len());
    for layer in &params.reduce {
        let (y, stage) = dense_bn_relu(h, &layer.dense.w, &layer.dense.b, &layer.bn, mode)?;
        reduce.push(stage);
        h = y;
    }

    let gw = cfg.graph_feature_width();
    let mut graph_caches = Vec::with_capacity(graphs.len());
    let mut node_feats = Vec::with_capacity(graphs.len());
    let mut pooled = Vec::with_capacity(graphs.len() * gw);
    let slope = T::lit(cfg.leaky_slope);
    for (g, graph) in graphs.iter().enumerate() {
        let (start, end) = (node_offsets[g], node_offsets[g + 1]);
        let mut z = rows_slice(&h, start, end - start);
        let mut gat = Vec::with_capacity(params.gat.len());
        for layer in &params.gat {
            let (y, cache) = gat_layer_forward(&z, &graph.mask, &layer.heads, slope)?;
            gat.push(cache);
            z = y;
        }
        let mut pool_argmax = Vec::new();
        if cfg.pooling == Pooling::MaxPool {
            let (m, am) = segment_max_forward(&z, &[(0, z.rows())])?;
            pooled.extend_from_slice(m.data());
            pool_argmax = am;
        }
        graph_caches.push(GraphCache { gat, pool_argmax });
        node_feats.push(z);
    }
    let cls_input = match cfg.pooling {
        Pooling::MaxPool => Tensor::from_vec(&[graphs.len(), gw], pooled)?,
        Pooling::SingleNode => stack_rows(&node_feats, gw),
    };

    let mut a = cls_input.clone();
    let mut pre = Vec::with_capacity(params.classifier.len());
    let mut inputs = Vec::with_capacity(params.classifier.len());
    for (i, layer) in params.classifier.iter().enumerate() {
        let z = dense_forward(&a, &layer.w, &layer.b)?;
        inputs.push(a);
        a = if i + 1 < params.classifier.len() {
            relu_forward(&z)
        } else {
            z.clone()
        };
        pre.push(z);
    }
    let probs = softmax_rows(&a);
    let c = cfg.n_classes;
    let outputs = (0..graphs.len())
        .map(|g| match cfg.pooling {
            Pooling::MaxPool => GraphOutput {
                probs: probs.row(g).to_vec(),
                node_probs: None,
            },
            Pooling::SingleNode => {
                let (start, end) = (node_offsets[g], node_offsets[g + 1]);
                let node = rows_slice(&probs, start, end - start);
                let inv = T::one() / T::from_count(end - start);
                let mut mean = vec![T::zero(); c];
                for r in 0..node.rows() {
                    mean.iter_mut().zip(node.row(r)).for_each(|(m, &p)| *m += p * inv);
                }
                GraphOutput {
                    probs: mean,
                    node_probs: Some(node),
                }
            }
        })
        .collect();

    Ok(ModelForward {
        outputs,
        mode,
        node_offsets,
        point_rows,
        encoder,
        part_pool_argmax,
        reduce,
        graphs: graph_caches,
        classifier: ClassifierStage {
            input: cls_input,
            pre,
            inputs,
        },
    })
}

impl<T: Real> ModelForward<T> {
    /// Mean cross-entropy over the batch (per-node mean within a graph for
    /// SingleNode).
    pub fn loss(&self, labels: &[usize]) -> Result<T, ModelError> {
        check_labels(labels, self.outputs.len(), self.n_classes())?;
        let mut total = T::zero();
        for (out, &y) in self.outputs.iter().zip(labels) {
            total += match &out.node_probs {
                None => cross_entropy(&out.probs, y),
                Some(np) => {
                    let s: T = (0..np.rows()).map(|r| cross_entropy(np.row(r), y)).sum();
                    s / T::from_count(np.rows())
                }
            };
        }
        Ok(total / T::from_count(labels.len()))
    }

    fn n_classes(&self) -> usize {
        self.outputs.first().map_or(0, |o| o.probs.len())
    }
}

fn check_labels(labels: &[usize], n_graphs: usize, n_classes: usize) -> Result<(), ModelError> {
    if labels.len() != n_graphs {
        return Err(ModelError::LabelCount(labels.len(), n_graphs));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(ModelError::LabelOutOfRange { label, n_classes });
    }
    Ok(())
}

fn bn_stage_backward<T: Real>(
    stage: &BnStage<T>,
    w: &mut Tensor<T>,
    b: &mut Tensor<T>,
    bn: &mut BatchNorm<T>,
    dy: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    let dz = relu_backward(&stage.bn_out, dy);
    let (dbn, dg, dbeta) = batch_norm_backward(&stage.bn, &bn.gamma, &dz)?;
    bn.gamma.accumulate_grad(dg.data());
    bn.beta.accumulate_grad(dbeta.data());
    let g = dense_backward(&stage.input, w, &dbn)?;
    w.accumulate_grad(g.dw.data());
    b.accumulate_grad(g.db.data());
    Ok(g.dx)
}

/// Accumulates parameter gradients of the batch loss (see
/// [`ModelForward::loss`]) into `params` and returns the loss.
pub fn backward<T: Real>(
    params: &mut ModelParams<T>,
    fwd: &ModelForward<T>,
    labels: &[usize],
) -> Result<T, ModelError> {
    let loss = fwd.loss(labels)?;
    let cfg = params.config.clone();
    let c = cfg.n_classes;
    let batch = T::from_count(labels.len());

    let mut dlogits = Vec::new();
    for (out, &y) in fwd.outputs.iter().zip(labels) {
        match &out.node_probs {
            None => dlogits.extend(cross_entropy_logit_grad(&out.probs, y).into_iter().map(|g| g / batch)),
            Some(np) => {
                let scale = T::one() / (batch * T::from_count(np.rows()));
                for r in 0..np.rows() {
                    dlogits.extend(cross_entropy_logit_grad(np.row(r), y).into_iter().map(|g| g * scale));
                }
            }
        }
    }
    let rows = fwd.classifier.input.rows();
    let mut d = Tensor::from_vec(&[rows, c], dlogits)?;
    let n_cls = params.classifier.len();
    for i in (0..n_cls).rev() {
        if i + 1 < n_cls {
            d = relu_backward(&fwd.classifier.pre[i], &d);
        }
        let layer = &mut params.classifier[i];
        let g = dense_backward(&fwd.classifier.inputs[i], &layer.w, &d)?;
        layer.w.accumulate_grad(g.dw.data());
        layer.b.accumulate_grad(g.db.data());
        d = g.dx;
    }

    let nodes_total = *fwd.node_offsets.last().expect("offsets");
    let node_width = cfg.node_feature_width();
    let mut dh = vec![T::zero(); nodes_total * node_width];
    for (g, gc) in fwd.graphs.iter().enumerate() {
        let (start, end) = (fwd.node_offsets[g], fwd.node_offsets[g + 1]);
        let n = end - start;
        let mut dz = match cfg.pooling {
            Pooling::MaxPool => {
                let row = Tensor::from_vec(&[1, d.cols()], d.row(g).to_vec())?;
                segment_max_backward(&gc.pool_argmax, n, &row)
            }
            Pooling::SingleNode => rows_slice(&d, start, n),
        };
        for (layer, cache) in params.gat.iter_mut().zip(&gc.gat).rev() {
            let (dx, grads) = gat_layer_backward(cache, &layer.heads, &dz)?;
            for (head, hg) in layer.heads.iter_mut().zip(grads) {
                head.w.accumulate_grad(hg.dw.data());
                head.a.accumulate_grad(hg.da.data());
            }
            dz = dx;
        }
        dh[start * node_width..end * node_width].copy_from_slice(dz.data());
    }
    let mut d = Tensor::from_vec(&[nodes_total, node_width], dh)?;
    for (layer, stage) in params.reduce.iter_mut().zip(&fwd.reduce).rev() {
        d = bn_stage_backward(stage, &mut layer.dense.w, &mut layer.dense.b, &mut layer.bn, &d)?;
    }
    let mut d = segment_max_backward(&fwd.part_pool_argmax, fwd.point_rows, &d);
    for (layer, stage) in params.encoder.iter_mut().zip(&fwd.encoder).rev() {
        let (dr, dw) = weighted_max_subtract_segments_backward(&stage.wmax, &layer.w_max, &d);
        layer.w_max.accumulate_grad(dw.data());
        d = bn_stage_backward(&stage.stage, &mut layer.dense.w, &mut layer.dense.b, &mut layer.bn, &dr)?;
    }
    Ok(loss)
}

/// Folds the batch statistics of a train-mode pass into the running
/// batch-norm estimates.
pub fn update_running_stats<T: Real>(params: &mut ModelParams<T>, fwd: &ModelForward<T>) {
    if fwd.mode != Mode::Train {
        return;
    }
    for (layer, stage) in params.encoder.iter_mut().zip(&fwd.encoder) {
        layer.bn.update_running(&stage.stage.bn);
    }
    for (layer, stage) in params.reduce.iter_mut().zip(&fwd.reduce) {
        layer.bn.update_running(&stage.bn);
    }
}

/// Reduced feature vector of one part (running statistics in eval mode).
pub fn encode_part<T: Real>(params: &ModelParams<T>, pts: &PartPointSet<T>, mode: Mode) -> Result<Vec<T>, ModelError> {
    let cfg = &params.config;
    if pts.n_columns != cfg.in_features || pts.n_points() == 0 {
        return Err(NnError::ShapeMismatch {
            op: "encode_part",
            expected: vec![pts.n_points().max(1), cfg.in_features],
            got: vec![pts.n_points(), pts.n_columns],
        }
        .into());
    }
    let mut x = Tensor::from_vec(&[pts.n_points(), cfg.in_features], pts.points.clone())?;
    let seg = [(0, pts.n_points())];
    for layer in &params.encoder {
        let (r, _) = dense_bn_relu(x, &layer.dense.w, &layer.dense.b, &layer.bn, mode)?;
        x = weighted_max_subtract_segments_forward(&r, &layer.w_max, &seg)?.0;
    }
    let mut h = segment_max_forward(&x, &seg)?.0;
    for layer in &params.reduce {
        h = dense_bn_relu(h, &layer.dense.w, &layer.dense.b, &layer.bn, mode)?.0;
    }
    Ok(h.into_data())
}

/// Eval-mode prediction for one graph.
pub fn predict<T: Real>(params: &ModelParams<T>, graph: &GraphInput<T>) -> Result<GraphOutput<T>, ModelError> {
    let mut fwd = forward(params, std::slice::from_ref(graph), Mode::Eval)?;
    Ok(fwd.outputs.pop().expect("one graph"))
}
