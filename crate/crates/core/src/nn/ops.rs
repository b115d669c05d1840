use super::{shape_err, Mode, NnError, Tensor};
use crate::scalar::Real;

/// Bias value for disconnected pairs in an attention mask.
pub const MASK_OFF: f64 = -1e9;
/// Entries at or below this are treated as masked.
const MASKED_BELOW: f64 = -1e8;

/// `a[n x k] * b[k x m]`.
pub fn matmul<T: Real>(a: &[T], n: usize, k: usize, b: &[T], m: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    let mut out = vec![T::zero(); n * m];
    for (arow, orow) in a.chunks_exact(k.max(1)).zip(out.chunks_exact_mut(m.max(1))) {
        for (&aik, brow) in arow.iter().zip(b.chunks_exact(m.max(1))) {
            if aik != T::zero() {
                axpy(aik, brow, orow);
            }
        }
    }
    out
}

/// `a^T * b` for `a[n x k]`, `b[n x m]`.
pub fn matmul_tn<T: Real>(a: &[T], n: usize, k: usize, b: &[T], m: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), n * m);
    let mut out = vec![T::zero(); k * m];
    for (arow, brow) in a.chunks_exact(k.max(1)).zip(b.chunks_exact(m.max(1))) {
        for (&aik, orow) in arow.iter().zip(out.chunks_exact_mut(m.max(1))) {
            if aik != T::zero() {
                axpy(aik, brow, orow);
            }
        }
    }
    out
}

/// `a * b^T` for `a[n x m]`, `b[k x m]`.
pub fn matmul_nt<T: Real>(a: &[T], n: usize, m: usize, b: &[T], k: usize) -> Vec<T> {
    matmul(a, n, m, &transpose(b, k, m), k)
}

pub fn transpose<T: Real>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn column_sums<T: Real>(x: &[T], cols: usize) -> Vec<T> {
    let mut s = vec![T::zero(); cols];
    for row in x.chunks_exact(cols.max(1)) {
        for (a, &b) in s.iter_mut().zip(row) {
            *a += b;
        }
    }
    s
}

fn matrix<T: Real>(rows: usize, cols: usize, data: Vec<T>) -> Tensor<T> {
    Tensor::from_vec(&[rows, cols], data).expect("shape by construction")
}

fn vector<T: Real>(data: Vec<T>) -> Tensor<T> {
    let n = data.len();
    Tensor::from_vec(&[n], data).expect("shape by construction")
}

fn require_2d<T: Real>(op: &'static str, x: &Tensor<T>) -> Result<(usize, usize), NnError> {
    if x.shape().len() == 2 {
        Ok((x.shape()[0], x.shape()[1]))
    } else {
        Err(shape_err(op, &[0, 0], x.shape()))
    }
}

// ---------------------------------------------------------------- dense

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

/// Row-wise `y = x W + b`; the same map applied to every element of a set
/// (a kernel-size-one convolution).
pub fn dense_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, fin) = require_2d("dense", x)?;
    let (win, fout) = require_2d("dense", w)?;
    if win != fin {
        return Err(shape_err("dense", &[fin, fout], w.shape()));
    }
    b.expect_shape("dense", &[fout])?;
    let mut y = matmul(x.data(), n, fin, w.data(), fout);
    for row in y.chunks_exact_mut(fout.max(1)) {
        for (v, &bias) in row.iter_mut().zip(b.data()) {
            *v += bias;
        }
    }
    Ok(matrix(n, fout, y))
}

pub fn dense_backward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, dy: &Tensor<T>) -> Result<DenseGrads<T>, NnError> {
    let (n, fin) = require_2d("dense_backward", x)?;
    let fout = w.cols();
    dy.expect_shape("dense_backward", &[n, fout])?;
    let dw = matmul_tn(x.data(), n, fin, dy.data(), fout);
    let dx = matmul_nt(dy.data(), n, fout, w.data(), fin);
    Ok(DenseGrads {
        dx: matrix(n, fin, dx),
        dw: matrix(fin, fout, dw),
        db: vector(column_sums(dy.data(), fout)),
    })
}

// ---------------------------------------------------------------- batch norm

/// Per-feature scale and shift with running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    /// Weight of the current batch in the running update.
    pub momentum: T,
    pub eps: T,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(features: usize, momentum: T, eps: T) -> Self {
        Self {
            gamma: Tensor::filled(&[features], T::one()),
            beta: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::filled(&[features], T::one()),
            momentum,
            eps,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// estimates (unbiased variance). Eval-mode caches are ignored.
    pub fn update_running(&mut self, cache: &BnCache<T>) {
        if cache.mode != Mode::Train {
            return;
        }
        let m = self.momentum;
        let keep = T::one() - m;
        let n = T::from_count(cache.rows);
        let unbias = n / (n - T::one());
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&cache.mean) {
            *r = keep * *r + m * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(&cache.var) {
            *r = keep * *r + m * b * unbias;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnCache<T> {
    pub x_hat: Tensor<T>,
    pub inv_std: Vec<T>,
    /// Batch mean and biased variance (running values in eval mode).
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub mode: Mode,
    pub rows: usize,
}

pub fn batch_norm_forward<T: Real>(
    x: &Tensor<T>,
    bn: &BatchNorm<T>,
    mode: Mode,
) -> Result<(Tensor<T>, BnCache<T>), NnError> {
    let (n, f) = require_2d("batch_norm", x)?;
    if f != bn.features() {
        return Err(shape_err("batch_norm", &[n, bn.features()], x.shape()));
    }
    let (mean, var) = match mode {
        Mode::Train => {
            if n < 2 {
                return Err(NnError::SingletonBatch(n));
            }
            let inv_n = T::one() / T::from_count(n);
            let mean: Vec<T> = column_sums(x.data(), f).into_iter().map(|s| s * inv_n).collect();
            let mut var = vec![T::zero(); f];
            for row in x.data().chunks_exact(f) {
                for k in 0..f {
                    let d = row[k] - mean[k];
                    var[k] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v *= inv_n);
            (mean, var)
        }
        Mode::Eval => (bn.running_mean.data().to_vec(), bn.running_var.data().to_vec()),
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + bn.eps).sqrt()).collect();
    let mut x_hat = Vec::with_capacity(n * f);
    let mut y = Vec::with_capacity(n * f);
    for row in x.data().chunks_exact(f) {
        for k in 0..f {
            let h = (row[k] - mean[k]) * inv_std[k];
            x_hat.push(h);
            y.push(bn.gamma.data()[k] * h + bn.beta.data()[k]);
        }
    }
    let cache = BnCache {
        x_hat: matrix(n, f, x_hat),
        inv_std,
        mean,
        var,
        mode,
        rows: n,
    };
    Ok((matrix(n, f, y), cache))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batch_norm_backward<T: Real>(
    cache: &BnCache<T>,
    gamma: &Tensor<T>,
    dy: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>), NnError> {
    let (n, f) = (cache.rows, gamma.len());
    dy.expect_shape("batch_norm_backward", &[n, f])?;
    let mut dgamma = vec![T::zero(); f];
    let mut dbeta = vec![T::zero(); f];
    for (drow, hrow) in dy.data().chunks_exact(f).zip(cache.x_hat.data().chunks_exact(f)) {
        for k in 0..f {
            dgamma[k] += drow[k] * hrow[k];
            dbeta[k] += drow[k];
        }
    }
    let g = gamma.data();
    let mut dx = Vec::with_capacity(n * f);
    match cache.mode {
        Mode::Eval => {
            for drow in dy.data().chunks_exact(f) {
                for k in 0..f {
                    dx.push(drow[k] * g[k] * cache.inv_std[k]);
                }
            }
        }
        Mode::Train => {
            // dx = inv_std / n * (n dxh - sum dxh - x_hat sum(dxh x_hat)), dxh = dy gamma
            let nn = T::from_count(n);
            for (drow, hrow) in dy.data().chunks_exact(f).zip(cache.x_hat.data().chunks_exact(f)) {
                for k in 0..f {
                    let dxh = drow[k] * g[k];
                    let v = (nn * dxh - dbeta[k] * g[k] - hrow[k] * dgamma[k] * g[k]) * cache.inv_std[k] / nn;
                    dx.push(v);
                }
            }
        }
    }
    Ok((matrix(n, f, dx), vector(dgamma), vector(dbeta)))
}

// ---------------------------------------------------------------- activations

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    map(x, |v| v.max(T::zero()))
}

pub fn relu_backward<T: Real>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    zip_map(x, dy, |v, d| if v > T::zero() { d } else { T::zero() })
}

pub fn leaky_relu_forward<T: Real>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    map(x, |v| if v < T::zero() { slope * v } else { v })
}

pub fn leaky_relu_backward<T: Real>(x: &Tensor<T>, dy: &Tensor<T>, slope: T) -> Tensor<T> {
    zip_map(x, dy, |v, d| if v < T::zero() { slope * d } else { d })
}

fn map<T: Real>(x: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    Tensor::from_vec(x.shape(), x.data().iter().map(|&v| f(v)).collect()).expect("same shape")
}

fn zip_map<T: Real>(x: &Tensor<T>, dy: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    assert_eq!(x.shape(), dy.shape(), "activation gradient shape");
    Tensor::from_vec(x.shape(), x.data().iter().zip(dy.data()).map(|(&v, &d)| f(v, d)).collect())
        .expect("same shape")
}

// ---------------------------------------------------------------- masked softmax

/// Row-wise softmax of `e + bias_mask`, stabilized by the row maximum.
/// A row whose every entry is masked puts all weight on its diagonal.
pub fn masked_softmax_forward<T: Real>(e: &Tensor<T>, bias_mask: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, m) = require_2d("masked_softmax", e)?;
    bias_mask.expect_shape("masked_softmax", &[n, m])?;
    let masked_below = T::lit(MASKED_BELOW);
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        let mrow = bias_mask.row(i);
        let orow = &mut out[i * m..(i + 1) * m];
        if mrow.iter().all(|&b| b <= masked_below) {
            if i < m {
                orow[i] = T::one();
            }
            continue;
        }
        let erow = e.row(i);
        let z: Vec<T> = erow.iter().zip(mrow).map(|(&a, &b)| a + b).collect();
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (o, &v) in orow.iter_mut().zip(&z) {
            *o = (v - max).exp();
            sum += *o;
        }
        orow.iter_mut().for_each(|o| *o /= sum);
    }
    Ok(matrix(n, m, out))
}

/// Gradient w.r.t. the logits given the softmax output `y`.
pub fn masked_softmax_backward<T: Real>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let m = y.cols();
    let mut de = Vec::with_capacity(y.len());
    for (yrow, drow) in y.data().chunks_exact(m).zip(dy.data().chunks_exact(m)) {
        let inner: T = yrow.iter().zip(drow).map(|(&a, &b)| a * b).sum();
        de.extend(yrow.iter().zip(drow).map(|(&a, &b)| a * (b - inner)));
    }
    matrix(y.rows(), m, de)
}

// ---------------------------------------------------------------- set pooling

/// Row range `start..start + len` of a stacked tensor holding one set.
pub type Segment = (usize, usize);

/// Column-wise maximum of each segment; returns `[segments, f]` and the
/// winning global row per output entry (first row on ties).
pub fn segment_max_forward<T: Real>(x: &Tensor<T>, segments: &[Segment]) -> Result<(Tensor<T>, Vec<usize>), NnError> {
    let (n, f) = require_2d("max_pool", x)?;
    let mut out = Vec::with_capacity(segments.len() * f);
    let mut argmax = Vec::with_capacity(segments.len() * f);
    for &(start, len) in segments {
        if len == 0 || start + len > n {
            return Err(shape_err("max_pool", &[start + len.max(1)], &[n]));
        }
        let mut best: Vec<T> = x.row(start).to_vec();
        let mut best_row = vec![start; f];
        for r in start + 1..start + len {
            for (k, &v) in x.row(r).iter().enumerate() {
                if v > best[k] {
                    best[k] = v;
                    best_row[k] = r;
                }
            }
        }
        out.extend(best);
        argmax.extend(best_row);
    }
    Ok((matrix(segments.len(), f, out), argmax))
}

pub fn segment_max_backward<T: Real>(argmax: &[usize], rows: usize, dy: &Tensor<T>) -> Tensor<T> {
    let f = dy.cols();
    let mut dx = vec![T::zero(); rows * f];
    for (idx, (&r, &g)) in argmax.iter().zip(dy.data()).enumerate() {
        dx[r * f + idx % f] += g;
    }
    matrix(rows, f, dx)
}

/// Column-wise maximum over all rows of a single set.
pub fn set_maxpool_forward<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>), NnError> {
    let (out, argmax) = segment_max_forward(x, &[(0, x.rows())])?;
    Ok((vector(out.into_data()), argmax))
}

pub fn set_maxpool_backward<T: Real>(argmax: &[usize], rows: usize, dy: &Tensor<T>) -> Tensor<T> {
    let dy = matrix(1, dy.len(), dy.data().to_vec());
    segment_max_backward(argmax, rows, &dy)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMaxCache<T> {
    pub segments: Vec<Segment>,
    /// Per segment and column, the winning row and the maximum value.
    pub argmax: Vec<usize>,
    pub max: Vec<T>,
}

/// `y[i,k] = x[i,k] - w[k] * max_{j in set(i)} x[j,k]` for every segment.
pub fn weighted_max_subtract_segments_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    segments: &[Segment],
) -> Result<(Tensor<T>, WeightedMaxCache<T>), NnError> {
    let (_, f) = require_2d("weighted_max_subtract", x)?;
    w.expect_shape("weighted_max_subtract", &[f])?;
    let (maxes, argmax) = segment_max_forward(x, segments)?;
    let mut y = x.data().to_vec();
    for (s, &(start, len)) in segments.iter().enumerate() {
        let mrow = maxes.row(s);
        for row in y[start * f..(start + len) * f].chunks_exact_mut(f) {
            for k in 0..f {
                row[k] -= w.data()[k] * mrow[k];
            }
        }
    }
    let cache = WeightedMaxCache {
        segments: segments.to_vec(),
        argmax,
        max: maxes.into_data(),
    };
    Ok((matrix(x.rows(), f, y), cache))
}

/// Returns `(dx, dw)`.
pub fn weighted_max_subtract_segments_backward<T: Real>(
    cache: &WeightedMaxCache<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let f = w.len();
    let mut dx = dy.data().to_vec();
    let mut dw = vec![T::zero(); f];
    for (s, &(start, len)) in cache.segments.iter().enumerate() {
        let sums = column_sums(&dy.data()[start * f..(start + len) * f], f);
        for k in 0..f {
            let r = cache.argmax[s * f + k];
            dx[r * f + k] -= w.data()[k] * sums[k];
            dw[k] -= cache.max[s * f + k] * sums[k];
        }
    }
    (matrix(dy.rows(), f, dx), vector(dw))
}

pub fn weighted_max_subtract_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
) -> Result<(Tensor<T>, WeightedMaxCache<T>), NnError> {
    weighted_max_subtract_segments_forward(x, w, &[(0, x.rows())])
}

pub fn weighted_max_subtract_backward<T: Real>(
    cache: &WeightedMaxCache<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    weighted_max_subtract_segments_backward(cache, w, dy)
}

// ---------------------------------------------------------------- softmax + cross entropy

/// Plain row-wise softmax.
pub fn softmax_rows<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let zero_mask = Tensor::zeros(logits.shape());
    masked_softmax_forward(logits, &zero_mask).expect("2-D logits")
}

/// Probability floor inside the log.
pub const MIN_PROB: f64 = 1e-12;

/// `-ln(max(p[label], 1e-12))`; a NaN probability stays NaN.
pub fn cross_entropy<T: Real>(probs: &[T], label: usize) -> T {
    let p = probs[label];
    if p.is_nan() {
        return p;
    }
    -p.max(T::lit(MIN_PROB)).ln()
}

/// Gradient of softmax cross-entropy w.r.t. the logits: `p - onehot(label)`.
pub fn cross_entropy_logit_grad<T: Real>(probs: &[T], label: usize) -> Vec<T> {
    let mut g = probs.to_vec();
    g[label] -= T::one();
    g
}
