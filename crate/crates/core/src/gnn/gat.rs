use super::{AdjacencyMask, AttentionHead};
use crate::nn::{
    leaky_relu_backward, leaky_relu_forward, masked_softmax_backward, masked_softmax_forward, matmul, matmul_nt,
    matmul_tn, relu_backward, shape_err, NnError, Tensor,
};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct HeadCache<T> {
    /// `h W`, `[n, width]`.
    pub proj: Tensor<T>,
    /// `a1 . p_i + a2 . p_j` before the LeakyReLU, `[n, n]`.
    pub pre: Tensor<T>,
    /// Attention coefficients, `[n, n]`, rows summing to one.
    pub attn: Tensor<T>,
    /// `attn proj` before the ReLU.
    pub agg: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatCache<T> {
    pub input: Tensor<T>,
    pub heads: Vec<HeadCache<T>>,
    pub slope: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadGrads<T> {
    pub dw: Tensor<T>,
    pub da: Tensor<T>,
}

fn matrix<T: Real>(rows: usize, cols: usize, data: Vec<T>) -> Tensor<T> {
    Tensor::from_vec(&[rows, cols], data).expect("shape by construction")
}

/// One multi-head attention layer; head outputs are concatenated column-wise.
pub fn gat_layer_forward<T: Real>(
    h: &Tensor<T>,
    mask: &AdjacencyMask<T>,
    heads: &[AttentionHead<T>],
    slope: T,
) -> Result<(Tensor<T>, GatCache<T>), NnError> {
    if h.shape().len() != 2 {
        return Err(shape_err("gat_layer", &[mask.n(), 0], h.shape()));
    }
    let (n, fin) = (h.rows(), h.cols());
    if mask.n() != n {
        return Err(shape_err("gat_layer", &[n, n], mask.bias().shape()));
    }
    let total: usize = heads.iter().map(|hd| hd.width()).sum();
    let mut out = vec![T::zero(); n * total];
    let mut caches = Vec::with_capacity(heads.len());
    let mut offset = 0;
    for head in heads {
        let w = head.width();
        head.w.expect_shape("gat_layer", &[fin, w])?;
        head.a.expect_shape("gat_layer", &[2 * w])?;
        let proj = matmul(h.data(), n, fin, head.w.data(), w);
        let (a1, a2) = head.a.data().split_at(w);
        let s1: Vec<T> = proj.chunks_exact(w).map(|p| dot(p, a1)).collect();
        let s2: Vec<T> = proj.chunks_exact(w).map(|p| dot(p, a2)).collect();
        let mut pre = Vec::with_capacity(n * n);
        for &si in &s1 {
            pre.extend(s2.iter().map(|&sj| si + sj));
        }
        let pre = matrix(n, n, pre);
        let e = leaky_relu_forward(&pre, slope);
        let attn = masked_softmax_forward(&e, mask.bias())?;
        let agg = matmul(attn.data(), n, n, &proj, w);
        for i in 0..n {
            for k in 0..w {
                out[i * total + offset + k] = agg[i * w + k].max(T::zero());
            }
        }
        caches.push(HeadCache {
            proj: matrix(n, w, proj),
            pre,
            attn,
            agg: matrix(n, w, agg),
        });
        offset += w;
    }
    let cache = GatCache {
        input: h.clone(),
        heads: caches,
        slope,
    };
    Ok((matrix(n, total, out), cache))
}

/// Returns the input gradient and per-head parameter gradients.
pub fn gat_layer_backward<T: Real>(
    cache: &GatCache<T>,
    heads: &[AttentionHead<T>],
    dout: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<HeadGrads<T>>), NnError> {
    let h = &cache.input;
    let (n, fin) = (h.rows(), h.cols());
    let total: usize = heads.iter().map(|hd| hd.width()).sum();
    dout.expect_shape("gat_layer_backward", &[n, total])?;
    let mut dh = vec![T::zero(); n * fin];
    let mut grads = Vec::with_capacity(heads.len());
    let mut offset = 0;
    for (head, hc) in heads.iter().zip(&cache.heads) {
        let w = head.width();
        let mut dslice = Vec::with_capacity(n * w);
        for i in 0..n {
            dslice.extend_from_slice(&dout.row(i)[offset..offset + w]);
        }
        let dagg = relu_backward(&hc.agg, &matrix(n, w, dslice));
        let dattn = matmul_nt(dagg.data(), n, w, hc.proj.data(), n);
        let mut dproj = matmul_tn(hc.attn.data(), n, n, dagg.data(), w);
        let de = masked_softmax_backward(&hc.attn, &matrix(n, n, dattn));
        let dpre = leaky_relu_backward(&hc.pre, &de, cache.slope);
        let mut ds1 = vec![T::zero(); n];
        let mut ds2 = vec![T::zero(); n];
        for i in 0..n {
            for (j, &g) in dpre.row(i).iter().enumerate() {
                ds1[i] += g;
                ds2[j] += g;
            }
        }
        let (a1, a2) = head.a.data().split_at(w);
        for i in 0..n {
            let row = &mut dproj[i * w..(i + 1) * w];
            for k in 0..w {
                row[k] += ds1[i] * a1[k] + ds2[i] * a2[k];
            }
        }
        let mut da = matmul_tn(hc.proj.data(), n, w, &ds1, 1);
        da.extend(matmul_tn(hc.proj.data(), n, w, &ds2, 1));
        let dw = matmul_tn(h.data(), n, fin, &dproj, w);
        let dx = matmul_nt(&dproj, n, w, head.w.data(), fin);
        dh.iter_mut().zip(&dx).for_each(|(a, &b)| *a += b);
        grads.push(HeadGrads {
            dw: matrix(fin, w, dw),
            da: Tensor::from_vec(&[2 * w], da).expect("shape by construction"),
        });
        offset += w;
    }
    Ok((matrix(n, fin, dh), grads))
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
