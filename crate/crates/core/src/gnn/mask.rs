use crate::nn::{Tensor, MASK_OFF};
use crate::rng::SeededRng;
use crate::scalar::Real;

/// Additive attention bias: 0 for connected pairs and the diagonal, -1e9
/// elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMask<T> {
    bias: Tensor<T>,
}

impl<T: Real> AdjacencyMask<T> {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut bias = Tensor::filled(&[n, n], T::lit(MASK_OFF));
        for i in 0..n {
            bias.data_mut()[i * n + i] = T::zero();
        }
        for &(a, b) in edges {
            if a < n && b < n {
                bias.data_mut()[a * n + b] = T::zero();
                bias.data_mut()[b * n + a] = T::zero();
            }
        }
        Self { bias }
    }

    /// Only self-loops.
    pub fn isolated(n: usize) -> Self {
        Self::from_edges(n, &[])
    }

    pub fn n(&self) -> usize {
        self.bias.rows()
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub fn is_connected(&self, i: usize, j: usize) -> bool {
        self.bias.at(i, j) == T::zero()
    }

    /// Disconnects each node independently with probability `rate`: its
    /// off-diagonal row and column become masked, its self-loop stays.
    /// A zero rate returns the mask unchanged without drawing.
    pub fn apply_disconnection(&self, rate: f64, rng: &mut SeededRng) -> Self {
        let n = self.n();
        let mut out = self.clone();
        if rate <= 0.0 {
            return out;
        }
        let off = T::lit(MASK_OFF);
        for i in 0..n {
            if rng.bernoulli(rate) {
                for j in 0..n {
                    if j != i {
                        out.bias.data_mut()[i * n + j] = off;
                        out.bias.data_mut()[j * n + i] = off;
                    }
                }
            }
        }
        out
    }

    /// Mask restricted to `keep` (in order).
    pub fn induced(&self, keep: &[usize]) -> Self {
        let n = self.n();
        let m = keep.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in keep {
            for &j in keep {
                data.push(self.bias.data()[i * n + j]);
            }
        }
        Self {
            bias: Tensor::from_vec(&[m, m], data).expect("square"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> AdjacencyMask<f64> {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        AdjacencyMask::from_edges(n, &edges)
    }

    fn symmetric(m: &AdjacencyMask<f64>) -> bool {
        (0..m.n()).all(|i| (0..m.n()).all(|j| m.bias().at(i, j) == m.bias().at(j, i)))
    }

    #[test]
    fn construction_is_symmetric_with_open_diagonal() {
        let m = ring(5);
        assert!(symmetric(&m));
        assert!((0..5).all(|i| m.is_connected(i, i)));
        assert!(m.is_connected(0, 4) && !m.is_connected(0, 2));
    }

    #[test]
    fn rate_zero_and_one() {
        let m = ring(6);
        let mut rng = SeededRng::new(0);
        assert_eq!(m.apply_disconnection(0.0, &mut rng), m);
        let all = m.apply_disconnection(1.0, &mut rng);
        assert_eq!(all, AdjacencyMask::isolated(6));
    }

    #[test]
    fn selected_fraction_matches_rate() {
        // 200 complete graphs of 50 nodes: a node ends up isolated iff it was
        // selected (all 49 others being selected too is ~1e-6 likely).
        let n = 50;
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let complete = AdjacencyMask::<f64>::from_edges(n, &edges);
        let mut rng = SeededRng::new(42);
        let mut isolated = 0;
        for _ in 0..200 {
            let out = complete.apply_disconnection(0.75, &mut rng);
            assert!(symmetric(&out));
            assert!((0..n).all(|i| out.is_connected(i, i)));
            isolated += (0..n).filter(|&i| (0..n).all(|j| j == i || !out.is_connected(i, j))).count();
        }
        let fraction = isolated as f64 / 10_000.0;
        assert!((fraction - 0.75).abs() < 0.02, "{fraction}");
    }

    #[test]
    fn induced_mask() {
        let m = ring(4);
        let sub = m.induced(&[0, 2, 3]);
        assert!(!sub.is_connected(0, 1));
        assert!(sub.is_connected(1, 2) && sub.is_connected(0, 2));
    }
}
