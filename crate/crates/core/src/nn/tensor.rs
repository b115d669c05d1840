use super::{shape_err, NnError};
use crate::rng::SeededRng;
use crate::scalar::Real;

/// Row-major array with an optional gradient buffer of the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    pub grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
            grad: None,
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(shape_err("from_vec", &[n], &[data.len()]));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    /// Glorot-style uniform init in `+-sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(|_| T::lit(rng.uniform(-bound, bound))).collect(),
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Rows of a 2-D tensor (length of a 1-D tensor).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Columns of a 2-D tensor (1 for a 1-D tensor).
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols() + j]
    }

    pub fn expect_shape(&self, op: &'static str, shape: &[usize]) -> Result<(), NnError> {
        if self.shape == shape {
            Ok(())
        } else {
            Err(shape_err(op, shape, &self.shape))
        }
    }

    /// Adds `g` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[T]) {
        assert_eq!(g.len(), self.data.len(), "gradient length");
        match &mut self.grad {
            Some(buf) => buf.iter_mut().zip(g).for_each(|(b, &x)| *b += x),
            None => self.grad = Some(g.to_vec()),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn grad_or_zeros(&self) -> Vec<T> {
        self.grad.clone().unwrap_or_else(|| vec![T::zero(); self.data.len()])
    }

    /// Selected rows stacked into a new tensor.
    pub fn gather_rows(&self, rows: impl IntoIterator<Item = usize>) -> Self {
        let c = self.cols();
        let mut data = Vec::new();
        let mut n = 0;
        for r in rows {
            data.extend_from_slice(self.row(r));
            n += 1;
        }
        Self {
            shape: vec![n, c],
            data,
            grad: None,
        }
    }
}
